//! Finite-difference stencils on uniform lattices.

/// Offsets and weights of a one-dimensional stencil, unscaled by the spacing.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub offsets: [isize; 6],
    pub weights: [f64; 6],
    pub len: usize,
}

impl Stencil {
    fn new(offsets: &[isize], weights: &[f64], denom: f64) -> Self {
        let mut s = Stencil { offsets: [0; 6], weights: [0.0; 6], len: offsets.len() };
        for (k, (&o, &w)) in offsets.iter().zip(weights).enumerate() {
            s.offsets[k] = o;
            s.weights[k] = w / denom;
        }
        s
    }

    fn mirrored(mut self, sign: f64) -> Self {
        for k in 0..self.len {
            self.offsets[k] = -self.offsets[k];
            self.weights[k] *= sign;
        }
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        (0..self.len).map(move |k| (self.offsets[k], self.weights[k]))
    }

    pub fn apply(&self, f: impl Fn(isize) -> f64) -> f64 {
        self.iter().map(|(o, w)| w * f(o)).sum()
    }
}

/// Fourth-order first derivative at node `i` of `n`; one-sided near the ends
/// of a non-periodic axis.
pub fn d1_order4(i: usize, n: usize, periodic: bool) -> Stencil {
    let centered = Stencil::new(&[-2, -1, 1, 2], &[1.0, -8.0, 8.0, -1.0], 12.0);
    if periodic || (i >= 2 && i + 2 < n) {
        return centered;
    }
    let edge0 = Stencil::new(&[0, 1, 2, 3, 4], &[-25.0, 48.0, -36.0, 16.0, -3.0], 12.0);
    let edge1 = Stencil::new(&[-1, 0, 1, 2, 3], &[-3.0, -10.0, 18.0, -6.0, 1.0], 12.0);
    match i {
        0 => edge0,
        1 => edge1,
        _ if i + 1 == n => edge0.mirrored(-1.0),
        _ => edge1.mirrored(-1.0),
    }
}

/// Fourth-order second derivative at node `i` of `n`.
pub fn d2_order4(i: usize, n: usize, periodic: bool) -> Stencil {
    let centered = Stencil::new(&[-2, -1, 0, 1, 2], &[-1.0, 16.0, -30.0, 16.0, -1.0], 12.0);
    if periodic || (i >= 2 && i + 2 < n) {
        return centered;
    }
    let edge0 = Stencil::new(&[0, 1, 2, 3, 4, 5], &[45.0, -154.0, 214.0, -156.0, 61.0, -10.0], 12.0);
    let edge1 = Stencil::new(&[-1, 0, 1, 2, 3, 4], &[10.0, -15.0, -4.0, 14.0, -6.0, 1.0], 12.0);
    match i {
        0 => edge0,
        1 => edge1,
        _ if i + 1 == n => edge0.mirrored(1.0),
        _ => edge1.mirrored(1.0),
    }
}

/// Second-order first derivative; one-sided three-point at the ends.
pub fn d1_order2(i: usize, n: usize, periodic: bool) -> Stencil {
    if periodic || (i >= 1 && i + 1 < n) {
        return Stencil::new(&[-1, 1], &[-1.0, 1.0], 2.0);
    }
    let edge = Stencil::new(&[0, 1, 2], &[-3.0, 4.0, -1.0], 2.0);
    if i == 0 {
        edge
    } else {
        edge.mirrored(-1.0)
    }
}

/// Second-order second derivative; one-sided four-point at the ends.
pub fn d2_order2(i: usize, n: usize, periodic: bool) -> Stencil {
    if periodic || (i >= 1 && i + 1 < n) {
        return Stencil::new(&[-1, 0, 1], &[1.0, -2.0, 1.0], 1.0);
    }
    let edge = Stencil::new(&[0, 1, 2, 3], &[2.0, -5.0, 4.0, -1.0], 1.0);
    if i == 0 {
        edge
    } else {
        edge.mirrored(1.0)
    }
}

/// Observed convergence order between successive errors at spacings halved each step.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply_at(s: Stencil, f: impl Fn(f64) -> f64, x0: f64, h: f64, scale: f64) -> f64 {
        s.apply(|o| f(x0 + o as f64 * h)) / scale
    }

    #[test]
    fn stencils_exact_on_polynomials() {
        let n = 11;
        let h = 0.1;
        for i in 0..n {
            let x = i as f64 * h;
            let quartic = |y: f64| y.powi(4) - 2.0 * y.powi(3) + y;
            let d = apply_at(d1_order4(i, n, false), quartic, x, h, h);
            assert!((d - (4.0 * x.powi(3) - 6.0 * x * x + 1.0)).abs() < 1e-10, "d1 at {i}");
            let d2 = apply_at(d2_order4(i, n, false), quartic, x, h, h * h);
            assert!((d2 - (12.0 * x * x - 12.0 * x)).abs() < 1e-8, "d2 at {i}");
            let quad = |y: f64| 3.0 * y * y - y;
            let d = apply_at(d1_order2(i, n, false), quad, x, h, h);
            assert!((d - (6.0 * x - 1.0)).abs() < 1e-10);
            let cubic_free = |y: f64| y * y * y;
            let d2 = apply_at(d2_order2(i, n, false), cubic_free, x, h, h * h);
            assert!((d2 - 6.0 * x).abs() < 1e-8);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let err = |n: usize| {
            let h = 1.0 / (n - 1) as f64;
            (0..n)
                .map(|i| {
                    let x = i as f64 * h;
                    let d = apply_at(d1_order4(i, n, false), f64::sin, x, h, h);
                    (d - x.cos()).abs()
                })
                .fold(0.0, f64::max)
        };
        let orders = observed_orders(&[err(11), err(21), err(41)]);
        assert!(orders.iter().all(|&p| p > 3.7), "{orders:?}");
    }
}
