//! Second-order forward-mode differentiation in three variables.
//!
//! Closed-form models are written once in terms of [`Dual3`] and yield exact
//! first and second partial derivatives, independent of any stencil.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual3 {
    pub v: f64,
    pub d: [f64; 3],
    /// Hessian packed like [`crate::tensor::Sym3`].
    pub h: [f64; 6],
}

const PACK: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];

impl Dual3 {
    pub fn constant(v: f64) -> Self {
        Dual3 { v, d: [0.0; 3], h: [0.0; 6] }
    }

    pub fn variable(v: f64, axis: usize) -> Self {
        let mut d = [0.0; 3];
        d[axis] = 1.0;
        Dual3 { v, d, h: [0.0; 6] }
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.h[PACK[i][j]]
    }

    /// Apply a scalar function given its value and first two derivatives at `self.v`.
    fn chain(&self, f: f64, f1: f64, f2: f64) -> Self {
        let mut h = [0.0; 6];
        for i in 0..3 {
            for j in i..3 {
                h[PACK[i][j]] = f1 * self.hess(i, j) + f2 * self.d[i] * self.d[j];
            }
        }
        Dual3 { v: f, d: self.d.map(|x| f1 * x), h }
    }

    pub fn powf(self, p: f64) -> Self {
        let v = self.v;
        self.chain(v.powf(p), p * v.powf(p - 1.0), p * (p - 1.0) * v.powf(p - 2.0))
    }

    pub fn powi(self, p: i32) -> Self {
        let v = self.v;
        let pf = p as f64;
        self.chain(v.powi(p), pf * v.powi(p - 1), pf * (pf - 1.0) * v.powi(p - 2))
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Self {
        let v = self.v;
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn cosh(self) -> Self {
        let (c, s) = (self.v.cosh(), self.v.sinh());
        self.chain(c, s, c)
    }

    pub fn tanh(self) -> Self {
        let t = self.v.tanh();
        let sech2 = 1.0 - t * t;
        self.chain(t, sech2, -2.0 * t * sech2)
    }

    pub fn scale(self, s: f64) -> Self {
        Dual3 { v: self.v * s, d: self.d.map(|x| x * s), h: self.h.map(|x| x * s) }
    }
}

impl Add for Dual3 {
    type Output = Dual3;
    fn add(self, o: Dual3) -> Dual3 {
        Dual3 {
            v: self.v + o.v,
            d: std::array::from_fn(|i| self.d[i] + o.d[i]),
            h: std::array::from_fn(|i| self.h[i] + o.h[i]),
        }
    }
}

impl Add<f64> for Dual3 {
    type Output = Dual3;
    fn add(mut self, o: f64) -> Dual3 {
        self.v += o;
        self
    }
}

impl Sub for Dual3 {
    type Output = Dual3;
    fn sub(self, o: Dual3) -> Dual3 {
        self + (-o)
    }
}

impl Sub<f64> for Dual3 {
    type Output = Dual3;
    fn sub(self, o: f64) -> Dual3 {
        self + (-o)
    }
}

impl Neg for Dual3 {
    type Output = Dual3;
    fn neg(self) -> Dual3 {
        self.scale(-1.0)
    }
}

impl Mul for Dual3 {
    type Output = Dual3;
    fn mul(self, o: Dual3) -> Dual3 {
        let mut h = [0.0; 6];
        for i in 0..3 {
            for j in i..3 {
                h[PACK[i][j]] = self.hess(i, j) * o.v
                    + self.v * o.hess(i, j)
                    + self.d[i] * o.d[j]
                    + self.d[j] * o.d[i];
            }
        }
        Dual3 { v: self.v * o.v, d: std::array::from_fn(|i| self.d[i] * o.v + self.v * o.d[i]), h }
    }
}

impl Mul<f64> for Dual3 {
    type Output = Dual3;
    fn mul(self, s: f64) -> Dual3 {
        self.scale(s)
    }
}

impl Mul<Dual3> for f64 {
    type Output = Dual3;
    fn mul(self, d: Dual3) -> Dual3 {
        d.scale(self)
    }
}

impl Div for Dual3 {
    type Output = Dual3;
    fn div(self, o: Dual3) -> Dual3 {
        self * o.powi(-1)
    }
}

impl Div<f64> for Dual3 {
    type Output = Dual3;
    fn div(self, s: f64) -> Dual3 {
        self.scale(1.0 / s)
    }
}

impl Add<Dual3> for f64 {
    type Output = Dual3;
    fn add(self, d: Dual3) -> Dual3 {
        d + self
    }
}

impl Sub<Dual3> for f64 {
    type Output = Dual3;
    fn sub(self, d: Dual3) -> Dual3 {
        -d + self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_and_chain() {
        let x = Dual3::variable(0.7, 0);
        let y = Dual3::variable(1.3, 1);
        let f = (x * y).sqrt() * (x.cos() + y.powi(2)) / (1.0 + x.exp());
        let g = |a: f64, b: f64| (a * b).sqrt() * (a.cos() + b * b) / (1.0 + a.exp());
        let e = 1e-4;
        let fx = (g(0.7 + e, 1.3) - g(0.7 - e, 1.3)) / (2.0 * e);
        let fxy = (g(0.7 + e, 1.3 + e) - g(0.7 + e, 1.3 - e) - g(0.7 - e, 1.3 + e) + g(0.7 - e, 1.3 - e)) / (4.0 * e * e);
        let fyy = (g(0.7, 1.3 + e) - 2.0 * g(0.7, 1.3) + g(0.7, 1.3 - e)) / (e * e);
        assert!((f.v - g(0.7, 1.3)).abs() < 1e-14);
        assert!((f.d[0] - fx).abs() < 1e-7);
        assert!((f.hess(0, 1) - fxy).abs() < 1e-5);
        assert!((f.hess(1, 1) - fyy).abs() < 1e-5);
        assert_eq!(f.d[2], 0.0);
    }
}
