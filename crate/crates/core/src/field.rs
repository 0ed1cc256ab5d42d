//! Second-order partial derivatives of sampled scalar fields.
//!
//! Scalar fields are plain `Vec<f64>` laid out like [`Grid::index`]. Near the
//! radial ends and next to excised boxes the stencils become one-sided so that
//! no value from inside a box is ever read.

use crate::fd::{d1_order2, d2_order2, Stencil};
use crate::grid::{Grid, NodeKind};
use crate::tensor::Sym3;

/// Lattice with node roles, shared by everything that differentiates `u`.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub grid: Grid,
    pub kinds: Vec<NodeKind>,
}

impl Lattice {
    pub fn new(grid: &Grid) -> Self {
        Lattice { grid: grid.clone(), kinds: grid.classify() }
    }

    pub fn axes(&self) -> &'static [usize] {
        if self.grid.is_radial() {
            &[0]
        } else {
            &[0, 1, 2]
        }
    }

    /// Neighbor of `idx` offset by `o` along `axis`, if it is a usable (non-excised) node.
    #[inline]
    pub fn neighbor(&self, idx: [usize; 3], axis: usize, o: isize) -> Option<usize> {
        let mut p = idx;
        if axis == 0 {
            let i = idx[0] as isize + o;
            if i < 0 || i >= self.grid.n_r as isize {
                return None;
            }
            p[0] = i as usize;
        } else {
            p[axis] = self.grid.wrap(axis, idx[axis] as isize + o);
        }
        let n = self.grid.index(p[0], p[1], p[2]);
        match self.kinds[n] {
            NodeKind::Excised(_) => None,
            _ => Some(n),
        }
    }

    fn usable(&self, idx: [usize; 3], axis: usize, offsets: &[isize]) -> bool {
        offsets.iter().all(|&o| self.neighbor(idx, axis, o).is_some())
    }

    /// First-derivative stencil along `axis` at `idx`, avoiding excised nodes.
    pub fn d1_stencil(&self, idx: [usize; 3], axis: usize) -> Option<Stencil> {
        let periodic = axis > 0;
        let dim = self.grid.dims()[axis];
        if self.usable(idx, axis, &[-1, 1]) {
            return Some(d1_order2(idx[axis], dim, periodic || (idx[axis] >= 1 && idx[axis] + 1 < dim)));
        }
        if self.usable(idx, axis, &[1, 2]) {
            return Some(d1_order2(0, 3, false));
        }
        if self.usable(idx, axis, &[-1, -2]) {
            return Some(d1_order2(2, 3, false));
        }
        None
    }

    pub fn d2_stencil(&self, idx: [usize; 3], axis: usize) -> Option<Stencil> {
        if self.usable(idx, axis, &[-1, 1]) {
            return Some(d2_order2(1, 3, false));
        }
        if self.usable(idx, axis, &[1, 2, 3]) {
            return Some(d2_order2(0, 4, false));
        }
        if self.usable(idx, axis, &[-1, -2, -3]) {
            return Some(d2_order2(3, 4, false));
        }
        None
    }

    fn value(&self, u: &[f64], idx: [usize; 3], axis: usize, o: isize) -> f64 {
        if o == 0 {
            return u[self.grid.index(idx[0], idx[1], idx[2])];
        }
        u[self.neighbor(idx, axis, o).expect("stencil checked")]
    }

    fn shifted(&self, idx: [usize; 3], axis: usize, o: isize) -> [usize; 3] {
        let mut p = idx;
        if axis == 0 {
            p[0] = (idx[0] as isize + o) as usize;
        } else {
            p[axis] = self.grid.wrap(axis, idx[axis] as isize + o);
        }
        p
    }

    pub fn partial(&self, u: &[f64], idx: [usize; 3], axis: usize) -> f64 {
        let h = self.grid.spacings()[axis];
        match self.d1_stencil(idx, axis) {
            Some(st) => st.apply(|o| self.value(u, idx, axis, o)) / h,
            None => 0.0,
        }
    }

    /// Coordinate gradient and Hessian of `u` at node `n`. Zero inside boxes.
    pub fn derivatives(&self, u: &[f64], n: usize) -> ([f64; 3], Sym3) {
        let mut grad = [0.0; 3];
        let mut hess = Sym3::ZERO;
        if matches!(self.kinds[n], NodeKind::Excised(_)) {
            return (grad, hess);
        }
        let idx = self.grid.unindex(n);
        let h = self.grid.spacings();
        for &a in self.axes() {
            grad[a] = self.partial(u, idx, a);
            if let Some(st) = self.d2_stencil(idx, a) {
                hess.set(a, a, st.apply(|o| self.value(u, idx, a, o)) / (h[a] * h[a]));
            }
        }
        for &a in self.axes() {
            for &b in self.axes() {
                if b <= a {
                    continue;
                }
                let v = match self.d1_stencil(idx, a) {
                    Some(st) => st.apply(|o| self.partial(u, self.shifted(idx, a, o), b)) / h[a],
                    None => 0.0,
                };
                hess.set(a, b, v);
            }
        }
        (grad, hess)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Excision;

    #[test]
    fn exact_on_quadratics_including_near_boxes() {
        let grid = Grid::torus(1.0, 2.0, 17, 16, 16).with_excision(Excision { lo: [5, 4, 4], hi: [9, 8, 9] });
        grid.validate().unwrap();
        let lat = Lattice::new(&grid);
        // Polynomials are not periodic, so stay away from the angular seam.
        let f = |x: [f64; 3]| 2.0 * x[0] * x[0] - x[0] * x[1] + 0.5 * x[1] * x[2] + x[2] * x[2];
        let u: Vec<f64> = (0..grid.len()).map(|n| f(grid.coords(grid.unindex(n)))).collect();
        for n in 0..grid.len() {
            let idx = grid.unindex(n);
            if matches!(lat.kinds[n], NodeKind::Excised(_)) || idx[1] < 3 || idx[1] > 12 || idx[2] < 3 || idx[2] > 12 {
                continue;
            }
            let x = grid.coords(idx);
            let (g, h) = lat.derivatives(&u, n);
            assert!((g[0] - (4.0 * x[0] - x[1])).abs() < 1e-10, "{idx:?}");
            assert!((g[1] - (-x[0] + 0.5 * x[2])).abs() < 1e-10);
            assert!((h.get(0, 0) - 4.0).abs() < 1e-8);
            assert!((h.get(0, 1) + 1.0).abs() < 1e-8, "{idx:?} {}", h.get(0, 1));
            assert!((h.get(1, 2) - 0.5).abs() < 1e-8);
            assert!((h.get(2, 2) - 2.0).abs() < 1e-8);
        }
    }
}
