//! Sample lattices in the `(r, ξ, θ)` chart.
//!
//! Radial nodes include both endpoints. Angular nodes are periodic: `n`
//! nodes cover one period with spacing `P / n`. The radial backend is the
//! degenerate case `n_xi = n_theta = 1`, which lets most lattice code run
//! unchanged on both backends.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    Radial1D,
    Torus3D,
}

/// An axis-aligned excised box given by inclusive node ranges per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Excision {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl Excision {
    pub fn contains(&self, idx: [usize; 3]) -> bool {
        (0..3).all(|a| idx[a] >= self.lo[a] && idx[a] <= self.hi[a])
    }

    pub fn strictly_contains(&self, idx: [usize; 3]) -> bool {
        (0..3).all(|a| idx[a] > self.lo[a] && idx[a] < self.hi[a])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub backend: Backend,
    pub r_min: f64,
    pub r_max: f64,
    pub n_r: usize,
    pub periods: [f64; 2],
    pub n_xi: usize,
    pub n_theta: usize,
    pub excisions: Vec<Excision>,
}

/// Role of a lattice node in the boundary value problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    /// On a boundary component; carries the component id.
    Boundary(usize),
    /// Strictly inside an excised box.
    Excised(usize),
}

impl Grid {
    pub fn radial(r_min: f64, r_max: f64, n_r: usize) -> Self {
        Grid {
            backend: Backend::Radial1D,
            r_min,
            r_max,
            n_r,
            periods: [1.0, 1.0],
            n_xi: 1,
            n_theta: 1,
            excisions: Vec::new(),
        }
    }

    pub fn torus(r_min: f64, r_max: f64, n_r: usize, n_xi: usize, n_theta: usize) -> Self {
        Grid {
            backend: Backend::Torus3D,
            r_min,
            r_max,
            n_r,
            periods: [1.0, 1.0],
            n_xi,
            n_theta,
            excisions: Vec::new(),
        }
    }

    pub fn with_periods(mut self, periods: [f64; 2]) -> Self {
        self.periods = periods;
        self
    }

    pub fn with_excision(mut self, ex: Excision) -> Self {
        self.excisions.push(ex);
        self
    }

    /// Snap a coordinate box `[r0,r1]×[ξ0,ξ1]×[θ0,θ1]` to the nearest nodes.
    pub fn excision_from_coords(&self, r: [f64; 2], xi: [f64; 2], theta: [f64; 2]) -> Excision {
        let snap = |x: f64, origin: f64, h: f64| ((x - origin) / h).round().max(0.0) as usize;
        let (hr, hx, ht) = (self.h_r(), self.h_xi(), self.h_theta());
        Excision {
            lo: [snap(r[0], self.r_min, hr), snap(xi[0], 0.0, hx), snap(theta[0], 0.0, ht)],
            hi: [snap(r[1], self.r_min, hr), snap(xi[1], 0.0, hx), snap(theta[1], 0.0, ht)],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.n_r, self.n_xi, self.n_theta]
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_xi * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_radial(&self) -> bool {
        self.backend == Backend::Radial1D
    }

    pub fn h_r(&self) -> f64 {
        (self.r_max - self.r_min) / (self.n_r - 1) as f64
    }

    pub fn h_xi(&self) -> f64 {
        self.periods[0] / self.n_xi as f64
    }

    pub fn h_theta(&self) -> f64 {
        self.periods[1] / self.n_theta as f64
    }

    pub fn spacings(&self) -> [f64; 3] {
        [self.h_r(), self.h_xi(), self.h_theta()]
    }

    /// Largest spacing measured in the asymptotic chart (radial step scaled by `1/r_min`).
    pub fn h(&self) -> f64 {
        let hr = self.h_r() / self.r_min;
        if self.is_radial() {
            hr
        } else {
            hr.max(self.h_xi()).max(self.h_theta())
        }
    }

    pub fn torus_area(&self) -> f64 {
        self.periods[0] * self.periods[1]
    }

    pub fn r(&self, i: usize) -> f64 {
        if i + 1 == self.n_r {
            self.r_max
        } else {
            self.r_min + i as f64 * self.h_r()
        }
    }

    pub fn xi(&self, j: usize) -> f64 {
        j as f64 * self.h_xi()
    }

    pub fn theta(&self, l: usize) -> f64 {
        l as f64 * self.h_theta()
    }

    pub fn coords(&self, idx: [usize; 3]) -> [f64; 3] {
        [self.r(idx[0]), self.xi(idx[1]), self.theta(idx[2])]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.n_xi + j) * self.n_theta + l
    }

    #[inline]
    pub fn unindex(&self, n: usize) -> [usize; 3] {
        let l = n % self.n_theta;
        let rest = n / self.n_theta;
        [rest / self.n_xi, rest % self.n_xi, l]
    }

    /// Periodic wrap of an angular offset.
    #[inline]
    pub fn wrap(&self, axis: usize, j: isize) -> usize {
        let n = self.dims()[axis] as isize;
        j.rem_euclid(n) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_r < 8 {
            return Err(Error::GridTooCoarse(format!("n_r = {} < 8", self.n_r)));
        }
        if !(self.r_min >= 1.0) {
            return Err(Error::InvalidGrid(format!("r_min = {} < 1", self.r_min)));
        }
        if !(self.r_max > self.r_min) || !self.r_max.is_finite() {
            return Err(Error::InvalidGrid(format!("r_max = {} must exceed r_min", self.r_max)));
        }
        if !(self.periods[0] > 0.0 && self.periods[1] > 0.0) {
            return Err(Error::InvalidGrid("torus periods must be positive".into()));
        }
        match self.backend {
            Backend::Radial1D => {
                if self.n_xi != 1 || self.n_theta != 1 {
                    return Err(Error::InvalidGrid("radial grid must have n_xi = n_theta = 1".into()));
                }
                if !self.excisions.is_empty() {
                    return Err(Error::InvalidGrid("excisions need the torus backend".into()));
                }
            }
            Backend::Torus3D => {
                if self.n_xi < 6 || self.n_theta < 6 {
                    return Err(Error::GridTooCoarse(format!(
                        "angular counts {}x{} below 6",
                        self.n_xi, self.n_theta
                    )));
                }
            }
        }
        let dims = self.dims();
        for (b, ex) in self.excisions.iter().enumerate() {
            for a in 0..3 {
                if ex.hi[a] < ex.lo[a] + 2 {
                    return Err(Error::InvalidGrid(format!("box {b} is thinner than 3 nodes on axis {a}")));
                }
            }
            if ex.lo[0] < 3 || ex.hi[0] + 4 > self.n_r {
                return Err(Error::InvalidGrid(format!("box {b} is not strictly interior in r")));
            }
            for a in 1..3 {
                if ex.hi[a] >= dims[a] || ex.hi[a] - ex.lo[a] + 4 > dims[a] {
                    return Err(Error::InvalidGrid(format!("box {b} wraps around angular axis {a}")));
                }
            }
        }
        for (b, e) in self.excisions.iter().enumerate() {
            for (c, f) in self.excisions.iter().enumerate().skip(b + 1) {
                if !self.separated(e, f) {
                    return Err(Error::InvalidGrid(format!("boxes {b} and {c} overlap or touch")));
                }
            }
        }
        Ok(())
    }

    fn separated(&self, e: &Excision, f: &Excision) -> bool {
        let dims = self.dims();
        (0..3).any(|a| {
            let dist = |x: usize, y: usize| {
                let d = x.abs_diff(y);
                if a == 0 { d } else { d.min(dims[a] - d) }
            };
            let gap = (e.lo[a]..=e.hi[a])
                .flat_map(|x| (f.lo[a]..=f.hi[a]).map(move |y| (x, y)))
                .map(|(x, y)| dist(x, y))
                .min()
                .unwrap_or(0);
            gap >= 3
        })
    }

    /// Boundary component id for a box index.
    pub fn box_component(b: usize) -> usize {
        b + 2
    }

    /// Classify every node. Component 0 is the inner torus, 1 the outer torus,
    /// and `2 + b` the surface of excised box `b`.
    pub fn classify(&self) -> Vec<NodeKind> {
        let mut kinds = vec![NodeKind::Interior; self.len()];
        for (n, kind) in kinds.iter_mut().enumerate() {
            let idx = self.unindex(n);
            if idx[0] == 0 {
                *kind = NodeKind::Boundary(0);
            } else if idx[0] + 1 == self.n_r {
                *kind = NodeKind::Boundary(1);
            } else {
                for (b, ex) in self.excisions.iter().enumerate() {
                    if ex.strictly_contains(idx) {
                        *kind = NodeKind::Excised(Self::box_component(b));
                    } else if ex.contains(idx) {
                        *kind = NodeKind::Boundary(Self::box_component(b));
                    }
                }
            }
        }
        kinds
    }

    fn cell_in_domain(&self, c: [isize; 3]) -> bool {
        if c[0] < 0 || c[0] + 1 >= self.n_r as isize {
            return false;
        }
        let i = c[0] as usize;
        let j = self.wrap(1, c[1]);
        let l = self.wrap(2, c[2]);
        !self.excisions.iter().any(|ex| {
            i >= ex.lo[0]
                && i < ex.hi[0]
                && j >= ex.lo[1]
                && j < ex.hi[1]
                && l >= ex.lo[2]
                && l < ex.hi[2]
        })
    }

    /// Trapezoid volume weights in coordinate measure (`dr dξ dθ`), zero
    /// outside the domain. Nodes on box surfaces get the fraction of their
    /// dual cell lying outside the box.
    pub fn coordinate_weights(&self) -> Vec<f64> {
        let [hr, hx, ht] = self.spacings();
        let cell = hr * hx * ht;
        (0..self.len())
            .map(|n| {
                let [i, j, l] = self.unindex(n);
                let mut count = 0;
                for di in [-1isize, 0] {
                    for dj in [-1isize, 0] {
                        for dl in [-1isize, 0] {
                            let c = [i as isize + di, j as isize + dj, l as isize + dl];
                            if self.cell_in_domain(c) {
                                count += 1;
                            }
                        }
                    }
                }
                cell * count as f64 / 8.0
            })
            .collect()
    }

    /// A sub-grid keeping radial nodes `0..n_keep`.
    pub fn truncated(&self, n_keep: usize) -> Grid {
        let mut g = self.clone();
        g.r_max = self.r(n_keep - 1);
        g.n_r = n_keep;
        g
    }

    /// Multilinear interpolation weights at chart point `x`; angles wrap.
    pub fn interpolation_weights(&self, x: [f64; 3]) -> Vec<(usize, f64)> {
        let s = ((x[0] - self.r_min) / self.h_r()).clamp(0.0, (self.n_r - 1) as f64);
        let i0 = (s.floor() as usize).min(self.n_r.saturating_sub(2));
        let fr = s - i0 as f64;
        let radial = [(i0, 1.0 - fr), (i0 + 1, fr)];
        if self.is_radial() {
            return radial.iter().map(|&(i, w)| (self.index(i, 0, 0), w)).collect();
        }
        let split = |axis: usize, h: f64| {
            let s = x[axis] / h;
            let j0 = s.floor();
            let f = s - j0;
            [(self.wrap(axis, j0 as isize), 1.0 - f), (self.wrap(axis, j0 as isize + 1), f)]
        };
        let xs = split(1, self.h_xi());
        let ts = split(2, self.h_theta());
        let mut out = Vec::with_capacity(8);
        for &(i, wi) in &radial {
            for &(j, wj) in &xs {
                for &(l, wl) in &ts {
                    out.push((self.index(i, j, l), wi * wj * wl));
                }
            }
        }
        out
    }

    /// Nearest radial node index to `r`.
    pub fn nearest_radial(&self, r: f64) -> usize {
        (((r - self.r_min) / self.h_r()).round().max(0.0) as usize).min(self.n_r - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_weights_sum_to_volume() {
        let g = Grid::radial(1.0, 3.0, 21).with_periods([2.0, 0.5]);
        let w: f64 = g.coordinate_weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-12);
    }

    #[test]
    fn excised_box_weights() {
        let g = Grid::torus(1.0, 2.0, 16, 12, 12).with_excision(Excision { lo: [4, 3, 3], hi: [8, 7, 6] });
        g.validate().unwrap();
        let total: f64 = g.coordinate_weights().iter().sum();
        let [hr, hx, ht] = g.spacings();
        let box_vol = 4.0 * hr * 4.0 * hx * 3.0 * ht;
        assert!((total - (1.0 - box_vol)).abs() < 1e-12);
        let kinds = g.classify();
        assert_eq!(kinds[g.index(6, 5, 4)], NodeKind::Excised(2));
        assert_eq!(kinds[g.index(4, 5, 4)], NodeKind::Boundary(2));
        assert_eq!(kinds[g.index(0, 5, 4)], NodeKind::Boundary(0));
        assert_eq!(kinds[g.index(15, 0, 0)], NodeKind::Boundary(1));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(Grid::radial(1.0, 2.0, 7).validate(), Err(Error::GridTooCoarse(_))));
        assert!(Grid::radial(0.5, 2.0, 20).validate().is_err());
        let touching = Grid::torus(1.0, 2.0, 20, 16, 16)
            .with_excision(Excision { lo: [4, 2, 2], hi: [7, 5, 5] })
            .with_excision(Excision { lo: [8, 2, 2], hi: [11, 5, 5] });
        assert!(touching.validate().is_err());
        let apart = Grid::torus(1.0, 2.0, 20, 16, 16)
            .with_excision(Excision { lo: [4, 2, 2], hi: [7, 5, 5] })
            .with_excision(Excision { lo: [11, 2, 2], hi: [14, 5, 5] });
        apart.validate().unwrap();
        let edge = Grid::torus(1.0, 2.0, 20, 16, 16).with_excision(Excision { lo: [1, 2, 2], hi: [5, 5, 5] });
        assert!(edge.validate().is_err());
    }

    #[test]
    fn index_roundtrip() {
        let g = Grid::torus(1.0, 2.0, 9, 7, 6);
        for n in 0..g.len() {
            let [i, j, l] = g.unindex(n);
            assert_eq!(g.index(i, j, l), n);
        }
    }
}
