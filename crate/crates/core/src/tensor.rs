use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

/// Symmetric 3×3 tensor, packed as `[00, 01, 02, 11, 12, 22]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym3(pub [f64; 6]);

const PACK: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];

impl Sym3 {
    pub const ZERO: Sym3 = Sym3([0.0; 6]);
    pub const IDENTITY: Sym3 = Sym3([1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        Sym3([a, 0.0, 0.0, b, 0.0, c])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[PACK[i][j]]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.0[PACK[i][j]] = v;
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut s = Sym3::ZERO;
        for i in 0..3 {
            for j in i..3 {
                s.set(i, j, f(i, j));
            }
        }
        s
    }

    pub fn det(&self) -> f64 {
        let m = |i, j| self.get(i, j);
        m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(1, 2)) - m(0, 1) * (m(0, 1) * m(2, 2) - m(1, 2) * m(0, 2))
            + m(0, 2) * (m(0, 1) * m(1, 2) - m(1, 1) * m(0, 2))
    }

    /// Inverse, or `None` unless the tensor is positive definite.
    pub fn inverse_spd(&self) -> Option<Sym3> {
        let m = |i, j| self.get(i, j);
        let minor2 = m(0, 0) * m(1, 1) - m(0, 1) * m(0, 1);
        let det = self.det();
        if !(m(0, 0) > 0.0 && minor2 > 0.0 && det > 0.0) || !det.is_finite() {
            return None;
        }
        let inv = 1.0 / det;
        Some(Sym3([
            (m(1, 1) * m(2, 2) - m(1, 2) * m(1, 2)) * inv,
            (m(0, 2) * m(1, 2) - m(0, 1) * m(2, 2)) * inv,
            (m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1)) * inv,
            (m(0, 0) * m(2, 2) - m(0, 2) * m(0, 2)) * inv,
            (m(0, 1) * m(0, 2) - m(0, 0) * m(1, 2)) * inv,
            minor2 * inv,
        ]))
    }

    /// Full contraction `a^{ij} b_{ij}`.
    pub fn contract(&self, other: &Sym3) -> f64 {
        let a = &self.0;
        let b = &other.0;
        a[0] * b[0] + a[3] * b[3] + a[5] * b[5] + 2.0 * (a[1] * b[1] + a[2] * b[2] + a[4] * b[4])
    }

    /// `v^i T_{ij} w^j`.
    pub fn bilinear(&self, v: &[f64; 3], w: &[f64; 3]) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += v[i] * self.get(i, j) * w[j];
            }
        }
        s
    }

    /// `T_{ij} v^j`.
    pub fn apply(&self, v: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|j| self.get(i, j) * v[j]).sum();
        }
        out
    }

    /// `|T|² = g^{ik} g^{jl} T_{ij} T_{kl}` with `ginv` the inverse metric.
    pub fn norm_sq(&self, ginv: &Sym3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        s += ginv.get(i, k) * ginv.get(j, l) * self.get(i, j) * self.get(k, l);
                    }
                }
            }
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn scale(&self, s: f64) -> Sym3 {
        Sym3(self.0.map(|x| x * s))
    }
}

impl Add for Sym3 {
    type Output = Sym3;
    fn add(self, o: Sym3) -> Sym3 {
        Sym3(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }
}

impl Sub for Sym3 {
    type Output = Sym3;
    fn sub(self, o: Sym3) -> Sym3 {
        Sym3(std::array::from_fn(|i| self.0[i] - o.0[i]))
    }
}

impl Mul<f64> for Sym3 {
    type Output = Sym3;
    fn mul(self, s: f64) -> Sym3 {
        self.scale(s)
    }
}

/// Symmetric 2×2 tensor on a surface, packed as `[00, 01, 11]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2(pub [f64; 3]);

impl Sym2 {
    pub fn det(&self) -> f64 {
        self.0[0] * self.0[2] - self.0[1] * self.0[1]
    }

    pub fn inverse(&self) -> Option<Sym2> {
        let d = self.det();
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        Some(Sym2([self.0[2] / d, -self.0[1] / d, self.0[0] / d]))
    }

    pub fn scale(&self, s: f64) -> Sym2 {
        Sym2(self.0.map(|x| x * s))
    }

    pub fn trace_with(&self, inv: &Sym2) -> f64 {
        inv.0[0] * self.0[0] + 2.0 * inv.0[1] * self.0[1] + inv.0[2] * self.0[2]
    }

    pub fn norm_sq(&self, inv: &Sym2) -> f64 {
        let a = [[self.0[0], self.0[1]], [self.0[1], self.0[2]]];
        let g = [[inv.0[0], inv.0[1]], [inv.0[1], inv.0[2]]];
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        s += g[i][k] * g[j][l] * a[i][j] * a[k][l];
                    }
                }
            }
        }
        s
    }
}
