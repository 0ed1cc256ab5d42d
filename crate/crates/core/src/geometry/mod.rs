//! Connection, curvature and constraints of sampled initial data.

pub mod surface;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{InitialDataSet, Jet};
use crate::error::{Error, Result};
use crate::field::Lattice;
use crate::tensor::Sym3;

pub use surface::{coordinate_torus, NormalOrientation, SurfaceGeometry, SurfaceSample};

/// Inverse metric, volume density and Christoffel symbols at one point.
#[derive(Debug, Clone, Copy)]
pub struct PointGeometry {
    pub ginv: Sym3,
    pub sqrt_det: f64,
    /// `gamma[k]` holds `Γ^k_ij`.
    pub gamma: [Sym3; 3],
    pub trk: f64,
}

impl PointGeometry {
    pub fn from_jet(jet: &Jet, node: usize) -> Result<Self> {
        let ginv = jet.g.inverse_spd().ok_or(Error::SingularMetric { node })?;
        let gamma = christoffel(&ginv, &jet.dg);
        Ok(PointGeometry { ginv, sqrt_det: jet.g.det().sqrt(), gamma, trk: jet.k.contract(&ginv) })
    }

    /// `g^{ij} Γ^k_ij`, the first-order part of the Laplacian with a sign flip.
    pub fn contracted_gamma(&self) -> [f64; 3] {
        std::array::from_fn(|k| self.gamma[k].contract(&self.ginv))
    }

    pub fn raise(&self, w: &[f64; 3]) -> [f64; 3] {
        self.ginv.apply(w)
    }

    pub fn norm_covector(&self, w: &[f64; 3]) -> f64 {
        self.ginv.bilinear(w, w).max(0.0).sqrt()
    }

    /// Covariant Hessian `∂²u − Γ^c ∂_c u` from coordinate derivatives.
    pub fn covariant_hessian(&self, grad: &[f64; 3], hess: &Sym3) -> Sym3 {
        Sym3::from_fn(|i, j| hess.get(i, j) - (0..3).map(|c| self.gamma[c].get(i, j) * grad[c]).sum::<f64>())
    }
}

/// Lowered symbols `Γ_{l,ij} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)`.
fn lowered_christoffel(dg: &[Sym3; 3]) -> [Sym3; 3] {
    std::array::from_fn(|l| Sym3::from_fn(|i, j| 0.5 * (dg[i].get(j, l) + dg[j].get(i, l) - dg[l].get(i, j))))
}

pub fn christoffel(ginv: &Sym3, dg: &[Sym3; 3]) -> [Sym3; 3] {
    let low = lowered_christoffel(dg);
    std::array::from_fn(|k| Sym3::from_fn(|i, j| (0..3).map(|l| ginv.get(k, l) * low[l].get(i, j)).sum()))
}

/// Scalar curvature from a full jet:
/// `R = g^{ij}(∂_k Γ^k_ij − ∂_j Γ^k_ik + Γ^k_kl Γ^l_ij − Γ^k_jl Γ^l_ik)`.
pub fn scalar_curvature_at(jet: &Jet, pg: &PointGeometry) -> f64 {
    let ginv = &pg.ginv;
    let low = lowered_christoffel(&jet.dg);
    // ∂_m g^{kl} = −g^{ka} ∂_m g_ab g^{bl}
    let dginv: [Sym3; 3] = std::array::from_fn(|m| {
        Sym3::from_fn(|k, l| {
            let mut s = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    s -= ginv.get(k, a) * jet.dg[m].get(a, b) * ginv.get(b, l);
                }
            }
            s
        })
    });
    // dgamma[m][k] = ∂_m Γ^k_ij
    let dgamma: [[Sym3; 3]; 3] = std::array::from_fn(|m| {
        std::array::from_fn(|k| {
            Sym3::from_fn(|i, j| {
                (0..3)
                    .map(|l| {
                        let dlow = 0.5
                            * (jet.ddg[m][i].get(j, l) + jet.ddg[m][j].get(i, l) - jet.ddg[m][l].get(i, j));
                        dginv[m].get(k, l) * low[l].get(i, j) + ginv.get(k, l) * dlow
                    })
                    .sum()
            })
        })
    });
    let gam = &pg.gamma;
    let trace_gamma: [f64; 3] = std::array::from_fn(|l| (0..3).map(|k| gam[k].get(k, l)).sum());
    let mut r = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let gij = ginv.get(i, j);
            if gij == 0.0 {
                continue;
            }
            let mut ric = 0.0;
            for k in 0..3 {
                ric += dgamma[k][k].get(i, j) - dgamma[j][k].get(i, k);
                for l in 0..3 {
                    ric -= gam[k].get(j, l) * gam[l].get(i, k);
                }
            }
            for l in 0..3 {
                ric += trace_gamma[l] * gam[l].get(i, j);
            }
            r += gij * ric;
        }
    }
    r
}

/// Closed radial formula for `g = diag(A, B, C)(r)`:
/// `R = −2[A⁻¹(β′ + β² + γ′ + γ² + βγ) − ½A⁻²A′(β + γ)]`, `β = B′/2B`, `γ = C′/2C`.
pub fn radial_scalar_curvature(jet: &Jet) -> f64 {
    let (a, a1) = (jet.g.get(0, 0), jet.dg[0].get(0, 0));
    let comp = |c: usize| {
        let (b, b1, b2) = (jet.g.get(c, c), jet.dg[0].get(c, c), jet.ddg[0][0].get(c, c));
        let beta = b1 / (2.0 * b);
        let dbeta = b2 / (2.0 * b) - b1 * b1 / (2.0 * b * b);
        (beta, dbeta)
    };
    let (beta, dbeta) = comp(1);
    let (gamma, dgamma) = comp(2);
    -2.0 * ((dbeta + beta * beta + dgamma + gamma * gamma + beta * gamma) / a - 0.5 * a1 * (beta + gamma) / (a * a))
}

fn is_radial_diagonal(jet: &Jet) -> bool {
    let off = |s: &Sym3| s.0[1] == 0.0 && s.0[2] == 0.0 && s.0[4] == 0.0;
    off(&jet.g) && off(&jet.dg[0]) && off(&jet.ddg[0][0])
}

/// Scalar curvature at every node.
pub fn scalar_curvature(data: &InitialDataSet) -> Result<Vec<f64>> {
    data.grid.validate()?;
    let radial = data.grid.is_radial();
    (0..data.grid.len())
        .into_par_iter()
        .map(|n| {
            let jet = data.jet(n);
            let pg = PointGeometry::from_jet(&jet, n)?;
            if radial && is_radial_diagonal(&jet) {
                Ok(radial_scalar_curvature(&jet))
            } else {
                Ok(scalar_curvature_at(&jet, &pg))
            }
        })
        .collect()
}

/// Momentum density `J_i = ∇^j (k_ji − (Tr k) g_ji)`.
pub fn momentum_at(jet: &Jet, pg: &PointGeometry) -> [f64; 3] {
    let ginv = &pg.ginv;
    let dginv = |l: usize, a: usize, b: usize| -> f64 {
        let mut s = 0.0;
        for c in 0..3 {
            for d in 0..3 {
                s -= ginv.get(a, c) * jet.dg[l].get(c, d) * ginv.get(d, b);
            }
        }
        s
    };
    let dtrk: [f64; 3] = std::array::from_fn(|l| {
        let mut s = jet.dk[l].contract(ginv);
        for a in 0..3 {
            for b in 0..3 {
                s += dginv(l, a, b) * jet.k.get(a, b);
            }
        }
        s
    });
    let pi = jet.k - jet.g * pg.trk;
    let dpi: [Sym3; 3] = std::array::from_fn(|l| jet.dk[l] - jet.g * dtrk[l] - jet.dg[l] * pg.trk);
    let gam = &pg.gamma;
    std::array::from_fn(|i| {
        let mut s = 0.0;
        for j in 0..3 {
            for l in 0..3 {
                let gjl = ginv.get(j, l);
                if gjl == 0.0 {
                    continue;
                }
                let mut cov = dpi[l].get(j, i);
                for m in 0..3 {
                    cov -= gam[m].get(l, j) * pi.get(m, i) + gam[m].get(l, i) * pi.get(j, m);
                }
                s += gjl * cov;
            }
        }
        s
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintFields {
    pub scalar_curvature: Vec<f64>,
    pub mu: Vec<f64>,
    /// Covector components in the chart.
    pub j: Vec<[f64; 3]>,
    pub j_norm: Vec<f64>,
    pub dec_margin: Vec<f64>,
}

impl ConstraintFields {
    /// Constant energy density with vanishing momentum, for injection tests.
    pub fn uniform(len: usize, mu: f64) -> Self {
        ConstraintFields {
            scalar_curvature: vec![f64::NAN; len],
            mu: vec![mu; len],
            j: vec![[0.0; 3]; len],
            j_norm: vec![0.0; len],
            dec_margin: vec![mu; len],
        }
    }
}

pub fn compute_constraints(data: &InitialDataSet) -> Result<ConstraintFields> {
    let r = scalar_curvature(data)?;
    let pointwise: Vec<(f64, [f64; 3], f64)> = (0..data.grid.len())
        .into_par_iter()
        .map(|n| {
            let jet = data.jet(n);
            let pg = PointGeometry::from_jet(&jet, n)?;
            let mu = 0.5 * (r[n] + pg.trk * pg.trk - jet.k.norm_sq(&pg.ginv));
            let j = momentum_at(&jet, &pg);
            Ok((mu, j, pg.norm_covector(&j)))
        })
        .collect::<Result<_>>()?;
    let mu: Vec<f64> = pointwise.iter().map(|p| p.0).collect();
    let j: Vec<[f64; 3]> = pointwise.iter().map(|p| p.1).collect();
    let j_norm: Vec<f64> = pointwise.iter().map(|p| p.2).collect();
    let dec_margin = mu.iter().zip(&j_norm).map(|(m, jn)| m - jn).collect();
    Ok(ConstraintFields { scalar_curvature: r, mu, j, j_norm, dec_margin })
}

/// Pointwise geometry at every node.
pub fn point_geometry(data: &InitialDataSet) -> Result<Vec<PointGeometry>> {
    (0..data.grid.len())
        .into_par_iter()
        .map(|n| PointGeometry::from_jet(&data.jet(n), n))
        .collect()
}

/// `Δu = g^{ij} ∂_ij u − g^{ij} Γ^k_ij ∂_k u` with second-order stencils.
pub fn laplace_beltrami(data: &InitialDataSet, u: &[f64]) -> Result<Vec<f64>> {
    let pgs = point_geometry(data)?;
    let lattice = Lattice::new(&data.grid);
    Ok(laplacian_with(&lattice, &pgs, u))
}

pub fn laplacian_with(lattice: &Lattice, pgs: &[PointGeometry], u: &[f64]) -> Vec<f64> {
    (0..u.len())
        .into_par_iter()
        .map(|n| {
            let (grad, hess) = lattice.derivatives(u, n);
            pgs[n].covariant_hessian(&grad, &hess).contract(&pgs[n].ginv)
        })
        .collect()
}
