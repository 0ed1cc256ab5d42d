//! Level sets of a solution, their topology, and the bulk integrals of the
//! level-set identity.

pub mod mesh;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::ConstraintFields;
use crate::grid::NodeKind;
use crate::solver::Solver;
use mesh::{march_tetrahedra, MeshCounts, TriMesh};

#[derive(Debug, Clone, Serialize)]
pub enum LevelPiece {
    /// Exact coordinate torus `r = const` on the radial backend.
    CoordinateTorus { r: f64 },
    Mesh(TriMesh),
}

impl LevelPiece {
    pub fn euler_characteristic(&self) -> Result<i64> {
        match self {
            LevelPiece::CoordinateTorus { .. } => Ok(0),
            LevelPiece::Mesh(m) => m.euler_characteristic(),
        }
    }

    pub fn counts(&self) -> Option<MeshCounts> {
        match self {
            LevelPiece::CoordinateTorus { .. } => None,
            LevelPiece::Mesh(m) => Some(m.counts()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSurface {
    pub level: f64,
    pub pieces: Vec<LevelPiece>,
    /// No node within one cell of the surface has `|∇u| < 10 ε`.
    pub regular: bool,
    pub min_grad: f64,
}

impl LevelSurface {
    pub fn euler_characteristics(&self) -> Result<Vec<i64>> {
        self.pieces.iter().map(LevelPiece::euler_characteristic).collect()
    }

    pub fn euler_characteristic(&self) -> Result<i64> {
        Ok(self.euler_characteristics()?.iter().sum())
    }
}

/// A sampled solution together with `|∇u|` at every node.
pub struct LevelField<'s, 'a> {
    pub solver: &'s Solver<'a>,
    pub u: &'s [f64],
    pub grad_norm: Vec<f64>,
    pub floor: f64,
}

impl<'s, 'a> LevelField<'s, 'a> {
    pub fn new(solver: &'s Solver<'a>, u: &'s [f64]) -> Self {
        let grad_norm = (0..u.len())
            .into_par_iter()
            .map(|n| match solver.lattice.kinds[n] {
                NodeKind::Excised(_) => f64::INFINITY,
                _ => solver.grad_norm(u, n),
            })
            .collect();
        LevelField { solver, u, grad_norm, floor: solver.params.floor_for(&solver.data.grid) }
    }

    /// Extremes of `u` over the domain.
    pub fn range(&self) -> (f64, f64) {
        self.u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn extract(&self, t: f64) -> Result<LevelSurface> {
        let (lo, hi) = self.range();
        if !(t > lo && t < hi) {
            return Err(Error::DomainError(format!("level {t} is not strictly inside ({lo}, {hi})")));
        }
        let grid = &self.solver.data.grid;
        if grid.is_radial() {
            let mut pieces = Vec::new();
            let mut min_grad = f64::INFINITY;
            for i in 0..grid.n_r - 1 {
                let (a, b) = (self.u[i], self.u[i + 1]);
                if (a >= t) == (b >= t) {
                    continue;
                }
                let g = self.grad_norm[i].min(self.grad_norm[i + 1]);
                if g < self.floor {
                    return Err(Error::NearCriticalLevel { level: t });
                }
                min_grad = min_grad.min(g);
                let s = (t - a) / (b - a);
                pieces.push(LevelPiece::CoordinateTorus { r: grid.r(i) + s * grid.h_r() });
            }
            return Ok(LevelSurface { level: t, pieces, regular: min_grad > 10.0 * self.floor, min_grad });
        }
        let (mesh, cells) = march_tetrahedra(grid, self.u, t);
        let cells: BTreeSet<usize> = cells.into_iter().collect();
        let mut min_grad = f64::INFINITY;
        for &c in &cells {
            let [i, j, l] = grid.unindex(c);
            for o in 0..8usize {
                let n = grid.index(
                    i + (o & 1),
                    grid.wrap(1, (j + ((o >> 1) & 1)) as isize),
                    grid.wrap(2, (l + ((o >> 2) & 1)) as isize),
                );
                min_grad = min_grad.min(self.grad_norm[n]);
            }
        }
        if min_grad < self.floor {
            return Err(Error::NearCriticalLevel { level: t });
        }
        let pieces = mesh.components().into_iter().map(LevelPiece::Mesh).collect();
        Ok(LevelSurface { level: t, pieces, regular: min_grad > 10.0 * self.floor, min_grad })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EulerIntegral {
    /// `2π ∫ χ(Σ_t) dt` over the regular samples.
    pub value: f64,
    pub levels: Vec<f64>,
    /// `None` for skipped near-critical levels.
    pub chi: Vec<Option<i64>>,
    pub skipped: usize,
    /// Length of the `t`-range represented by skipped samples.
    pub skipped_measure: f64,
}

/// Samples `n` levels at the midpoints of a uniform partition of the range
/// of `u`; with piecewise-constant χ this is the trapezoid rule on the
/// partition with end values extended.
pub fn euler_integral(field: &LevelField<'_, '_>, n_samples: usize) -> Result<EulerIntegral> {
    if n_samples < 16 {
        return Err(Error::InvalidSpec(format!("euler_integral needs at least 16 samples, got {n_samples}")));
    }
    let (lo, hi) = field.range();
    let dt = (hi - lo) / n_samples as f64;
    let levels: Vec<f64> = (0..n_samples).map(|k| lo + (k as f64 + 0.5) * dt).collect();
    let chi: Vec<Option<i64>> = levels
        .par_iter()
        .map(|&t| match field.extract(t) {
            Ok(s) => s.euler_characteristic().map(Some),
            Err(Error::NearCriticalLevel { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let skipped = chi.iter().filter(|c| c.is_none()).count();
    if skipped * 10 > n_samples {
        return Err(Error::TooManySkipped { skipped, total: n_samples });
    }
    if skipped > 0 {
        log::warn!("euler_integral skipped {skipped} near-critical levels (measure {:.3e})", skipped as f64 * dt);
    }
    let value = 2.0 * std::f64::consts::PI * chi.iter().flatten().map(|&c| c as f64 * dt).sum::<f64>();
    Ok(EulerIntegral { value, levels, chi, skipped, skipped_measure: skipped as f64 * dt })
}

/// Metric volume weight of every node (trapezoid rule, zero in boxes).
pub fn volume_weights(solver: &Solver<'_>) -> Vec<f64> {
    solver.data.grid.coordinate_weights().iter().zip(&solver.pgs).map(|(w, pg)| w * pg.sqrt_det).collect()
}

/// The pointwise part of the bulk integrals.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PointwiseIntegrals {
    /// `∫ |∇̄²u|² / max(|∇u|, ε) dV`.
    pub hessian_term: f64,
    /// Part of `hessian_term` from nodes where the floor was active.
    pub floored_hessian: f64,
    pub floored_nodes: usize,
    /// `∫ (μ|∇u| + J(∇u)) dV`.
    pub energy_term: f64,
    pub volume: f64,
}

pub fn pointwise_integrals(solver: &Solver<'_>, u: &[f64], constraints: &ConstraintFields) -> PointwiseIntegrals {
    let weights = volume_weights(solver);
    let floor = solver.params.floor_for(&solver.data.grid);
    let hess = solver.spacetime_hessian(u);
    let parts: Vec<(f64, bool, f64)> = (0..u.len())
        .into_par_iter()
        .map(|n| {
            if weights[n] == 0.0 {
                return (0.0, false, 0.0);
            }
            let pg = &solver.pgs[n];
            let (grad, _) = solver.lattice.derivatives(u, n);
            let f = pg.norm_covector(&grad);
            let h = hess[n].norm_sq(&pg.ginv) / f.max(floor);
            let e = constraints.mu[n] * f + pg.ginv.bilinear(&constraints.j[n], &grad);
            (h * weights[n], f < floor, e * weights[n])
        })
        .collect();
    let floored: Vec<&(f64, bool, f64)> = parts.iter().filter(|p| p.1).collect();
    PointwiseIntegrals {
        hessian_term: parts.iter().map(|p| p.0).sum(),
        floored_hessian: floored.iter().map(|p| p.0).sum(),
        floored_nodes: floored.len(),
        energy_term: parts.iter().map(|p| p.2).sum(),
        volume: weights.iter().sum(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BulkIntegrals {
    #[serde(flatten)]
    pub pointwise: PointwiseIntegrals,
    pub euler: EulerIntegral,
}

pub fn bulk_integrals(
    solver: &Solver<'_>,
    u: &[f64],
    constraints: &ConstraintFields,
    n_levels: usize,
) -> Result<BulkIntegrals> {
    let field = LevelField::new(solver, u);
    Ok(BulkIntegrals { pointwise: pointwise_integrals(solver, u, constraints), euler: euler_integral(&field, n_levels)? })
}

/// Geometry of the level set through a node, from derivatives of `u`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NodeLevel {
    /// `f = |∇u|`.
    pub f: f64,
    pub mean_curvature: f64,
    pub tr_k_tangential: f64,
    pub theta_plus: f64,
    pub chi_plus_norm: f64,
    /// `|X + ∇_Σ log f|` with `X = k(ν, ·)` restricted to the level set.
    pub x_gradient_match: f64,
    /// `μ + J(ν)`.
    pub dec_saturation: f64,
}

/// Level-set geometry at node `n`, or `None` inside boxes and where `|∇u| ≤ ε`.
pub fn node_level(solver: &Solver<'_>, u: &[f64], constraints: &ConstraintFields, n: usize) -> Option<NodeLevel> {
    if matches!(solver.lattice.kinds[n], NodeKind::Excised(_)) {
        return None;
    }
    let pg = &solver.pgs[n];
    let k = &solver.data.k[n];
    let (grad, hess) = solver.lattice.derivatives(u, n);
    let f = pg.norm_covector(&grad);
    if f <= solver.params.floor_for(&solver.data.grid) {
        return None;
    }
    let nu_up = pg.raise(&grad).map(|x| x / f);
    let proj = |i: usize, j: usize| pg.ginv.get(i, j) - nu_up[i] * nu_up[j];
    let cov = pg.covariant_hessian(&grad, &hess);
    let trace_p = |t: &crate::tensor::Sym3| {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += proj(i, j) * t.get(i, j);
            }
        }
        s
    };
    let mean_curvature = trace_p(&cov) / f;
    let tr_k_tangential = trace_p(k);
    let chi = cov * (1.0 / f) + *k;
    let mut chi_sq = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for a in 0..3 {
                for b in 0..3 {
                    chi_sq += proj(i, a) * proj(j, b) * chi.get(i, j) * chi.get(a, b);
                }
            }
        }
    }
    let st = cov + *k * f;
    let y: [f64; 3] = std::array::from_fn(|j| (0..3).map(|i| st.get(i, j) * nu_up[i]).sum::<f64>() / f);
    let mut y_sq = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            y_sq += proj(i, j) * y[i] * y[j];
        }
    }
    let j_nu: f64 = (0..3).map(|i| constraints.j[n][i] * nu_up[i]).sum();
    Some(NodeLevel {
        f,
        mean_curvature,
        tr_k_tangential,
        theta_plus: mean_curvature + tr_k_tangential,
        chi_plus_norm: chi_sq.max(0.0).sqrt(),
        x_gradient_match: y_sq.max(0.0).sqrt(),
        dec_saturation: constraints.mu[n] + j_nu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DerivativeMode;
    use crate::geometry::compute_constraints;
    use crate::grid::Grid;
    use crate::models::{build_model, ppwave_u, ModelSpec};
    use crate::solver::SolverParams;

    fn kottler_u(grid: &Grid) -> Vec<f64> {
        (0..grid.len()).map(|n| grid.r(grid.unindex(n)[0]) - 1.0).collect()
    }

    #[test]
    fn radial_level_is_the_exact_torus() {
        let grid = Grid::radial(1.0, 10.0, 91);
        let data = build_model(&ModelSpec::kottler(), &grid).unwrap();
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let u = kottler_u(&grid);
        let s = LevelField::new(&solver, &u).extract(1.5).unwrap();
        assert_eq!(s.pieces.len(), 1);
        assert!(matches!(s.pieces[0], LevelPiece::CoordinateTorus { r } if (r - 2.5).abs() < 1e-12));
        assert_eq!(s.euler_characteristic().unwrap(), 0);
        assert!(s.regular);
    }

    #[test]
    fn euler_integral_vanishes_on_radial_backend() {
        let grid = Grid::radial(1.0, 10.0, 200);
        let data = build_model(&ModelSpec::kottler(), &grid).unwrap();
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let u = kottler_u(&grid);
        let e = euler_integral(&LevelField::new(&solver, &u), 32).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.skipped, 0);
        assert!(euler_integral(&LevelField::new(&solver, &u), 8).is_err());
    }

    #[test]
    fn torus_backend_kottler_levels_are_tori() {
        let grid = Grid::torus(1.0, 2.0, 16, 8, 8);
        let data = build_model(&ModelSpec::kottler(), &grid).unwrap();
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let u = kottler_u(&grid);
        let field = LevelField::new(&solver, &u);
        for t in [0.1, 0.42, 0.9] {
            assert_eq!(field.extract(t).unwrap().euler_characteristics().unwrap(), vec![0]);
        }
        assert_eq!(euler_integral(&field, 16).unwrap().value, 0.0);
    }

    #[test]
    fn sphere_foliated_field_integrates_to_four_pi_times_range() {
        // u = coordinate distance to an interior point, with a very slow tail
        // beyond 0.4 so that every sampled level is a small sphere.
        let grid = Grid::torus(1.0, 2.0, 24, 24, 24);
        let data = build_model(&ModelSpec::kottler(), &grid).unwrap();
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let u: Vec<f64> = (0..grid.len())
            .map(|n| {
                let x = grid.coords(grid.unindex(n));
                let d = ((x[0] - 1.5).powi(2) + (x[1] - 0.5).powi(2) + (x[2] - 0.5).powi(2)).sqrt();
                if d < 0.4 {
                    d
                } else {
                    0.4 + 1e-6 * (d - 0.4)
                }
            })
            .collect();
        let field = LevelField::new(&solver, &u);
        let e = euler_integral(&field, 16).unwrap();
        let (lo, hi) = field.range();
        let expected = 2.0 * std::f64::consts::PI * 2.0 * (hi - lo);
        assert!(e.chi.iter().all(|c| *c == Some(2)), "{:?}", e.chi);
        assert!((e.value - expected).abs() < 1e-12);
    }

    #[test]
    fn kottler_bulk_terms_vanish() {
        let grid = Grid::radial(1.0, 3.0, 400);
        let data = build_model(&ModelSpec::kottler(), &grid).unwrap().with_derivative_mode(DerivativeMode::Analytic);
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let c = compute_constraints(&data).unwrap();
        let b = bulk_integrals(&solver, &kottler_u(&grid), &c, 16).unwrap();
        assert!(b.pointwise.hessian_term.abs() < 1e-12 && b.pointwise.energy_term.abs() < 1e-8, "{b:?}");
        assert_eq!(b.pointwise.floored_nodes, 0);
    }

    #[test]
    fn ppwave_bulk_terms_vanish() {
        let grid = Grid::radial(1.5, 4.0, 400);
        let data = build_model(&ModelSpec::pp_wave(1.5), &grid).unwrap().with_derivative_mode(DerivativeMode::Analytic);
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let c = compute_constraints(&data).unwrap();
        let u: Vec<f64> = (0..grid.n_r).map(|i| ppwave_u(1.5, grid.r(i)).unwrap().0).collect();
        let b = bulk_integrals(&solver, &u, &c, 16).unwrap();
        // Only the discretization error of the second-order u stencils remains.
        assert!(b.pointwise.hessian_term.abs() < 1e-3 && b.pointwise.energy_term.abs() < 1e-8, "{b:?}");
    }

    #[test]
    fn injected_energy_matches_direct_quadrature() {
        // μ ≡ 1, J = 0, u = r − 1 on Kottler: energy = ∫ r dV = |T²| ∫ r · r dr.
        let grid = Grid::radial(1.0, 3.0, 801);
        let data = build_model(&ModelSpec::kottler(), &grid).unwrap().with_derivative_mode(DerivativeMode::Analytic);
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let c = ConstraintFields::uniform(grid.len(), 1.0);
        let b = bulk_integrals(&solver, &kottler_u(&grid), &c, 16).unwrap();
        let exact = (27.0 - 1.0) / 3.0;
        assert!((b.pointwise.energy_term - exact).abs() < 1e-5, "{} vs {exact}", b.pointwise.energy_term);
    }

    #[test]
    fn quadrature_converges_at_second_order() {
        let mut errors = Vec::new();
        for n in [21, 41, 81, 161] {
            let grid = Grid::radial(1.0, 3.0, n);
            let data = build_model(&ModelSpec::kottler(), &grid).unwrap();
            let solver = Solver::new(&data, SolverParams::default()).unwrap();
            let w = volume_weights(&solver);
            let integral: f64 = (0..n).map(|i| w[i] * grid.r(i).powi(2)).sum();
            // √det = r, so ∫ r² dV = ∫ r³ dr.
            errors.push((integral - (81.0 - 1.0) / 4.0).abs());
        }
        let orders = crate::fd::observed_orders(&errors);
        assert!(orders.iter().all(|p| (*p - 2.0).abs() < 0.2), "{orders:?}");
    }

    #[test]
    fn node_level_on_kottler_is_the_equality_case() {
        let grid = Grid::radial(1.0, 3.0, 100);
        let data = build_model(&ModelSpec::kottler(), &grid).unwrap().with_derivative_mode(DerivativeMode::Analytic);
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let c = compute_constraints(&data).unwrap();
        let u = kottler_u(&grid);
        for n in 0..grid.len() {
            let l = node_level(&solver, &u, &c, n).unwrap();
            assert!((l.f - grid.r(n)).abs() < 1e-10);
            assert!((l.mean_curvature - 2.0).abs() < 1e-10);
            assert!(l.theta_plus.abs() < 1e-10 && l.chi_plus_norm < 1e-10 && l.x_gradient_match < 1e-10);
        }
    }
}
