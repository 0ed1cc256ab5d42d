//! Convergence study over dyadic refinements of a radial grid.
//!
//! Each quantity is compared against an independent reference on grids with
//! `n, 2n − 1, 4n − 3, …` nodes, and the observed order is
//! `log(e_coarse / e_fine) / log(h_coarse / h_fine)`.

use std::collections::BTreeMap;

use serde::Serialize;
use shf_core::geometry::scalar_curvature;
use shf_core::grid::NodeKind;
use shf_core::levelset::volume_weights;
use shf_core::models::ppwave_u;
use shf_core::quadrature::adaptive_simpson;
use shf_core::solver::Solver;
use shf_core::{build_model, DerivativeMode, Grid, InitialDataSet, ModelKind, ModelSpec};

use crate::error::CliResult;
use crate::output::RefineRow;

/// Errors below this are treated as rounding noise, where orders mean nothing.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct QuantityStudy {
    pub quantity: String,
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
    /// Smallest observed order, or `None` when every error sits at rounding level.
    pub min_order: Option<f64>,
}

impl QuantityStudy {
    fn new(quantity: &str, h: Vec<f64>, errors: Vec<f64>) -> Self {
        let orders: Vec<f64> = (1..errors.len())
            .map(|k| (errors[k - 1] / errors[k]).ln() / (h[k - 1] / h[k]).ln())
            .collect();
        let resolved = errors.iter().any(|e| *e > ROUNDOFF_FLOOR);
        let min_order = resolved.then(|| orders.iter().copied().fold(f64::INFINITY, f64::min));
        QuantityStudy { quantity: quantity.to_string(), h, errors, orders, min_order }
    }

    pub fn rows(&self) -> Vec<RefineRow> {
        (0..self.h.len())
            .map(|k| RefineRow {
                quantity: self.quantity.clone(),
                h: self.h[k],
                error: self.errors[k],
                order: (k > 0).then(|| self.orders[k - 1]),
            })
            .collect()
    }
}

/// Closed-form solution with `u(r_min) = 0` and its `r`-derivative, when the model has one.
pub fn exact_solution(spec: &ModelSpec, r_min: f64) -> Option<Box<dyn Fn(f64) -> (f64, f64)>> {
    match spec.kind {
        ModelKind::Kottler if spec.perturbation.is_none() => Some(Box::new(move |r| (r - r_min, 1.0))),
        ModelKind::PpWave => {
            let r0 = spec.r0;
            let base = ppwave_u(r0, r_min).ok()?.0;
            Some(Box::new(move |r| ppwave_u(r0, r).map(|(u, du)| (u - base, du)).unwrap_or((f64::NAN, f64::NAN))))
        }
        _ => None,
    }
}

fn max_abs(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, |m, x| m.max(x.abs()))
}

fn interior(data: &InitialDataSet, solver: &Solver<'_>) -> Vec<usize> {
    (0..data.grid.len()).filter(|&n| solver.lattice.kinds[n] == NodeKind::Interior).collect()
}

pub fn refinement_study(
    spec: &ModelSpec,
    r_min: f64,
    r_max: f64,
    base_n: usize,
    n_grids: usize,
    mode: DerivativeMode,
    solver_params: shf_core::solver::SolverParams,
) -> CliResult<Vec<QuantityStudy>> {
    let exact = exact_solution(spec, r_min);
    // Coordinate volume of the radial slab times the torus area.
    let sqrt_det = |r: f64| spec.sample([r, 0.0, 0.0]).0.det().sqrt();
    let volume_ref = adaptive_simpson(&sqrt_det, r_min, r_max, 1e-13) * spec.periods[0] * spec.periods[1];

    let mut h = Vec::new();
    let mut errs: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for k in 0..n_grids {
        let n = (base_n - 1) * (1 << k) + 1;
        let grid = Grid::radial(r_min, r_max, n).with_periods(spec.periods);
        h.push(grid.h());
        let fd = build_model(spec, &grid)?;
        let an = fd.clone().with_derivative_mode(DerivativeMode::Analytic);
        let r_fd = scalar_curvature(&fd)?;
        let r_an = scalar_curvature(&an)?;
        errs.entry("scalar_curvature").or_default().push(max_abs(r_fd.iter().zip(&r_an).map(|(a, b)| a - b)));

        let data = fd.with_derivative_mode(mode);
        let solver = Solver::new(&data, solver_params)?;
        let vol: f64 = volume_weights(&solver).iter().sum();
        errs.entry("volume").or_default().push((vol - volume_ref).abs());

        if let Some(u_exact) = &exact {
            let u: Vec<f64> = (0..grid.len()).map(|i| u_exact(grid.r(i)).0).collect();
            // ∫|∇u| dV: lattice gradient and volume weights against |T²|∫ √(g^rr) u' √det dr.
            let weights = volume_weights(&solver);
            let discrete: f64 = (0..grid.len()).map(|n| weights[n] * solver.grad_norm(&u, n)).sum();
            let integrand = |r: f64| {
                let g = spec.sample([r, 0.0, 0.0]).0;
                u_exact(r).1 / g.get(0, 0).sqrt() * g.det().sqrt()
            };
            let reference = adaptive_simpson(&integrand, r_min, r_max, 1e-13) * spec.periods[0] * spec.periods[1];
            errs.entry("bulk_gradient_integral").or_default().push((discrete - reference).abs());
            let res = solver.residual(&u);
            let nodes = interior(&data, &solver);
            errs.entry("exact_solution_residual").or_default().push(max_abs(nodes.iter().map(|&n| res[n])));
            let values = BTreeMap::from([(0, 0.0), (1, u[grid.len() - 1])]);
            let sol = solver.solve(&values, None)?;
            errs.entry("solve_error").or_default().push(max_abs(sol.u.iter().zip(&u).map(|(a, b)| a - b)));
        }
    }
    Ok(errs.into_iter().map(|(q, e)| QuantityStudy::new(q, h.clone(), e)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_of_a_synthetic_sequence() {
        let h = vec![0.1, 0.05, 0.025];
        let s = QuantityStudy::new("q", h.clone(), h.iter().map(|x| 3.0 * x * x).collect());
        for p in &s.orders {
            assert!((p - 2.0).abs() < 1e-12);
        }
        assert_eq!(s.rows().len(), 3);
        assert!(s.rows()[0].order.is_none());
    }

    #[test]
    fn roundoff_errors_have_no_order() {
        let s = QuantityStudy::new("q", vec![0.1, 0.05, 0.025], vec![1e-15, 3e-16, 2e-15]);
        assert!(s.min_order.is_none());
    }
}
