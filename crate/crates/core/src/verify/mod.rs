//! Integral inequality for spacetime-harmonic functions with constant
//! Dirichlet data, plus the energy estimators, barriers and rigidity probes
//! built on top of it.
//!
//! For a solution `u` with `u` constant on every boundary component, the
//! Bochner-type identity integrated over the domain reads
//!
//! ```text
//! ½∫ |∇̄²u|²/|∇u| + ∫ (μ|∇u| + J(∇u))  ≤  2π∫χ(Σ_t) dt + Σ_c ∫_c (−|∇u| H − n(u) Tr_c k)
//! ```
//!
//! with `n` the outer normal of the domain. Splitting off the outer anchor
//! torus gives the usual form with null expansions `θ₊ = H + Tr k` measured
//! along `υ` (outer normal on plus components, inner normal on minus ones).

pub mod audit;
pub mod barrier;
pub mod energy;
pub mod rigidity;

use serde::Serialize;

use crate::data::BoundaryKind;
use crate::error::Result;
use crate::geometry::surface::{plane_forms, SurfaceSample};
use crate::geometry::ConstraintFields;
use crate::levelset::bulk_integrals;
use crate::solver::{BoundaryField, Solver, SpacetimeHarmonicSolution};

pub use barrier::{build_barriers, check_bracketing, BarrierPair, BarrierParams, BracketReport};
pub use energy::{
    asymptotic_solution, energy_from_flux, energy_from_mass_aspect, energy_lower_bound, penrose_bound, EnergyEstimate,
    FluxEstimate, PenroseBound,
};
pub use rigidity::{rigidity_diagnostics, RigidityReport};

/// Component id of the outer anchor torus.
pub const OUTER_ANCHOR: usize = 1;

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryTerm {
    pub component: usize,
    pub kind: BoundaryKind,
    pub area: f64,
    /// `∫ (−|∇u| H − n(u) Tr k) dA` with respect to the outer normal `n`.
    pub integral: f64,
    /// `∫ θ₊ |∇u| dA` with `θ₊` taken along `υ`.
    pub theta_plus_flux: f64,
    /// Whether `∂_υ u ≥ 0` on every sample, so that `n(u) = ±|∇u|` as the kind predicts.
    pub consistent_orientation: bool,
}

pub fn boundary_term(solver: &Solver<'_>, field: &BoundaryField) -> Result<BoundaryTerm> {
    let data = solver.data;
    let kind = data.component(field.component)?.kind;
    let plus = kind.is_plus();
    let mut integral = 0.0;
    let mut theta_plus_flux = 0.0;
    for s in &field.samples {
        let n = s.node;
        let (induced, ii, k_tan) = plane_forms(&data.g[n], &data.k[n], &solver.pgs[n], s.axis, s.outward);
        let geo = SurfaceSample::from_forms(induced, ii, k_tan, s.weight)?;
        let n_u = if plus { s.value } else { -s.value };
        let grad = s.value.abs();
        integral += (-grad * geo.h - n_u * geo.tr_k) * s.weight;
        let h_upsilon = if plus { geo.h } else { -geo.h };
        theta_plus_flux += (h_upsilon + geo.tr_k) * grad * s.weight;
    }
    Ok(BoundaryTerm {
        component: field.component,
        kind,
        area: field.area(),
        integral,
        theta_plus_flux,
        consistent_orientation: field.samples.iter().all(|s| s.value >= 0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyParams {
    pub n_levels: usize,
    /// Multiplies the discretization tolerance `10 h² (1 + Σ|terms|)`.
    pub tolerance_scale: f64,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams { n_levels: 32, tolerance_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    /// `½ ∫ |∇̄²u|²/|∇u| dV`.
    pub hessian_term: f64,
    /// `∫ (μ|∇u| + J(∇u)) dV`.
    pub energy_term: f64,
    /// `2π ∫ χ(Σ_t) dt`.
    pub euler_term: f64,
    pub boundary: Vec<BoundaryTerm>,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    /// `rhs − (lhs − energy_term)`: what the geometry leaves for the energy term.
    pub energy_balance: f64,
    pub tolerance: f64,
    pub holds: bool,
    pub skipped_levels: usize,
    pub floored_nodes: usize,
}

impl VerificationReport {
    /// Every individual term, for equality-case checks.
    pub fn terms(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("hessian".to_string(), self.hessian_term),
            ("energy".to_string(), self.energy_term),
            ("euler".to_string(), self.euler_term),
        ];
        out.extend(self.boundary.iter().map(|b| (format!("boundary_{}", b.component), b.integral)));
        out
    }
}

pub fn verify_identity(
    solver: &Solver<'_>,
    solution: &SpacetimeHarmonicSolution,
    constraints: &ConstraintFields,
    params: &VerifyParams,
) -> Result<VerificationReport> {
    let bulk = bulk_integrals(solver, &solution.u, constraints, params.n_levels)?;
    let mut boundary = Vec::new();
    for c in &solver.data.boundary_components {
        let field = match solution.normal_derivatives.get(&c.id) {
            Some(f) => f.clone(),
            None => solver.normal_derivative(&solution.u, c.id),
        };
        boundary.push(boundary_term(solver, &field)?);
    }
    let hessian_term = 0.5 * bulk.pointwise.hessian_term;
    let energy_term = bulk.pointwise.energy_term;
    let euler_term = bulk.euler.value;
    let inner: f64 = boundary.iter().filter(|b| b.component != OUTER_ANCHOR).map(|b| b.integral).sum();
    let outer: f64 = boundary.iter().filter(|b| b.component == OUTER_ANCHOR).map(|b| b.integral).sum();
    let lhs = hessian_term + energy_term - inner;
    let rhs = euler_term + outer;
    let scale = 1.0
        + hessian_term.abs()
        + energy_term.abs()
        + euler_term.abs()
        + boundary.iter().map(|b| b.integral.abs()).sum::<f64>();
    let h = solver.data.grid.h();
    let tolerance = params.tolerance_scale * 10.0 * h * h * scale;
    Ok(VerificationReport {
        hessian_term,
        energy_term,
        euler_term,
        boundary,
        lhs,
        rhs,
        margin: rhs - lhs,
        energy_balance: rhs - (lhs - energy_term),
        tolerance,
        holds: lhs <= rhs + tolerance,
        skipped_levels: bulk.euler.skipped,
        floored_nodes: bulk.pointwise.floored_nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DerivativeMode;
    use crate::geometry::compute_constraints;
    use crate::grid::Grid;
    use crate::models::{build_model, ModelSpec};
    use crate::solver::{SolverParams, Solver};
    use std::collections::BTreeMap;

    fn anchors(hi: f64) -> BTreeMap<usize, f64> {
        BTreeMap::from([(0, 0.0), (1, hi)])
    }

    #[test]
    fn kottler_is_the_equality_case() {
        let grid = Grid::radial(1.0, 5.0, 801);
        let data = build_model(&ModelSpec::kottler(), &grid).unwrap().with_derivative_mode(DerivativeMode::Analytic);
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let sol = solver.solve(&anchors(4.0), None).unwrap();
        let c = compute_constraints(&data).unwrap();
        let rep = verify_identity(&solver, &sol, &c, &VerifyParams::default()).unwrap();
        for (name, v) in rep.terms() {
            assert!(v.abs() < 1e-6, "{name} = {v}");
        }
        assert!(rep.margin.abs() < 1e-6 && rep.holds);
        assert!(rep.boundary.iter().all(|b| b.consistent_orientation));
    }

    #[test]
    fn boundary_term_matches_theta_form_when_oriented() {
        // With n(u) = ±|∇u| as the kind predicts, −|∇u|H − n(u)Tr k equals
        // −θ₊|∇u| on plus components and +θ₊|∇u| on minus ones.
        let grid = Grid::radial(1.0, 3.0, 201);
        let data = build_model(&ModelSpec::perturbed_kottler(0.5, 3.0, [0, 0]), &grid).unwrap();
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let sol = solver.solve(&anchors(2.0), None).unwrap();
        let c = compute_constraints(&data).unwrap();
        let rep = verify_identity(&solver, &sol, &c, &VerifyParams::default()).unwrap();
        for b in &rep.boundary {
            let expected = if b.kind.is_plus() { -b.theta_plus_flux } else { b.theta_plus_flux };
            assert!((b.integral - expected).abs() < 1e-12 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn injected_energy_closes_the_balance() {
        // μ > 0 only changes the bookkeeping: the geometric side still equals
        // the energy term up to discretization error.
        let grid = Grid::radial(1.0, 3.0, 801);
        let data = build_model(&ModelSpec::perturbed_kottler(0.5, 3.0, [0, 0]), &grid).unwrap();
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let sol = solver.solve(&anchors(2.0), None).unwrap();
        let c = compute_constraints(&data).unwrap();
        let rep = verify_identity(&solver, &sol, &c, &VerifyParams::default()).unwrap();
        assert!(rep.energy_term > 1e-3);
        assert!((rep.energy_balance - rep.energy_term).abs() < 1e-3 * rep.energy_term, "{rep:?}");
        assert!(rep.holds);
    }
}
