//! Total energy: from the mass aspect, from the boundary flux of truncated
//! solutions, and the bulk lower bound with its Penrose-type corollary.

use std::collections::BTreeMap;

use serde::Serialize;

use super::OUTER_ANCHOR;
use crate::data::{DecayClass, InitialDataSet};
use crate::error::{Error, Result};
use crate::geometry::surface::plane_forms;
use crate::geometry::ConstraintFields;
use crate::levelset::pointwise_integrals;
use crate::models::{analytic_asymptotics, ppwave_rho, AsymptoticTensors};
use crate::solver::{Solver, SolverParams, SpacetimeHarmonicSolution};
use crate::tuner::{tunable_components, tune_boundary_constants, TunerParams};

/// Torus average of `Tr_ĝ(3m − 2p)`. The tensors are constant on the torus,
/// so the average is the integrand itself whatever the periods.
pub fn energy_from_mass_aspect(asym: &AsymptoticTensors, periods: [f64; 2]) -> f64 {
    let area = periods[0] * periods[1];
    asym.mass_aspect * area / area
}

/// The radial coordinate in which the data approach the model at the
/// standard rate: `r` itself, or the compactified `ρ(r)` for data whose
/// decay is only achieved after that change of chart.
pub fn asymptotic_radius(data: &InitialDataSet, r: f64) -> Result<f64> {
    match data.decay {
        DecayClass::Standard => Ok(r),
        DecayClass::WeakenedRadial => ppwave_rho(r),
    }
}

/// Dirichlet value on the outer truncation torus: the asymptotic radius
/// shifted so that the inner anchor sits at zero.
pub fn truncation_value(data: &InitialDataSet) -> Result<f64> {
    Ok(asymptotic_radius(data, data.grid.r_max)? - asymptotic_radius(data, data.grid.r_min)?)
}

/// Solution with `u = 0` on the inner torus and `u = truncation_value` on the
/// outer one, tuned on any boxes. The equation is positively 1-homogeneous,
/// so this is the anchored `0/1` solution scaled; the scale is returned too.
pub fn asymptotic_solution(
    solver: &Solver<'_>,
    tuner_params: &TunerParams,
) -> Result<(SpacetimeHarmonicSolution, f64)> {
    let data = solver.data;
    let scale = truncation_value(data)?;
    let sol = if tunable_components(data).is_empty() {
        solver.solve(&BTreeMap::from([(0, 0.0), (OUTER_ANCHOR, 1.0)]), None)?
    } else {
        tune_boundary_constants(data, solver.params, *tuner_params)?
            .solution
            .ok_or_else(|| Error::DomainError("tuner returned no solution".into()))?
    };
    Ok((scaled(sol, scale), scale))
}

fn scaled(mut sol: SpacetimeHarmonicSolution, s: f64) -> SpacetimeHarmonicSolution {
    sol.u.iter_mut().for_each(|x| *x *= s);
    sol.boundary_values.values_mut().for_each(|x| *x *= s);
    for field in sol.normal_derivatives.values_mut() {
        field.samples.iter_mut().for_each(|p| p.value *= s);
    }
    sol.residual_norm *= s;
    sol
}

/// `−(2/|T²|) ∫_{outer torus} θ₊ |∇u| dA`.
pub fn outer_flux(solver: &Solver<'_>, sol: &SpacetimeHarmonicSolution) -> Result<f64> {
    let data = solver.data;
    let field = sol.normal_derivative(OUTER_ANCHOR)?;
    let integral = field.integrate(|s| {
        let n = s.node;
        let (induced, ii, k_tan) = plane_forms(&data.g[n], &data.k[n], &solver.pgs[n], s.axis, s.outward);
        let inv = induced.inverse().expect("coordinate torus is nondegenerate");
        (ii.trace_with(&inv) + k_tan.trace_with(&inv)) * s.value.abs()
    });
    Ok(-2.0 * integral / data.grid.torus_area())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FluxSample {
    /// Radius of the truncation torus (a grid node).
    pub r: f64,
    pub flux: f64,
    pub picard_iters: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FluxEstimate {
    pub samples: Vec<FluxSample>,
    /// `a` in the fit `flux(r) = a + b/r` over the three largest radii.
    pub extrapolated: f64,
    pub slope: f64,
}

impl FluxEstimate {
    pub fn extrapolant(&self, r: f64) -> f64 {
        self.extrapolated + self.slope / r
    }
}

/// Least squares fit of `a + b x` (here `x = 1/r`).
fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    if points.len() == 1 {
        return (points[0].1, 0.0);
    }
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    ((sy - b * sx) / n, b)
}

/// Flux through the truncation torus at each radius, each from its own
/// solve on the truncated domain. Radii snap to the nearest radial node.
pub fn energy_from_flux(
    data: &InitialDataSet,
    radii: &[f64],
    solver_params: SolverParams,
    tuner_params: &TunerParams,
) -> Result<FluxEstimate> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::DomainError("flux radii must be nonempty and increasing".into()));
    }
    let grid = &data.grid;
    let mut samples = Vec::with_capacity(radii.len());
    for &r in radii {
        if r <= grid.r_min || r > grid.r_max + 1e-9 {
            return Err(Error::DomainError(format!("flux radius {r} outside ({}, {}]", grid.r_min, grid.r_max)));
        }
        let keep = grid.nearest_radial(r) + 1;
        let sub = data.truncated(keep)?;
        let solver = Solver::new(&sub, solver_params)?;
        let (sol, _) = asymptotic_solution(&solver, tuner_params)?;
        samples.push(FluxSample { r: sub.grid.r_max, flux: outer_flux(&solver, &sol)?, picard_iters: sol.picard_iters });
    }
    let top: Vec<(f64, f64)> = samples.iter().rev().take(3).map(|s| (1.0 / s.r, s.flux)).collect();
    let (extrapolated, slope) = linear_fit(&top);
    Ok(FluxEstimate { samples, extrapolated, slope })
}

/// `(1/|T²|) ∫ (|∇̄²u|²/|∇u| + 2(μ + J(ν))|∇u|) dV` for a solution that
/// grows like the asymptotic radius (see [`asymptotic_solution`]).
pub fn energy_lower_bound(solver: &Solver<'_>, u: &[f64], constraints: &ConstraintFields) -> f64 {
    let p = pointwise_integrals(solver, u, constraints);
    (p.hessian_term + 2.0 * p.energy_term) / solver.data.grid.torus_area()
}

#[derive(Debug, Clone, Serialize)]
pub struct PenroseBound {
    pub applicable: bool,
    pub reason: Option<String>,
    /// `max |k + g|` over the lattice.
    pub k_plus_g: f64,
    /// `max |H|` on the inner torus.
    pub boundary_mean_curvature: f64,
    /// `4 min ∂_υ u` on the inner torus.
    pub c: f64,
    pub boundary_area: f64,
    /// `C |∂₁M| / |T²|`.
    pub bound: f64,
}

impl PenroseBound {
    /// `E ≥ bound − tol`, when the bound applies.
    pub fn satisfied_by(&self, energy: f64, tol: f64) -> Option<bool> {
        self.applicable.then(|| energy >= self.bound - tol)
    }
}

pub const PENROSE_K_TOL: f64 = 1e-8;

/// Penrose-type bound for `k = −g` data whose inner torus is minimal.
/// `sol` must grow like the asymptotic radius.
pub fn penrose_bound(solver: &Solver<'_>, sol: &SpacetimeHarmonicSolution) -> Result<PenroseBound> {
    let data = solver.data;
    let k_plus_g = data.g.iter().zip(&data.k).map(|(g, k)| (*k + *g).max_abs()).fold(0.0, f64::max);
    let field = sol.normal_derivative(0)?;
    let mut max_h: f64 = 0.0;
    for s in &field.samples {
        let n = s.node;
        let (induced, ii, _) = plane_forms(&data.g[n], &data.k[n], &solver.pgs[n], s.axis, s.outward);
        let inv = induced.inverse().ok_or_else(|| Error::DegenerateSurface("inner torus".into()))?;
        max_h = max_h.max(ii.trace_with(&inv).abs());
    }
    let h = data.grid.h();
    let h_tol = 10.0 * h * h;
    let reason = if k_plus_g > PENROSE_K_TOL {
        Some(format!("k differs from −g (max |k + g| = {k_plus_g:.3e})"))
    } else if max_h > h_tol {
        Some(format!("boundary is not minimal (max |H| = {max_h:.3e} > {h_tol:.3e})"))
    } else {
        None
    };
    let c = 4.0 * field.min();
    let boundary_area = field.area();
    Ok(PenroseBound {
        applicable: reason.is_none(),
        reason,
        k_plus_g,
        boundary_mean_curvature: max_h,
        c,
        boundary_area,
        bound: c * boundary_area / data.grid.torus_area(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyEstimate {
    pub torus_area: f64,
    pub e_mass_aspect: Option<f64>,
    pub flux: Option<FluxEstimate>,
    pub lower_bound_rhs: Option<f64>,
    pub penrose: Option<PenroseBound>,
}

impl EnergyEstimate {
    /// Mass aspect when known, else the extrapolated flux.
    pub fn best(&self) -> Option<f64> {
        self.e_mass_aspect.or(self.flux.as_ref().map(|f| f.extrapolated))
    }
}

/// Mass-aspect energy of the analytic source, if the data have one with a
/// known expansion.
pub fn mass_aspect_of(data: &InitialDataSet) -> Option<f64> {
    let spec = data.analytic_source.as_ref()?;
    analytic_asymptotics(spec).ok().map(|a| energy_from_mass_aspect(&a, spec.periods))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DerivativeMode;
    use crate::geometry::compute_constraints;
    use crate::grid::Grid;
    use crate::models::{build_model, ModelSpec};

    fn flux_for(spec: &ModelSpec, r_min: f64) -> FluxEstimate {
        let n = (40.0 - r_min) as usize * 40 + 1;
        let grid = Grid::radial(r_min, 40.0, n);
        let data = build_model(spec, &grid).unwrap().with_derivative_mode(DerivativeMode::Analytic);
        energy_from_flux(&data, &[10.0, 20.0, 40.0], SolverParams::default(), &TunerParams::default()).unwrap()
    }

    #[test]
    fn mass_aspect_values() {
        let pp = analytic_asymptotics(&ModelSpec::pp_wave(1.5)).unwrap();
        assert!(energy_from_mass_aspect(&pp, [1.0, 1.0]).abs() < 1e-15);
        let q3 = analytic_asymptotics(&ModelSpec::perturbed_kottler(0.5, 3.0, [0, 0])).unwrap();
        // Tr m = 2ε, Tr p = 0.
        assert!((energy_from_mass_aspect(&q3, [2.0, 0.5]) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn kottler_flux_vanishes() {
        let f = flux_for(&ModelSpec::kottler(), 1.0);
        for s in &f.samples {
            assert!(s.flux.abs() < 1e-8, "{s:?}");
        }
    }

    #[test]
    fn perturbed_flux_reaches_the_mass_aspect() {
        let spec = ModelSpec::perturbed_kottler(0.5, 3.0, [0, 0]);
        let f = flux_for(&spec, 1.0);
        let e = 3.0;
        assert!((f.extrapolated - e).abs() < 0.05 * e, "{f:?}");
    }

    #[test]
    fn fit_recovers_a_line() {
        let (a, b) = linear_fit(&[(0.1, 1.2), (0.05, 1.1), (0.025, 1.05)]);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_with_constant_injection() {
        // μ ≡ 0.3, J = 0 on Kottler with u = r − 1: the bound is 2 · 0.3 ∫ r · r dr.
        let grid = Grid::radial(1.0, 3.0, 801);
        let data = build_model(&ModelSpec::kottler(), &grid).unwrap().with_derivative_mode(DerivativeMode::Analytic);
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let (sol, scale) = asymptotic_solution(&solver, &TunerParams::default()).unwrap();
        assert_eq!(scale, 2.0);
        let c = ConstraintFields::uniform(grid.len(), 0.3);
        let exact = 0.6 * (27.0 - 1.0) / 3.0;
        assert!((energy_lower_bound(&solver, &sol.u, &c) - exact).abs() < 1e-4);
        let vac = compute_constraints(&data).unwrap();
        assert!(energy_lower_bound(&solver, &sol.u, &vac).abs() < 1e-8);
    }

    #[test]
    fn penrose_gate() {
        let grid = Grid::radial(1.0, 10.0, 400);
        let data = build_model(&ModelSpec::kottler(), &grid).unwrap();
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let (sol, _) = asymptotic_solution(&solver, &TunerParams::default()).unwrap();
        let p = penrose_bound(&solver, &sol).unwrap();
        assert!(!p.applicable && p.reason.as_deref().unwrap().contains("not minimal"));

        let pp = build_model(&ModelSpec::pp_wave(1.5), &Grid::radial(1.5, 10.0, 400)).unwrap();
        let solver = Solver::new(&pp, SolverParams::default()).unwrap();
        let (sol, _) = asymptotic_solution(&solver, &TunerParams::default()).unwrap();
        let p = penrose_bound(&solver, &sol).unwrap();
        assert!(p.reason.as_deref().unwrap().starts_with("k differs from −g"));
    }
}
