//! Upper and lower barriers for truncated solutions.
//!
//! Outside `M_{r₀}` the upper barrier is `z⁺ = R + (c₀ − R₀ − λR₀⁻²) + λR⁻²`
//! with `R` the asymptotic radius; inside it is `c₀ w⁺`, where `w⁺` solves
//! the equation on `M_{r₀}` with `w⁺ = 1` on `T_{r₀}` and `0` elsewhere. On
//! the model, `Δ(R + λR⁻²) + Tr k |∇(R + λR⁻²)| = (Tr p − (3/2)Tr m + 6λ)R⁻²`
//! to leading order, which fixes the sign rule for `λ`; `z⁻` is the mirror
//! construction with `ς`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::energy::{asymptotic_radius, truncation_value};
use super::OUTER_ANCHOR;
use crate::data::InitialDataSet;
use crate::dual::Dual3;
use crate::error::{Error, Result};
use crate::grid::NodeKind;
use crate::models::{analytic_asymptotics, ppwave_rho_dual};
use crate::solver::{Solver, SolverParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BarrierParams {
    /// Matching radius of the upper barrier.
    pub r0: f64,
    /// Matching radius of the lower barrier; defaults to `r0`.
    pub r1: Option<f64>,
    /// Overrides the largest admissible `λ`.
    pub lambda: Option<f64>,
    /// Overrides the smallest admissible `ς`.
    pub varsigma: Option<f64>,
    /// Largest tolerated fraction of exterior samples with the wrong residual sign.
    pub max_violation_fraction: f64,
}

impl Default for BarrierParams {
    fn default() -> Self {
        BarrierParams { r0: 5.0, r1: None, lambda: None, varsigma: None, max_violation_fraction: 1e-3 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SignCheck {
    pub samples: usize,
    pub violations: usize,
    /// Residual with the wrong sign of largest size, and where it occurs.
    pub worst: Option<(f64, [f64; 3])>,
}

impl SignCheck {
    pub fn fraction_correct(&self) -> f64 {
        if self.samples == 0 {
            1.0
        } else {
            1.0 - self.violations as f64 / self.samples as f64
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierPair {
    pub z_plus: Vec<f64>,
    pub z_minus: Vec<f64>,
    pub lambda: f64,
    pub varsigma: f64,
    pub c0: f64,
    pub c1: f64,
    /// Matching radii, snapped to radial nodes.
    pub r0: f64,
    pub r1: f64,
    /// `min n(w⁺)` on `T_{r₀}` times `c₀`, against `max n(R + λR⁻²)` there.
    pub gluing_inner: f64,
    pub gluing_outer: f64,
    /// `c₁ n(w⁻)` on `T_{r₁}`; nonpositive, so the lower kink is convex.
    pub lower_gluing: f64,
    pub plus_signs: SignCheck,
    pub minus_signs: SignCheck,
    /// Value imposed on the outer truncation torus.
    pub outer_value: f64,
}

/// `R(r)` with its first `r`-derivative.
fn chart(data: &InitialDataSet, r: f64) -> Result<(f64, f64)> {
    match data.decay {
        crate::data::DecayClass::Standard => Ok((r, 1.0)),
        crate::data::DecayClass::WeakenedRadial => {
            asymptotic_radius(data, r)?;
            let d = ppwave_rho_dual(Dual3::variable(r, 0));
            Ok((d.v, d.d[0]))
        }
    }
}

/// Auxiliary solve on `M_{r}`: `value` on the truncation torus, `0` on every other component.
fn auxiliary(data: &InitialDataSet, keep: usize, value: f64, params: SolverParams) -> Result<(Vec<f64>, f64)> {
    let sub = data.truncated(keep)?;
    let solver = Solver::new(&sub, params)?;
    let mut values: BTreeMap<usize, f64> = sub.boundary_components.iter().map(|c| (c.id, 0.0)).collect();
    values.insert(OUTER_ANCHOR, value);
    let sol = solver.solve(&values, None)?;
    let field = sol.normal_derivative(OUTER_ANCHOR)?;
    // n(w) along the outer normal of M_r; the torus is a plus component.
    let n_w = if value > 0.0 { field.min() } else { field.max() };
    Ok((sol.u, n_w))
}

pub fn build_barriers(data: &InitialDataSet, solver_params: SolverParams, params: &BarrierParams) -> Result<BarrierPair> {
    let spec = data
        .analytic_source
        .as_ref()
        .ok_or_else(|| Error::NoExpansionKnown("barriers need analytic asymptotics".into()))?;
    let asym = analytic_asymptotics(spec)?;
    let lambda = params.lambda.unwrap_or((-1.0 + 1.5 * asym.tr_m - asym.tr_p) / 6.0);
    let varsigma = params.varsigma.unwrap_or((1.0 + 1.5 * asym.tr_m - asym.tr_p) / 6.0);
    let grid = &data.grid;
    let r1_req = params.r1.unwrap_or(params.r0);
    for r in [params.r0, r1_req] {
        if r <= grid.r_min || r >= grid.r_max {
            return Err(Error::DomainError(format!("matching radius {r} outside ({}, {})", grid.r_min, grid.r_max)));
        }
    }
    let (i0, i1) = (grid.nearest_radial(params.r0), grid.nearest_radial(r1_req));
    let (r0, r1) = (grid.r(i0), grid.r(i1));
    let (big_r0, _) = chart(data, r0)?;
    let (big_r1, _) = chart(data, r1)?;
    let (big_rmin, _) = chart(data, grid.r_min)?;
    let (big_rmax, _) = chart(data, grid.r_max)?;
    let outer_value = truncation_value(data)?;
    let solver = Solver::new(data, solver_params)?;

    // Upper barrier.
    let (w_plus, n_w_plus) = auxiliary(data, i0 + 1, 1.0, solver_params)?;
    let mut n_ext_plus: f64 = 0.0;
    let (_, dr0) = chart(data, r0)?;
    let slope = dr0 * (1.0 - 2.0 * lambda * big_r0.powi(-3));
    for j in 0..grid.n_xi {
        for l in 0..grid.n_theta {
            let n = grid.index(i0, j, l);
            n_ext_plus = n_ext_plus.max(slope * solver.pgs[n].ginv.get(0, 0).sqrt());
        }
    }
    let c0 = (n_ext_plus / n_w_plus)
        .max(big_r0 + lambda * big_r0.powi(-2) - lambda * big_rmax.powi(-2) - big_rmin)
        .max(0.0);

    // Lower barrier; the kink at T_{r₁} is convex since n(w⁻) < 0.
    let (w_minus, n_w_minus) = auxiliary(data, i1 + 1, -1.0, solver_params)?;
    let c1 = (big_rmin - big_r1 - varsigma * big_r1.powi(-2) + varsigma * big_rmax.powi(-2)).max(0.0);

    let mut z_plus = vec![0.0; grid.len()];
    let mut z_minus = vec![0.0; grid.len()];
    for n in 0..grid.len() {
        let [i, _, _] = grid.unindex(n);
        let (big_r, _) = chart(data, grid.r(i))?;
        z_plus[n] = if i < i0 {
            c0 * w_plus[n]
        } else {
            big_r + (c0 - big_r0 - lambda * big_r0.powi(-2)) + lambda * big_r.powi(-2)
        };
        z_minus[n] = if i < i1 {
            c1 * w_minus[n]
        } else {
            big_r - (c1 + big_r1 + varsigma * big_r1.powi(-2)) + varsigma * big_r.powi(-2)
        };
    }

    let plus_signs = sign_check(&solver, &z_plus, i0, 1.0);
    let minus_signs = sign_check(&solver, &z_minus, i1, -1.0);
    for (check, name) in [(&plus_signs, "z+"), (&minus_signs, "z-")] {
        if 1.0 - check.fraction_correct() > params.max_violation_fraction {
            let (value, x) = check.worst.expect("violations recorded");
            return Err(Error::ResidualSignViolation {
                location: format!("{name} at (r, ξ, θ) = ({:.4}, {:.4}, {:.4})", x[0], x[1], x[2]),
                value,
            });
        }
    }
    Ok(BarrierPair {
        z_plus,
        z_minus,
        lambda,
        varsigma,
        c0,
        c1,
        r0,
        r1,
        gluing_inner: c0 * n_w_plus,
        gluing_outer: n_ext_plus,
        lower_gluing: c1 * n_w_minus,
        plus_signs,
        minus_signs,
        outer_value,
    })
}

/// Residual signs on interior nodes strictly outside the matching torus.
/// `sign = +1` asks for a supersolution (`residual ≤ 0`), `−1` for a subsolution.
fn sign_check(solver: &Solver<'_>, z: &[f64], i_match: usize, sign: f64) -> SignCheck {
    let grid = &solver.data.grid;
    let res = solver.residual(z);
    let mut check = SignCheck { samples: 0, violations: 0, worst: None };
    for n in 0..grid.len() {
        let idx = grid.unindex(n);
        if idx[0] <= i_match || solver.lattice.kinds[n] != NodeKind::Interior {
            continue;
        }
        check.samples += 1;
        let bad = sign * res[n];
        if bad > 0.0 {
            check.violations += 1;
            if check.worst.map_or(true, |(v, _)| bad > sign * v) {
                check.worst = Some((res[n], grid.coords(idx)));
            }
        }
    }
    check
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BracketReport {
    /// `max (u − z⁺)` over exterior samples of the upper barrier.
    pub max_above: f64,
    /// `max (z⁻ − u)` over exterior samples of the lower barrier.
    pub max_below: f64,
    /// `max (z⁻ − z⁺)` where both exterior pieces are defined.
    pub max_crossing: f64,
    pub tolerance: f64,
    pub within: bool,
}

/// Check `z⁻ − tol ≤ u ≤ z⁺ + tol` on the exterior regions.
pub fn check_bracketing(pair: &BarrierPair, grid: &crate::grid::Grid, u: &[f64], tol: f64) -> BracketReport {
    let mut max_above = f64::NEG_INFINITY;
    let mut max_below = f64::NEG_INFINITY;
    let mut max_crossing = f64::NEG_INFINITY;
    let (i0, i1) = (grid.nearest_radial(pair.r0), grid.nearest_radial(pair.r1));
    for n in 0..grid.len() {
        let i = grid.unindex(n)[0];
        if i >= i0 {
            max_above = max_above.max(u[n] - pair.z_plus[n]);
        }
        if i >= i1 {
            max_below = max_below.max(pair.z_minus[n] - u[n]);
        }
        if i >= i0.max(i1) {
            max_crossing = max_crossing.max(pair.z_minus[n] - pair.z_plus[n]);
        }
    }
    BracketReport {
        max_above,
        max_below,
        max_crossing,
        tolerance: tol,
        within: max_above <= tol && max_below <= tol && max_crossing <= tol,
    }
}

/// `sup ||∇u| − |∇R||` over nodes with `r ≥ r_from`.
pub fn exterior_gradient_deviation(solver: &Solver<'_>, u: &[f64], r_from: f64) -> Result<f64> {
    let grid = &solver.data.grid;
    let mut worst: f64 = 0.0;
    for n in 0..grid.len() {
        let [i, _, _] = grid.unindex(n);
        let r = grid.r(i);
        if r < r_from || matches!(solver.lattice.kinds[n], NodeKind::Excised(_)) {
            continue;
        }
        let (_, dr) = chart(solver.data, r)?;
        let grad_r = dr * solver.pgs[n].ginv.get(0, 0).sqrt();
        worst = worst.max((solver.grad_norm(u, n) - grad_r).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DerivativeMode;
    use crate::grid::Grid;
    use crate::models::{build_model, ModelSpec};
    use crate::tuner::TunerParams;
    use crate::verify::energy::asymptotic_solution;

    fn run(spec: ModelSpec, r_min: f64) -> (BarrierPair, BracketReport) {
        let grid = Grid::radial(r_min, 40.0, 1601);
        let data = build_model(&spec, &grid).unwrap().with_derivative_mode(DerivativeMode::Analytic);
        let pair = build_barriers(&data, SolverParams::default(), &BarrierParams::default()).unwrap();
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let (sol, _) = asymptotic_solution(&solver, &TunerParams::default()).unwrap();
        let br = check_bracketing(&pair, &data.grid, &sol.u, 1e-4);
        (pair, br)
    }

    #[test]
    fn kottler_barriers() {
        let (pair, br) = run(ModelSpec::kottler(), 1.0);
        assert!((pair.lambda + 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(pair.plus_signs.violations, 0);
        assert_eq!(pair.minus_signs.violations, 0);
        assert!(pair.gluing_inner >= pair.gluing_outer);
        assert!(br.within, "{br:?}");
    }

    #[test]
    fn ppwave_barriers_in_the_compactified_chart() {
        let (pair, br) = run(ModelSpec::pp_wave(1.5), 1.5);
        assert!((pair.lambda + 1.0 / 6.0).abs() < 1e-12);
        assert!(pair.plus_signs.fraction_correct() >= 0.999, "{:?}", pair.plus_signs);
        assert!(pair.minus_signs.fraction_correct() >= 0.999, "{:?}", pair.minus_signs);
        assert!(br.within, "{br:?}");
    }

    #[test]
    fn wrong_lambda_is_reported() {
        let grid = Grid::radial(1.0, 40.0, 801);
        let data = build_model(&ModelSpec::kottler(), &grid).unwrap().with_derivative_mode(DerivativeMode::Analytic);
        let params = BarrierParams { lambda: Some(0.5), ..Default::default() };
        let err = build_barriers(&data, SolverParams::default(), &params).unwrap_err();
        assert!(matches!(err, Error::ResidualSignViolation { .. }), "{err}");
    }
}
