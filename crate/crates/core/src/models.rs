//! Closed-form initial data with known answers.
//!
//! Every model is written once over [`Dual3`] so the same code gives sampled
//! values and exact derivative jets.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::data::{BoundaryKind, DecayClass, InitialDataSet, Jet};
use crate::dual::Dual3;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quadrature::adaptive_simpson;
use crate::tensor::Sym3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Kottler,
    PpWave,
    WarpedProduct,
    PerturbedKottler,
}

/// Warping function `f(t)` for `dt² + f(t)² ĝ`, with `t = ln r` as chart coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WarpProfile {
    /// `f = eᵗ`: the Kottler slice in disguise.
    Exponential,
    /// `f = cosh t`: a minimal neck at `t = 0`.
    Cosh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WarpCurvature {
    /// `k = −g`.
    MinusG,
    /// `k = −λ(t) g` with `λ = d(log f)/dt`.
    MinusLambdaG,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Warp {
    pub profile: WarpProfile,
    pub curvature: WarpCurvature,
}

/// `g_ξξ, g_θθ ← r²(1 + ε r^{-q} cos(2π n_ξ ξ/P_ξ) cos(2π n_θ θ/P_θ))`, with `k = −g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub amplitude: f64,
    pub decay: f64,
    pub modes: [u32; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub r0: f64,
    pub periods: [f64; 2],
    #[serde(default)]
    pub warp: Option<Warp>,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticTensors {
    /// `m` and `p` on the torus in the flat chart, packed `[ξξ, ξθ, θθ]`.
    pub m: [f64; 3],
    pub p: [f64; 3],
    pub tr_m: f64,
    pub tr_p: f64,
    pub mass_aspect: f64,
}

impl AsymptoticTensors {
    /// Traces are taken against `ĝ = dξ² + dθ²`.
    pub fn new(m: [f64; 3], p: [f64; 3]) -> Self {
        let tr_m = m[0] + m[2];
        let tr_p = p[0] + p[2];
        // Scaling before summing keeps exact cancellations exact, e.g. for thirds.
        let mass_aspect = (3.0 * m[0] + 3.0 * m[2]) - (2.0 * p[0] + 2.0 * p[2]);
        AsymptoticTensors { m, p, tr_m, tr_p, mass_aspect }
    }
}

impl ModelSpec {
    pub fn kottler() -> Self {
        ModelSpec { kind: ModelKind::Kottler, r0: 1.0, periods: [1.0, 1.0], warp: None, perturbation: None }
    }

    pub fn pp_wave(r0: f64) -> Self {
        ModelSpec { kind: ModelKind::PpWave, r0, ..Self::kottler() }
    }

    pub fn warped(profile: WarpProfile, curvature: WarpCurvature) -> Self {
        ModelSpec { kind: ModelKind::WarpedProduct, warp: Some(Warp { profile, curvature }), ..Self::kottler() }
    }

    pub fn perturbed_kottler(amplitude: f64, decay: f64, modes: [u32; 2]) -> Self {
        ModelSpec {
            kind: ModelKind::PerturbedKottler,
            perturbation: Some(Perturbation { amplitude, decay, modes }),
            ..Self::kottler()
        }
    }

    pub fn with_periods(mut self, periods: [f64; 2]) -> Self {
        self.periods = periods;
        self
    }

    pub fn with_r0(mut self, r0: f64) -> Self {
        self.r0 = r0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.periods[0] > 0.0 && self.periods[1] > 0.0) {
            return Err(Error::InvalidSpec("periods must be positive".into()));
        }
        if !(self.r0 >= 1.0) {
            return Err(Error::InvalidSpec(format!("r0 = {} < 1", self.r0)));
        }
        match self.kind {
            ModelKind::PpWave if self.r0 <= 1.0 => {
                return Err(Error::InvalidSpec("pp-wave data needs r0 > 1".into()));
            }
            ModelKind::WarpedProduct if self.warp.is_none() => {
                return Err(Error::InvalidSpec("warped product needs a warp profile".into()));
            }
            ModelKind::PerturbedKottler => {
                let p = self.perturbation.ok_or_else(|| Error::InvalidSpec("perturbation missing".into()))?;
                if p.decay < 3.0 {
                    return Err(Error::InvalidSpec(format!("decay exponent {} < 3", p.decay)));
                }
                // With a non-constant mode the factor can reach 1 − |ε| r0^{-q}.
                let worst = if p.modes == [0, 0] { p.amplitude } else { -p.amplitude.abs() };
                if 1.0 + worst * self.r0.powf(-p.decay) <= 0.0 {
                    return Err(Error::InvalidSpec("perturbation destroys positivity of g".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// `(g, k)` as packed duals at `x = (r, ξ, θ)`.
    pub fn eval(&self, x: [Dual3; 3]) -> ([Dual3; 6], [Dual3; 6]) {
        let r = x[0];
        let zero = Dual3::constant(0.0);
        let diag = |a: Dual3, b: Dual3, c: Dual3| [a, zero, zero, b, zero, c];
        match self.kind {
            ModelKind::Kottler => {
                let g = diag(r.powi(-2), r.powi(2), r.powi(2));
                (g, g.map(|c| -c))
            }
            ModelKind::PpWave => {
                let s = 1.0 - r.powi(-3);
                let g = diag(r.powi(-2) / s, r.powi(2) * s, r.powi(2));
                let sq = s.sqrt();
                let k = diag(
                    -(r.powi(-2) / sq),
                    -(r.powi(2) * sq * (1.0 + 0.5 * r.powi(-3))),
                    -(r.powi(2) * sq),
                );
                (g, k)
            }
            ModelKind::WarpedProduct => {
                let warp = self.warp.expect("validated");
                let t = r.ln();
                let f = match warp.profile {
                    WarpProfile::Exponential => t.exp(),
                    WarpProfile::Cosh => t.cosh(),
                };
                let g = diag(r.powi(-2), f * f, f * f);
                let lambda = match (warp.curvature, warp.profile) {
                    (WarpCurvature::MinusG, _) => Dual3::constant(1.0),
                    (WarpCurvature::MinusLambdaG, WarpProfile::Exponential) => Dual3::constant(1.0),
                    (WarpCurvature::MinusLambdaG, WarpProfile::Cosh) => t.tanh(),
                };
                (g, g.map(|c| -(lambda * c)))
            }
            ModelKind::PerturbedKottler => {
                let p = self.perturbation.expect("validated");
                let mode = angular_mode(p.modes, self.periods, x[1], x[2]);
                let factor = 1.0 + p.amplitude * r.powf(-p.decay) * mode;
                let g = diag(r.powi(-2), r.powi(2) * factor, r.powi(2) * factor);
                (g, g.map(|c| -c))
            }
        }
    }

    /// Exact jet at the chart point `(r, ξ, θ)`.
    pub fn jet(&self, x: [f64; 3]) -> Jet {
        let vars = [Dual3::variable(x[0], 0), Dual3::variable(x[1], 1), Dual3::variable(x[2], 2)];
        let (g, k) = self.eval(vars);
        let mut jet = Jet {
            g: Sym3(g.map(|c| c.v)),
            k: Sym3(k.map(|c| c.v)),
            ..Default::default()
        };
        for a in 0..3 {
            jet.dg[a] = Sym3(g.map(|c| c.d[a]));
            jet.dk[a] = Sym3(k.map(|c| c.d[a]));
            for b in 0..3 {
                jet.ddg[a][b] = Sym3(g.map(|c| c.hess(a, b)));
            }
        }
        jet
    }

    pub fn sample(&self, x: [f64; 3]) -> (Sym3, Sym3) {
        let vars = x.map(Dual3::constant);
        let (g, k) = self.eval(vars);
        (Sym3(g.map(|c| c.v)), Sym3(k.map(|c| c.v)))
    }

    /// Whether `k + g` satisfies only the weakened radial decay.
    pub fn decay_class(&self) -> DecayClass {
        match self.kind {
            ModelKind::PpWave => DecayClass::WeakenedRadial,
            _ => DecayClass::Standard,
        }
    }
}

fn angular_mode(modes: [u32; 2], periods: [f64; 2], xi: Dual3, theta: Dual3) -> Dual3 {
    let wave = |n: u32, period: f64, x: Dual3| {
        if n == 0 {
            Dual3::constant(1.0)
        } else {
            (x * (2.0 * PI * n as f64 / period)).cos()
        }
    };
    wave(modes[0], periods[0], xi) * wave(modes[1], periods[1], theta)
}

/// Sample a model on a grid. Box components default to [`BoundaryKind::OuterPlus`].
pub fn build_model(spec: &ModelSpec, grid: &Grid) -> Result<InitialDataSet> {
    build_model_with_kinds(spec, grid, &[])
}

pub fn build_model_with_kinds(spec: &ModelSpec, grid: &Grid, box_kinds: &[BoundaryKind]) -> Result<InitialDataSet> {
    spec.validate()?;
    if grid.r_min < spec.r0 - 1e-12 {
        return Err(Error::InvalidSpec(format!("grid starts at r = {} below r0 = {}", grid.r_min, spec.r0)));
    }
    if grid.periods != spec.periods {
        return Err(Error::InvalidSpec("grid and model periods differ".into()));
    }
    let mut g = Vec::with_capacity(grid.len());
    let mut k = Vec::with_capacity(grid.len());
    for n in 0..grid.len() {
        let (gn, kn) = spec.sample(grid.coords(grid.unindex(n)));
        g.push(gn);
        k.push(kn);
    }
    let comps = InitialDataSet::default_components(grid, box_kinds);
    let mut data = InitialDataSet::new(grid.clone(), g, k, comps)?;
    data.analytic_source = Some(spec.clone());
    data.decay = spec.decay_class();
    Ok(data)
}

pub fn analytic_asymptotics(spec: &ModelSpec) -> Result<AsymptoticTensors> {
    match spec.kind {
        ModelKind::Kottler => Ok(AsymptoticTensors::new([0.0; 3], [0.0; 3])),
        ModelKind::PpWave => Ok(AsymptoticTensors::new([-2.0 / 3.0, 0.0, 1.0 / 3.0], [-1.0, 0.0, 0.5])),
        ModelKind::WarpedProduct => match spec.warp.map(|w| (w.profile, w.curvature)) {
            Some((WarpProfile::Exponential, _)) => Ok(AsymptoticTensors::new([0.0; 3], [0.0; 3])),
            _ => Err(Error::NoExpansionKnown("warped product with a generic profile".into())),
        },
        ModelKind::PerturbedKottler => {
            let p = spec.perturbation.ok_or_else(|| Error::InvalidSpec("perturbation missing".into()))?;
            // Only a q = 3 term reaches the r⁻¹ order; non-constant modes average to zero.
            let eps = if (p.decay - 3.0).abs() < 1e-12 && p.modes == [0, 0] { p.amplitude } else { 0.0 };
            Ok(AsymptoticTensors::new([eps, 0.0, eps], [0.0; 3]))
        }
    }
}

/// `u(r) = ∫_{r0}^{r} (1 − s⁻³)^{-1/2} ds` and its derivative.
pub fn ppwave_u(r0: f64, r: f64) -> Result<(f64, f64)> {
    if r0 <= 1.0 {
        return Err(Error::DomainError(format!("r0 = {r0} must exceed 1")));
    }
    if r < r0 {
        return Err(Error::DomainError(format!("r = {r} below r0 = {r0}")));
    }
    let du = |s: f64| (1.0 - s.powi(-3)).powf(-0.5);
    Ok((adaptive_simpson(&du, r0, r, 1e-13), du(r)))
}

/// `ρ(r) = 4^{-1/3} r⁻¹ [1 − (1 − r⁻³)^{1/2}]^{-2/3}`.
pub fn ppwave_rho(r: f64) -> Result<f64> {
    if r <= 1.0 {
        return Err(Error::DomainError(format!("r = {r} must exceed 1")));
    }
    Ok(ppwave_rho_dual(Dual3::constant(r)).v)
}

pub fn ppwave_rho_dual(r: Dual3) -> Dual3 {
    // 1 − √(1 − x) = x / (1 + √(1 − x)) avoids cancellation at large r.
    let x = r.powi(-3);
    let gap = x / (1.0 + (1.0 - x).sqrt());
    r.powi(-1) * gap.powf(-2.0 / 3.0) * 4f64.powf(-1.0 / 3.0)
}

/// Invert `ρ(r)` by bisection.
pub fn ppwave_r_of_rho(rho: f64) -> Result<f64> {
    let mut lo: f64 = 1.0 + 1e-12;
    let mut hi = 2.0 * rho + 2.0;
    if ppwave_rho(lo)? > rho {
        return Err(Error::DomainError(format!("ρ = {rho} below the range of the map")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ppwave_rho(mid)? < rho {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Pp-wave metric pulled back to the `ρ` chart, packed `[ρρ, ξξ, θθ]`.
pub fn ppwave_metric_in_rho(rho: f64) -> Result<[f64; 3]> {
    let r = ppwave_r_of_rho(rho)?;
    let drho_dr = ppwave_rho_dual(Dual3::variable(r, 0)).d[0];
    let s = 1.0 - r.powi(-3);
    let g_rr = r.powi(-2) / s;
    Ok([g_rr / (drho_dr * drho_dr), r * r * s, r * r])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kottler_components() {
        let (g, k) = ModelSpec::kottler().sample([2.0, 0.3, 0.1]);
        assert_eq!(g, Sym3::diag(0.25, 4.0, 4.0));
        assert_eq!(k, g * -1.0);
        let trk = k.contract(&g.inverse_spd().unwrap());
        assert_relative_eq!(trk, -3.0, epsilon = 1e-14);
    }

    #[test]
    fn ppwave_components() {
        let r: f64 = 1.7;
        let s = 1.0 - r.powi(-3);
        let (g, k) = ModelSpec::pp_wave(1.2).sample([r, 0.0, 0.0]);
        assert_relative_eq!(g.get(0, 0), r.powi(-2) / s, epsilon = 1e-14);
        assert_relative_eq!(g.get(1, 1), r * r * s, epsilon = 1e-14);
        assert_relative_eq!(k.get(1, 1), -r * r * s.sqrt() * (1.0 + 0.5 * r.powi(-3)), epsilon = 1e-14);
        assert_relative_eq!(k.get(0, 0), -r.powi(-2) / s.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn exponential_warp_is_kottler() {
        let a = ModelSpec::warped(WarpProfile::Exponential, WarpCurvature::MinusG).sample([3.0, 0.2, 0.4]);
        let b = ModelSpec::kottler().sample([3.0, 0.2, 0.4]);
        assert!((a.0 - b.0).max_abs() < 1e-12 && (a.1 - b.1).max_abs() < 1e-12);
    }

    #[test]
    fn warped_lambda_matches_log_derivative() {
        let spec = ModelSpec::warped(WarpProfile::Cosh, WarpCurvature::MinusLambdaG);
        for &r in &[1.0, 1.5, 4.0] {
            let jet = spec.jet([r, 0.0, 0.0]);
            // d/dt log f = r d/dr log √g_ξξ.
            let dlogf_dt = r * 0.5 * jet.dg[0].get(1, 1) / jet.g.get(1, 1);
            let lambda = -jet.k.get(1, 1) / jet.g.get(1, 1);
            assert_relative_eq!(lambda, dlogf_dt, epsilon = 1e-13);
        }
    }

    #[test]
    fn ppwave_u_values() {
        assert_eq!(ppwave_u(1.5, 1.5).unwrap().0, 0.0);
        let (_, du) = ppwave_u(1.5, 2.0).unwrap();
        assert_relative_eq!(du, (7.0f64 / 8.0).powf(-0.5), epsilon = 1e-15);
        assert!(ppwave_u(1.5, 1.4).is_err());
        // Independent route: trapezoid on a fine lattice with Richardson.
        let f = |s: f64| (1.0 - s.powi(-3)).powf(-0.5);
        let trap = |n: usize| {
            let h = 1.5 / n as f64;
            let v: Vec<f64> = (0..=n).map(|i| f(1.5 + i as f64 * h)).collect();
            crate::quadrature::trapezoid(&v, h)
        };
        let rich = (4.0 * trap(4000) - trap(2000)) / 3.0;
        assert_relative_eq!(ppwave_u(1.5, 3.0).unwrap().0, rich, epsilon = 1e-10);
    }

    #[test]
    fn ppwave_grad_u_equals_r() {
        for &r in &[1.3, 2.0, 10.0] {
            let (g, _) = ModelSpec::pp_wave(1.2).sample([r, 0.0, 0.0]);
            let (_, du) = ppwave_u(1.2, r).unwrap();
            assert_relative_eq!((du * du / g.get(0, 0)).sqrt(), r, epsilon = 1e-12);
        }
    }

    #[test]
    fn rho_against_closed_form_inverse() {
        // r = ρ (1 + ¼ρ⁻³)^{2/3} inverts the compactified radius exactly.
        for &rho in &[1.5f64, 3.0, 10.0, 40.0] {
            let r = rho * (1.0 + 0.25 * rho.powi(-3)).powf(2.0 / 3.0);
            assert_relative_eq!(ppwave_rho(r).unwrap(), rho, max_relative = 1e-12);
            assert_relative_eq!(ppwave_r_of_rho(rho).unwrap(), r, max_relative = 1e-12);
        }
        assert!((ppwave_rho(1e4).unwrap() / 1e4 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rho_is_monotone() {
        let r0 = 1.1;
        let mut prev = ppwave_rho(r0).unwrap();
        for i in 1..=2000 {
            let r = r0 * (1.0 + 99.0 * i as f64 / 2000.0);
            let rho = ppwave_rho(r).unwrap();
            assert!(rho > prev);
            assert!(ppwave_rho_dual(Dual3::variable(r, 0)).d[0] > 0.0);
            prev = rho;
        }
    }

    #[test]
    fn asymptotic_traces() {
        let a = analytic_asymptotics(&ModelSpec::pp_wave(1.5)).unwrap();
        assert_relative_eq!(a.tr_m, -1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(a.tr_p, -0.5);
        assert_eq!(a.mass_aspect, 0.0);
        let k = analytic_asymptotics(&ModelSpec::kottler()).unwrap();
        assert_eq!(k.mass_aspect, 0.0);
        let q4 = analytic_asymptotics(&ModelSpec::perturbed_kottler(0.2, 4.0, [0, 0])).unwrap();
        assert_eq!(q4.mass_aspect, 0.0);
        let q3 = analytic_asymptotics(&ModelSpec::perturbed_kottler(0.2, 3.0, [0, 0])).unwrap();
        assert_relative_eq!(q3.mass_aspect, 1.2, epsilon = 1e-14);
        assert!(analytic_asymptotics(&ModelSpec::warped(WarpProfile::Cosh, WarpCurvature::MinusG)).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::pp_wave(1.0).validate().is_err());
        assert!(ModelSpec::perturbed_kottler(0.1, 2.0, [0, 0]).validate().is_err());
        assert!(ModelSpec::perturbed_kottler(-1.5, 3.0, [0, 0]).validate().is_err());
        assert!(ModelSpec::perturbed_kottler(1.5, 3.0, [1, 0]).validate().is_err());
        ModelSpec::perturbed_kottler(2.0, 3.0, [0, 0]).validate().unwrap();
    }
}
