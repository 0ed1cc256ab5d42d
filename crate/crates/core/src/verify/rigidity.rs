//! Probes of the equality case: level sets with vanishing null second
//! fundamental form, flat induced metric, `X = −∇_Σ log f` and saturated DEC.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::surface::torus_forms;
use crate::geometry::ConstraintFields;
use crate::grid::NodeKind;
use crate::levelset::mesh::mesh_geometry;
use crate::levelset::{node_level, LevelField, LevelPiece};
use crate::solver::Solver;
use crate::tensor::Sym3;

#[derive(Debug, Clone, Serialize)]
pub struct LevelRigidity {
    pub level: f64,
    pub chi: Option<i64>,
    pub area: f64,
    /// `∫_Σ |∇_Σ log f + X|² dA`.
    pub x_match_integral: f64,
    /// `max |K|` on the level surface.
    pub gauss_max: f64,
    /// `2πχ − ∫|∇_Σ log f + X|² dA`.
    pub gauss_bonnet: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RigidityReport {
    pub chi_plus_norm: f64,
    pub gauss_flatness: f64,
    pub x_gradient_match: f64,
    pub dec_saturation: f64,
    pub levels: Vec<LevelRigidity>,
    /// Whether `χ⁺` and `μ + J(ν)` vanish to `tolerance`, so that the
    /// Gauss–Bonnet balance is expected to close.
    pub balance_expected: bool,
    /// Largest `|2πχ − ∫|∇ log f + X|²|` over levels.
    pub gauss_bonnet_max: f64,
    pub tolerance: f64,
}

impl RigidityReport {
    pub fn norms(&self) -> [(&'static str, f64); 4] {
        [
            ("chi_plus", self.chi_plus_norm),
            ("gauss_flatness", self.gauss_flatness),
            ("x_gradient_match", self.x_gradient_match),
            ("dec_saturation", self.dec_saturation),
        ]
    }
}

fn interpolate(weights: &[(usize, f64)], f: impl Fn(usize) -> f64) -> f64 {
    weights.iter().map(|&(n, w)| w * f(n)).sum()
}

pub fn rigidity_diagnostics(
    solver: &Solver<'_>,
    u: &[f64],
    constraints: &ConstraintFields,
    n_levels: usize,
) -> Result<RigidityReport> {
    let data = solver.data;
    let grid = &data.grid;
    let mut x_sq = vec![0.0; grid.len()];
    let (mut chi_plus_norm, mut x_gradient_match, mut dec_saturation) = (0.0f64, 0.0f64, 0.0f64);
    for n in 0..grid.len() {
        let kind = solver.lattice.kinds[n];
        if matches!(kind, NodeKind::Excised(_)) {
            continue;
        }
        let Some(level) = node_level(solver, u, constraints, n) else {
            return Err(Error::FoliationBroken { node: n, grad: solver.grad_norm(u, n) });
        };
        x_sq[n] = level.x_gradient_match.powi(2);
        // Boundary nodes only see one-sided second differences.
        if kind == NodeKind::Interior {
            chi_plus_norm = chi_plus_norm.max(level.chi_plus_norm);
            x_gradient_match = x_gradient_match.max(level.x_gradient_match);
            dec_saturation = dec_saturation.max(level.dec_saturation.abs());
        }
    }

    let h = grid.h();
    let tolerance = 10.0 * h * h;
    let balance_expected = chi_plus_norm <= tolerance && dec_saturation <= tolerance;
    let field = LevelField::new(solver, u);
    let (lo, hi) = field.range();
    let mut levels = Vec::with_capacity(n_levels);
    let mut gauss_flatness: f64 = 0.0;
    for m in 0..n_levels {
        let t = lo + (m as f64 + 0.5) * (hi - lo) / n_levels as f64;
        let surface = match field.extract(t) {
            Ok(s) => s,
            Err(Error::NearCriticalLevel { .. }) => continue,
            Err(e) => return Err(e),
        };
        let (mut area, mut x_int, mut gauss_max) = (0.0, 0.0, 0.0f64);
        for piece in &surface.pieces {
            match piece {
                LevelPiece::CoordinateTorus { r } => {
                    // The induced metric does not depend on the angles, so the torus is flat.
                    let w = grid.interpolation_weights([*r, 0.0, 0.0]);
                    let g = Sym3(std::array::from_fn(|c| interpolate(&w, |n| data.g[n].0[c])));
                    let (induced, _, _) = torus_forms(&g, &g, &solver.pgs[w[0].0], 1.0);
                    let a = induced.det().max(0.0).sqrt() * grid.torus_area();
                    area += a;
                    x_int += a * interpolate(&w, |n| x_sq[n]);
                }
                LevelPiece::Mesh(mesh) => {
                    let metric = |x: &[f64; 3]| {
                        let w = grid.interpolation_weights(*x);
                        Sym3(std::array::from_fn(|c| interpolate(&w, |n| data.g[n].0[c])))
                    };
                    let geo = mesh_geometry(mesh, metric);
                    area += geo.area;
                    for (v, x) in mesh.vertices.iter().enumerate() {
                        let w = grid.interpolation_weights(*x);
                        x_int += geo.vertex_area[v] * interpolate(&w, |n| x_sq[n]);
                    }
                    gauss_max = geo.gauss_curvature.iter().fold(gauss_max, |m, k| m.max(k.abs()));
                }
            }
        }
        let chi = surface.euler_characteristic().ok();
        let gauss_bonnet = chi.map(|c| 2.0 * std::f64::consts::PI * c as f64 - x_int);
        gauss_flatness = gauss_flatness.max(gauss_max);
        levels.push(LevelRigidity { level: t, chi, area, x_match_integral: x_int, gauss_max, gauss_bonnet });
    }
    let gauss_bonnet_max = levels.iter().filter_map(|l| l.gauss_bonnet).fold(0.0, |m: f64, v| m.max(v.abs()));
    Ok(RigidityReport {
        chi_plus_norm,
        gauss_flatness,
        x_gradient_match,
        dec_saturation,
        levels,
        balance_expected,
        gauss_bonnet_max,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DerivativeMode;
    use crate::geometry::compute_constraints;
    use crate::grid::Grid;
    use crate::models::{build_model, ModelSpec};
    use crate::solver::SolverParams;
    use std::collections::BTreeMap;

    fn report(spec: ModelSpec, r_min: f64, r_max: f64, n: usize) -> (RigidityReport, f64) {
        let grid = Grid::radial(r_min, r_max, n);
        let data = build_model(&spec, &grid).unwrap().with_derivative_mode(DerivativeMode::Analytic);
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let sol = solver.solve(&BTreeMap::from([(0, 0.0), (1, r_max - r_min)]), None).unwrap();
        let c = compute_constraints(&data).unwrap();
        let h = grid.h();
        (rigidity_diagnostics(&solver, &sol.u, &c, 16).unwrap(), 10.0 * h * h)
    }

    #[test]
    fn kottler_is_rigid() {
        let (rep, tol) = report(ModelSpec::kottler(), 1.0, 4.0, 601);
        for (name, v) in rep.norms() {
            assert!(v <= tol, "{name} = {v} > {tol}");
        }
        assert!(rep.balance_expected && rep.gauss_bonnet_max <= tol);
    }

    #[test]
    fn perturbed_data_break_rigidity() {
        let (rep, tol) = report(ModelSpec::perturbed_kottler(0.5, 3.0, [0, 0]), 1.0, 4.0, 601);
        assert!(rep.norms().iter().any(|(_, v)| *v > 1e3 * tol), "{:?}", rep.norms());
    }

    #[test]
    fn critical_points_break_the_foliation() {
        let grid = Grid::radial(1.0, 4.0, 101);
        let data = build_model(&ModelSpec::kottler(), &grid).unwrap();
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let u: Vec<f64> = (0..grid.len()).map(|i| (grid.r(i) - 2.5).powi(2)).collect();
        let c = compute_constraints(&data).unwrap();
        let err = rigidity_diagnostics(&solver, &u, &c, 16).unwrap_err();
        assert!(matches!(err, Error::FoliationBroken { .. }), "{err}");
    }
}
