//! Dirichlet problem for `Δu + (Tr k)|∇u| = 0`.
//!
//! The nonlinearity is handled by Picard iteration: the unit normal
//! `ν = ∇u / max(|∇u|, ε)` is frozen at the previous iterate, which leaves a
//! linear, nonsymmetric elliptic problem per step. Interior nodes always see
//! centered second-order stencils (boxes are bounded by Dirichlet nodes), so
//! the assembled operator agrees exactly with [`residual`].

pub mod linear;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::InitialDataSet;
use crate::error::{Error, Result};
use crate::fd::d1_order2;
use crate::field::Lattice;
use crate::geometry::surface::tangent_axes;
use crate::geometry::{point_geometry, PointGeometry};
use crate::grid::{Grid, NodeKind};
use crate::tensor::Sym3;
use linear::{bicgstab, solve_tridiagonal, Csr};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    /// Floor for `|∇u|` in the frozen normal. `None` means `1e-8 (r_max − r_min)`.
    pub grad_floor: Option<f64>,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    pub damping: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            grad_floor: None,
            picard_tol: 1e-10,
            picard_max: 200,
            linear_tol: 1e-12,
            linear_max_iter: 20_000,
            damping: 1.0,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.grad_floor.map_or(true, |e| e > 0.0)
            && self.picard_tol > 0.0
            && self.picard_max > 0
            && self.linear_tol > 0.0
            && self.damping > 0.0
            && self.damping <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("solver parameters out of range: {self:?}")))
        }
    }

    pub fn floor_for(&self, grid: &Grid) -> f64 {
        self.grad_floor.unwrap_or(1e-8 * (grid.r_max - grid.r_min))
    }
}

/// One sample of a boundary field on a torus layer or a box face.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundarySample {
    pub node: usize,
    /// Coordinate axis normal to the face.
    pub axis: usize,
    /// `+1` if the domain's outer normal points toward increasing `x^axis`.
    pub outward: f64,
    /// Area carried by the sample.
    pub weight: f64,
    /// `∂_υ u`, with `υ` the outer normal on plus components and the inner one otherwise.
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryField {
    pub component: usize,
    pub samples: Vec<BoundarySample>,
}

impl BoundaryField {
    pub fn min(&self) -> f64 {
        self.samples.iter().map(|s| s.value).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn area(&self) -> f64 {
        self.samples.iter().map(|s| s.weight).sum()
    }

    pub fn integrate(&self, f: impl Fn(&BoundarySample) -> f64) -> f64 {
        self.samples.iter().map(|s| f(s) * s.weight).sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpacetimeHarmonicSolution {
    pub u: Vec<f64>,
    pub boundary_values: BTreeMap<usize, f64>,
    pub normal_derivatives: BTreeMap<usize, BoundaryField>,
    pub residual_norm: f64,
    pub picard_iters: usize,
    /// Sup-norm change per Picard step.
    pub picard_history: Vec<f64>,
    pub linear_iters: usize,
}

impl SpacetimeHarmonicSolution {
    pub fn normal_derivative(&self, component: usize) -> Result<&BoundaryField> {
        self.normal_derivatives.get(&component).ok_or(Error::UnknownComponent(component))
    }
}

/// Reusable solver: geometry is computed once and shared by every solve on
/// the same data, which matters for the boundary tuner.
pub struct Solver<'a> {
    pub data: &'a InitialDataSet,
    pub params: SolverParams,
    pub lattice: Lattice,
    pub pgs: Vec<PointGeometry>,
    contracted: Vec<[f64; 3]>,
    floor: f64,
}

impl<'a> Solver<'a> {
    pub fn new(data: &'a InitialDataSet, params: SolverParams) -> Result<Self> {
        let pgs = point_geometry(data)?;
        Self::with_geometry(data, params, pgs)
    }

    pub fn with_geometry(data: &'a InitialDataSet, params: SolverParams, pgs: Vec<PointGeometry>) -> Result<Self> {
        params.validate()?;
        let contracted = pgs.iter().map(|p| p.contracted_gamma()).collect();
        Ok(Solver {
            data,
            lattice: Lattice::new(&data.grid),
            floor: params.floor_for(&data.grid),
            params,
            pgs,
            contracted,
        })
    }

    fn check_values(&self, values: &BTreeMap<usize, f64>) -> Result<()> {
        let n_comp = self.data.boundary_components.len();
        if let Some(&id) = values.keys().find(|&&id| id >= n_comp) {
            return Err(Error::UnknownComponent(id));
        }
        if let Some(id) = (0..n_comp).find(|id| !values.contains_key(id)) {
            return Err(Error::MissingBoundaryValue(id));
        }
        if let Some((id, v)) = values.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidSpec(format!("boundary value {v} for component {id}")));
        }
        Ok(())
    }

    fn fixed_value(&self, n: usize, values: &BTreeMap<usize, f64>) -> Option<f64> {
        match self.lattice.kinds[n] {
            NodeKind::Interior => None,
            NodeKind::Boundary(c) | NodeKind::Excised(c) => Some(values[&c]),
        }
    }

    fn initial_guess(&self, values: &BTreeMap<usize, f64>) -> Vec<f64> {
        let grid = &self.data.grid;
        let (v0, v1) = (values[&0], values[&1]);
        (0..grid.len())
            .map(|n| {
                self.fixed_value(n, values).unwrap_or_else(|| {
                    let t = (grid.r(grid.unindex(n)[0]) - grid.r_min) / (grid.r_max - grid.r_min);
                    v0 + (v1 - v0) * t
                })
            })
            .collect()
    }

    /// Row of the linearized operator at an interior node, as (node, weight) pairs.
    fn row(&self, n: usize, nu: &[f64; 3], out: &mut Vec<(usize, f64)>) {
        let grid = &self.data.grid;
        let idx = grid.unindex(n);
        let h = grid.spacings();
        let pg = &self.pgs[n];
        let axes = self.lattice.axes();
        let at = |d: [isize; 3]| offset_node(grid, idx, d);
        for &a in axes {
            let mut d = [0isize; 3];
            let caa = pg.ginv.get(a, a) / (h[a] * h[a]);
            let b = (pg.trk * nu[a] - self.contracted[n][a]) / (2.0 * h[a]);
            out.push((n, -2.0 * caa));
            d[a] = 1;
            out.push((at(d), caa + b));
            d[a] = -1;
            out.push((at(d), caa - b));
        }
        for &a in axes {
            for &c in axes {
                if c <= a {
                    continue;
                }
                let gac = pg.ginv.get(a, c);
                if gac.abs() <= 1e-14 * (pg.ginv.get(a, a) + pg.ginv.get(c, c)) {
                    continue;
                }
                let w = 2.0 * gac / (4.0 * h[a] * h[c]);
                for (sa, sc) in [(1isize, 1isize), (1, -1), (-1, 1), (-1, -1)] {
                    let mut d = [0isize; 3];
                    d[a] = sa;
                    d[c] = sc;
                    out.push((at(d), w * (sa * sc) as f64));
                }
            }
        }
    }

    fn frozen_normal(&self, u: &[f64], n: usize) -> [f64; 3] {
        let (grad, _) = self.lattice.derivatives(u, n);
        let pg = &self.pgs[n];
        let up = pg.raise(&grad);
        let norm = pg.norm_covector(&grad).max(self.floor);
        up.map(|x| x / norm)
    }

    fn linear_solve(&self, u: &[f64], values: &BTreeMap<usize, f64>, tol: f64) -> Result<(Vec<f64>, usize)> {
        let len = u.len();
        let rhs: Vec<f64> = (0..len).map(|n| self.fixed_value(n, values).unwrap_or(0.0)).collect();
        let rows: Vec<Vec<(usize, f64)>> = (0..len)
            .into_par_iter()
            .map(|n| {
                let mut row = Vec::with_capacity(7);
                if self.fixed_value(n, values).is_some() {
                    row.push((n, 1.0));
                } else {
                    let nu = self.frozen_normal(u, n);
                    self.row(n, &nu, &mut row);
                }
                row
            })
            .collect();
        if self.data.grid.is_radial() {
            let (mut lo, mut di, mut up) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
            for (n, row) in rows.iter().enumerate() {
                for &(c, w) in row {
                    match c as isize - n as isize {
                        -1 => lo[n] += w,
                        0 => di[n] += w,
                        1 => up[n] += w,
                        _ => unreachable!("radial rows are tridiagonal"),
                    }
                }
            }
            return Ok((solve_tridiagonal(&lo, &di, &up, &rhs)?, 1));
        }
        let mut a = Csr::with_capacity(len, 7 * len);
        for mut row in rows {
            a.push_row(&mut row);
        }
        let mut x = u.to_vec();
        let stats = bicgstab(&a, &rhs, &mut x, tol, self.params.linear_max_iter)?;
        Ok((x, stats.iterations))
    }

    /// Solve with the given constants, starting from `warm` when provided.
    pub fn solve(&self, values: &BTreeMap<usize, f64>, warm: Option<&[f64]>) -> Result<SpacetimeHarmonicSolution> {
        self.check_values(values)?;
        let mut u = match warm {
            Some(w) if w.len() == self.data.grid.len() => (0..w.len())
                .map(|n| self.fixed_value(n, values).unwrap_or(w[n]))
                .collect(),
            _ => self.initial_guess(values),
        };
        let mut damping = self.params.damping;
        let mut history = Vec::new();
        let mut linear_iters = 0;
        let scale = values.values().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for iter in 1..=self.params.picard_max {
            // Early steps only need to resolve the next Picard correction.
            let loose = history.last().map_or(1e-6, |&c: &f64| 1e-3 * c / scale);
            let (next, its) = self.linear_solve(&u, values, self.params.linear_tol.max(loose.min(1e-6)))?;
            linear_iters += its;
            let change = next
                .iter()
                .zip(&u)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                * damping;
            for (ui, ni) in u.iter_mut().zip(&next) {
                *ui += damping * (ni - *ui);
            }
            if history.last().is_some_and(|&prev| change > prev) && damping > 1.0 / 64.0 {
                damping *= 0.5;
                log::debug!("Picard oscillation at step {iter}, damping now {damping}");
            }
            history.push(change);
            if change < self.params.picard_tol {
                return Ok(self.finish(u, values, iter, history, linear_iters));
            }
        }
        Err(Error::NoConvergence {
            iters: self.params.picard_max,
            last_change: history.last().copied().unwrap_or(f64::NAN),
        })
    }

    fn finish(
        &self,
        u: Vec<f64>,
        values: &BTreeMap<usize, f64>,
        picard_iters: usize,
        picard_history: Vec<f64>,
        linear_iters: usize,
    ) -> SpacetimeHarmonicSolution {
        let res = self.residual(&u);
        let residual_norm = (0..u.len())
            .filter(|&n| self.lattice.kinds[n] == NodeKind::Interior && self.grad_norm(&u, n) > self.floor)
            .map(|n| res[n].abs())
            .fold(0.0, f64::max);
        let normal_derivatives = (0..self.data.boundary_components.len())
            .map(|c| (c, self.normal_derivative(&u, c)))
            .collect();
        SpacetimeHarmonicSolution {
            u,
            boundary_values: values.clone(),
            normal_derivatives,
            residual_norm,
            picard_iters,
            picard_history,
            linear_iters,
        }
    }

    pub fn grad_norm(&self, u: &[f64], n: usize) -> f64 {
        let (grad, _) = self.lattice.derivatives(u, n);
        self.pgs[n].norm_covector(&grad)
    }

    /// `Δu + (Tr k)|∇u|` at interior nodes; zero on boundary and excised nodes.
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        (0..u.len())
            .into_par_iter()
            .map(|n| {
                if self.lattice.kinds[n] != NodeKind::Interior {
                    return 0.0;
                }
                let (grad, hess) = self.lattice.derivatives(u, n);
                let pg = &self.pgs[n];
                pg.covariant_hessian(&grad, &hess).contract(&pg.ginv) + pg.trk * pg.norm_covector(&grad)
            })
            .collect()
    }

    /// `∇̄²u = ∇²u + k|∇u|`; zero inside boxes.
    pub fn spacetime_hessian(&self, u: &[f64]) -> Vec<Sym3> {
        (0..u.len())
            .into_par_iter()
            .map(|n| {
                if matches!(self.lattice.kinds[n], NodeKind::Excised(_)) {
                    return Sym3::ZERO;
                }
                let (grad, hess) = self.lattice.derivatives(u, n);
                let pg = &self.pgs[n];
                pg.covariant_hessian(&grad, &hess) + self.data.k[n] * pg.norm_covector(&grad)
            })
            .collect()
    }

    /// `∂_υ u` on every sample of a component, from one-sided second-order
    /// differences taken on the domain side.
    pub fn normal_derivative(&self, u: &[f64], component: usize) -> BoundaryField {
        let grid = &self.data.grid;
        let plus = self.data.boundary_components[component].kind.is_plus();
        let h = grid.spacings();
        let samples = boundary_faces(grid, component)
            .into_iter()
            .map(|(node, axis, outward, cell)| {
                let idx = grid.unindex(node);
                // Backward stencil when the domain lies below the face.
                let st = if outward > 0.0 { d1_order2(2, 3, false) } else { d1_order2(0, 3, false) };
                let da = st.apply(|o| {
                    let mut d = [0isize; 3];
                    d[axis] = o;
                    u[offset_node(grid, idx, d)]
                }) / h[axis];
                let pg = &self.pgs[node];
                let outer = outward * pg.ginv.get(axis, axis).sqrt() * da;
                let g = &self.data.g[node];
                let [b, c] = tangent_axes(axis);
                let det = g.get(b, b) * g.get(c, c) - g.get(b, c) * g.get(b, c);
                BoundarySample {
                    node,
                    axis,
                    outward,
                    weight: det.max(0.0).sqrt() * cell,
                    value: if plus { outer } else { -outer },
                }
            })
            .collect();
        BoundaryField { component, samples }
    }
}

/// Node at `idx + d`, wrapping the angular axes.
pub fn offset_node(grid: &Grid, idx: [usize; 3], d: [isize; 3]) -> usize {
    let i = (idx[0] as isize + d[0]) as usize;
    grid.index(i, grid.wrap(1, idx[1] as isize + d[1]), grid.wrap(2, idx[2] as isize + d[2]))
}

/// Face samples of a boundary component as `(node, axis, outward, coordinate area)`.
/// Box edges and corners appear once per adjacent face, with the coordinate
/// area split so the faces tile the box surface.
pub fn boundary_faces(grid: &Grid, component: usize) -> Vec<(usize, usize, f64, f64)> {
    let h = grid.spacings();
    let cell = h[1] * h[2];
    if component < 2 {
        let (i, outward) = if component == 0 { (0, -1.0) } else { (grid.n_r - 1, 1.0) };
        let mut out = Vec::with_capacity(grid.n_xi * grid.n_theta);
        for j in 0..grid.n_xi {
            for l in 0..grid.n_theta {
                out.push((grid.index(i, j, l), 0, outward, cell));
            }
        }
        return out;
    }
    let Some(ex) = grid.excisions.get(component - 2) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for axis in 0..3 {
        let [b, c] = tangent_axes(axis);
        for (level, outward) in [(ex.lo[axis], 1.0), (ex.hi[axis], -1.0)] {
            for p in ex.lo[b]..=ex.hi[b] {
                for q in ex.lo[c]..=ex.hi[c] {
                    let mut idx = [0; 3];
                    idx[axis] = level;
                    idx[b] = p;
                    idx[c] = q;
                    let end = |x: usize, a: usize| if x == ex.lo[a] || x == ex.hi[a] { 0.5 } else { 1.0 };
                    let area = h[b] * h[c] * end(p, b) * end(q, c);
                    out.push((grid.index(idx[0], idx[1], idx[2]), axis, outward, area));
                }
            }
        }
    }
    out
}

pub fn solve_dirichlet(
    data: &InitialDataSet,
    values: &BTreeMap<usize, f64>,
    params: SolverParams,
) -> Result<SpacetimeHarmonicSolution> {
    Solver::new(data, params)?.solve(values, None)
}

pub fn residual(data: &InitialDataSet, u: &[f64]) -> Result<Vec<f64>> {
    Ok(Solver::new(data, SolverParams::default())?.residual(u))
}

pub fn spacetime_hessian(data: &InitialDataSet, u: &[f64]) -> Result<Vec<Sym3>> {
    Ok(Solver::new(data, SolverParams::default())?.spacetime_hessian(u))
}

pub fn boundary_normal_derivative(solution: &SpacetimeHarmonicSolution, component: usize) -> Result<&BoundaryField> {
    solution.normal_derivative(component)
}

/// Constant Dirichlet data `value` on every component.
pub fn uniform_values(data: &InitialDataSet, value: f64) -> BTreeMap<usize, f64> {
    (0..data.boundary_components.len()).map(|c| (c, value)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DerivativeMode;
    use crate::fd::observed_orders;
    use crate::grid::Excision;
    use crate::models::{build_model, ppwave_u, ModelSpec};

    fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
        v.into_iter().fold(0.0, |m, x: f64| m.max(x.abs()))
    }

    fn kottler_values(r_max: f64) -> BTreeMap<usize, f64> {
        BTreeMap::from([(0, 0.0), (1, r_max - 1.0)])
    }

    #[test]
    fn kottler_radial_reproduces_r_minus_one() {
        let grid = Grid::radial(1.0, 10.0, 2000);
        let data = build_model(&ModelSpec::kottler(), &grid).unwrap();
        let sol = solve_dirichlet(&data, &kottler_values(10.0), SolverParams::default()).unwrap();
        let err = sup((0..grid.n_r).map(|i| sol.u[i] - (grid.r(i) - 1.0)));
        assert!(err <= 1e-6, "max error {err:.3e}");
        let inner = sol.normal_derivative(0).unwrap();
        assert!((inner.min() - 1.0).abs() < 1e-6);
        let outer = sol.normal_derivative(1).unwrap();
        assert!((outer.max() - 10.0).abs() < 1e-4);
    }

    #[test]
    fn constants_are_exact_solutions() {
        let grid = Grid::torus(1.0, 2.0, 12, 8, 8).with_excision(Excision { lo: [4, 2, 2], hi: [7, 5, 5] });
        let data = build_model(&ModelSpec::perturbed_kottler(0.3, 3.0, [1, 1]), &grid).unwrap();
        let sol = solve_dirichlet(&data, &uniform_values(&data, 0.7), SolverParams::default()).unwrap();
        assert!(sup(sol.u.iter().map(|u| u - 0.7)) < 1e-12);
        for field in sol.normal_derivatives.values() {
            assert!(sup(field.samples.iter().map(|s| s.value)) < 1e-10);
        }
    }

    #[test]
    fn missing_and_unknown_components_are_rejected() {
        let data = build_model(&ModelSpec::kottler(), &Grid::radial(1.0, 2.0, 20)).unwrap();
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        assert_eq!(solver.solve(&BTreeMap::from([(0, 0.0)]), None).unwrap_err(), Error::MissingBoundaryValue(1));
        let extra = BTreeMap::from([(0, 0.0), (1, 1.0), (5, 1.0)]);
        assert_eq!(solver.solve(&extra, None).unwrap_err(), Error::UnknownComponent(5));
    }

    #[test]
    fn ppwave_matches_closed_form_at_second_order() {
        let (r0, r_max) = (1.5, 6.0);
        let mut errors = Vec::new();
        for n in [41, 81, 161, 321] {
            let grid = Grid::radial(r0, r_max, n);
            let data = build_model(&ModelSpec::pp_wave(r0), &grid)
                .unwrap()
                .with_derivative_mode(DerivativeMode::Analytic);
            let values = BTreeMap::from([(0, 0.0), (1, ppwave_u(r0, r_max).unwrap().0)]);
            let sol = solve_dirichlet(&data, &values, SolverParams::default()).unwrap();
            errors.push(sup((0..n).map(|i| sol.u[i] - ppwave_u(r0, grid.r(i)).unwrap().0)));
        }
        let orders = observed_orders(&errors);
        assert!(orders.iter().all(|&p| p > 1.8), "errors {errors:?}, orders {orders:?}");
    }

    #[test]
    fn residual_matches_direct_radial_evaluation() {
        // On Kottler Δu = r²u'' + 3ru' and |∇u| = r|u'|, with Tr k = −3.
        let grid = Grid::radial(1.0, 3.0, 101);
        let data = build_model(&ModelSpec::kottler(), &grid)
            .unwrap()
            .with_derivative_mode(DerivativeMode::Analytic);
        let u: Vec<f64> = (0..grid.n_r).map(|i| (1.3 * grid.r(i)).sin() + 0.2 * grid.r(i).powi(2)).collect();
        let res = residual(&data, &u).unwrap();
        let h = grid.h_r();
        for i in 1..grid.n_r - 1 {
            let r = grid.r(i);
            let d1 = (u[i + 1] - u[i - 1]) / (2.0 * h);
            let d2 = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
            let direct = r * r * d2 + 3.0 * r * d1 - 3.0 * r * d1.abs();
            assert!((res[i] - direct).abs() < 1e-12 * (1.0 + direct.abs()), "i={i}: {} vs {direct}", res[i]);
        }
        assert!(sup(residual(&data, &vec![0.0; grid.n_r]).unwrap()) == 0.0);
    }

    #[test]
    fn spacetime_hessian_of_r_vanishes_on_kottler() {
        let grid = Grid::torus(1.0, 2.0, 16, 6, 6);
        let data = build_model(&ModelSpec::kottler(), &grid)
            .unwrap()
            .with_derivative_mode(DerivativeMode::Analytic);
        let u: Vec<f64> = (0..grid.len()).map(|n| grid.r(grid.unindex(n)[0])).collect();
        let hess = spacetime_hessian(&data, &u).unwrap();
        assert!(sup(hess.iter().map(|t| t.max_abs())) < 1e-12);
    }

    #[test]
    fn torus_solve_with_box_respects_maximum_principle() {
        let grid = Grid::torus(1.0, 2.0, 16, 12, 12).with_excision(Excision { lo: [5, 3, 3], hi: [9, 7, 7] });
        let data = build_model(&ModelSpec::perturbed_kottler(0.4, 3.0, [1, 0]), &grid).unwrap();
        let values = BTreeMap::from([(0, 0.0), (1, 1.0), (2, 0.6)]);
        let sol = solve_dirichlet(&data, &values, SolverParams::default()).unwrap();
        assert!(sol.u.iter().all(|&u| (-1e-12..=1.0 + 1e-12).contains(&u)));
        assert!(sol.residual_norm < 1e-8, "{}", sol.residual_norm);
        // u attains its strict minimum on the inner torus, so ∂_υ u > 0 there (Hopf).
        assert!(sol.normal_derivative(0).unwrap().min() > 0.0);
    }

    #[test]
    fn raising_a_constant_raises_the_solution() {
        let grid = Grid::torus(1.0, 2.0, 14, 10, 10).with_excision(Excision { lo: [4, 3, 3], hi: [8, 6, 6] });
        let data = build_model(&ModelSpec::kottler(), &grid).unwrap();
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let low = solver.solve(&BTreeMap::from([(0, 0.0), (1, 1.0), (2, 0.3)]), None).unwrap();
        let high = solver.solve(&BTreeMap::from([(0, 0.0), (1, 1.0), (2, 0.5)]), Some(&low.u)).unwrap();
        assert!(low.u.iter().zip(&high.u).all(|(a, b)| b >= &(a - 1e-12)));
    }

    #[test]
    fn box_faces_tile_the_box_surface() {
        let grid = Grid::torus(1.0, 2.0, 16, 12, 12).with_excision(Excision { lo: [5, 3, 3], hi: [9, 7, 8] });
        let h = grid.spacings();
        let (a, b, c) = (4.0 * h[0], 4.0 * h[1], 5.0 * h[2]);
        let area: f64 = boundary_faces(&grid, 2).iter().map(|f| f.3).sum();
        assert!((area - 2.0 * (a * b + a * c + b * c)).abs() < 1e-12);
    }
}
