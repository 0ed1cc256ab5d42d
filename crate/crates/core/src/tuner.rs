//! Tuning the Dirichlet constants on extra boundary components.
//!
//! The inner torus is anchored at `u = 0` and the outer torus at `u = 1`.
//! Every other component carries a free constant, and its optimal value makes
//! `min ∂_υ u` vanish there. With `n` the outer normal this is `min n(u) = 0`
//! on plus components and `max n(u) = 0` on minus ones. Starting from all ones, the vector of optimal values is iterated to its
//! fixed point; each coordinate of the iteration is found by bisection.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::InitialDataSet;
use crate::error::{Error, Result};
use crate::solver::{SolverParams, SpacetimeHarmonicSolution, Solver};

/// Constants on the tunable components, ordered by component id (2, 3, ...).
pub type BoundaryVector = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TunerParams {
    /// The normal-derivative tolerance is `grad_tol_scale · h`.
    pub grad_tol_scale: f64,
    /// Bisection stops once the bracket is this narrow.
    pub value_tol: f64,
    pub max_bisections: usize,
    pub max_outer: usize,
}

impl Default for TunerParams {
    fn default() -> Self {
        TunerParams { grad_tol_scale: 1.0, value_tol: 1e-5, max_bisections: 60, max_outer: 50 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TunerReport {
    pub components: Vec<usize>,
    pub fixed_point: BoundaryVector,
    pub iterates: Vec<BoundaryVector>,
    /// `min ∂_υ u` per component at the fixed point.
    pub extremal_normal_derivatives: Vec<f64>,
    /// Node where the extremum is attained.
    pub extremal_nodes: Vec<usize>,
    pub bisection_counts: Vec<usize>,
    pub grad_tol: f64,
    pub value_tol: f64,
    #[serde(skip)]
    pub solution: Option<SpacetimeHarmonicSolution>,
}

pub fn tunable_components(data: &InitialDataSet) -> Vec<usize> {
    (2..data.boundary_components.len()).collect()
}

pub fn boundary_values(data: &InitialDataSet, a: &[f64]) -> BTreeMap<usize, f64> {
    let mut values = BTreeMap::from([(0, 0.0), (1, 1.0)]);
    for (id, v) in tunable_components(data).into_iter().zip(a) {
        values.insert(id, *v);
    }
    values
}

/// `min ∂_υ u` on a component together with the node where it occurs.
fn extremal(sol: &SpacetimeHarmonicSolution, component: usize) -> (f64, usize) {
    sol.normal_derivatives[&component]
        .samples
        .iter()
        .fold((f64::INFINITY, 0), |best, s| if s.value < best.0 { (s.value, s.node) } else { best })
}

/// Boundary fields of `n(u_a)` on each tunable component.
pub fn phi_map(solver: &Solver<'_>, a: &[f64]) -> Result<Vec<crate::solver::BoundaryField>> {
    let data = solver.data;
    let sol = solver.solve(&boundary_values(data, a), None)?;
    Ok(tunable_components(data).into_iter().map(|c| sol.normal_derivatives[&c].clone()).collect())
}

pub struct Tuner<'a> {
    pub solver: Solver<'a>,
    pub params: TunerParams,
    pub grad_tol: f64,
    cache: Mutex<HashMap<(usize, Vec<u64>), (f64, usize)>>,
}

impl<'a> Tuner<'a> {
    pub fn new(data: &'a InitialDataSet, solver_params: SolverParams, params: TunerParams) -> Result<Self> {
        if !(params.value_tol > 0.0 && params.grad_tol_scale > 0.0) {
            return Err(Error::InvalidSpec(format!("tuner parameters out of range: {params:?}")));
        }
        let solver = Solver::new(data, solver_params)?;
        let grad_tol = params.grad_tol_scale * data.grid.h();
        Ok(Tuner { solver, params, grad_tol, cache: Mutex::new(HashMap::new()) })
    }

    /// Optimal value for tunable slot `slot` with the other slots taken from `a`,
    /// and the number of bisection steps used.
    pub fn optimal_value(&self, slot: usize, a: &[f64]) -> Result<(f64, usize)> {
        // The result does not depend on a[slot], so key the cache on the others.
        let key: Vec<u64> =
            a.iter().enumerate().map(|(i, v)| if i == slot { 0 } else { v.to_bits() }).collect();
        if let Some(&hit) = self.cache.lock().expect("cache lock").get(&(slot, key.clone())) {
            return Ok(hit);
        }
        let component = tunable_components(self.solver.data)[slot];
        let mut trial = a.to_vec();
        // Each bisection warm-starts from its own previous solve, so results
        // do not depend on how slots are scheduled across threads.
        let mut warm: Option<Vec<f64>> = None;
        let mut f = |c: f64| -> Result<f64> {
            trial[slot] = c;
            let sol = self.solver.solve(&boundary_values(self.solver.data, &trial), warm.as_deref())?;
            let value = extremal(&sol, component).0;
            warm = Some(sol.u);
            Ok(value)
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        let (f_lo, f_hi) = (f(lo)?, f(hi)?);
        if f_lo == 0.0 {
            return Ok((lo, 0));
        }
        if f_hi == 0.0 {
            return Ok((hi, 0));
        }
        if f_lo.signum() == f_hi.signum() {
            return Err(Error::NoBracket { component, f_lo, f_hi });
        }
        let lo_sign = f_lo.signum();
        let mut count = 0;
        while hi - lo > self.params.value_tol {
            if count == self.params.max_bisections {
                return Err(Error::NoConvergence { iters: count, last_change: hi - lo });
            }
            let mid = 0.5 * (lo + hi);
            let fm = f(mid)?;
            count += 1;
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == lo_sign {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let value = 0.5 * (lo + hi);
        self.cache.lock().expect("cache lock").insert((slot, key), (value, count));
        Ok((value, count))
    }

    /// One application of the optimal-value map to every slot.
    pub fn step(&self, a: &[f64]) -> Result<(BoundaryVector, Vec<usize>)> {
        let results: Vec<Result<(f64, usize)>> = (0..a.len()).into_par_iter().map(|s| self.optimal_value(s, a)).collect();
        let mut next = Vec::with_capacity(a.len());
        let mut counts = Vec::with_capacity(a.len());
        for r in results {
            let (v, c) = r?;
            next.push(v);
            counts.push(c);
        }
        Ok((next, counts))
    }

    /// Iterate from `start` to the fixed point.
    pub fn run_from(&self, start: BoundaryVector) -> Result<TunerReport> {
        let data = self.solver.data;
        let components = tunable_components(data);
        if start.len() != components.len() {
            return Err(Error::InvalidSpec(format!(
                "start vector has {} entries, {} tunable components",
                start.len(),
                components.len()
            )));
        }
        let mut counts = vec![0; components.len()];
        let mut iterates = vec![start.clone()];
        let mut a = start;
        let mut converged = components.is_empty();
        for _ in 0..self.params.max_outer {
            if converged {
                break;
            }
            let (next, c) = self.step(&a)?;
            for (slot, (&new, &old)) in next.iter().zip(&a).enumerate() {
                counts[slot] += c[slot];
                if new > old + self.params.value_tol {
                    return Err(Error::MonotonicityViolation { component: components[slot], increase: new - old });
                }
            }
            let change = next.iter().zip(&a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            iterates.push(next.clone());
            a = next;
            converged = change < self.params.value_tol;
        }
        if !converged {
            let last = iterates.len() - 1;
            let change = iterates[last].iter().zip(&iterates[last - 1]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            return Err(Error::NoConvergence { iters: self.params.max_outer, last_change: change });
        }
        let solution = self.solver.solve(&boundary_values(data, &a), None)?;
        let (extremal_normal_derivatives, extremal_nodes) =
            components.iter().map(|&c| extremal(&solution, c)).unzip();
        Ok(TunerReport {
            components,
            fixed_point: a,
            iterates,
            extremal_normal_derivatives,
            extremal_nodes,
            bisection_counts: counts,
            grad_tol: self.grad_tol,
            value_tol: self.params.value_tol,
            solution: Some(solution),
        })
    }
}

/// Fixed point reached from `a₀ = (1, …, 1)`.
pub fn tune_boundary_constants(
    data: &InitialDataSet,
    solver_params: SolverParams,
    params: TunerParams,
) -> Result<TunerReport> {
    let tuner = Tuner::new(data, solver_params, params)?;
    tuner.run_from(vec![1.0; tunable_components(data).len()])
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartProbe {
    pub start: BoundaryVector,
    pub fixed_point: BoundaryVector,
    pub max_difference: f64,
}

/// Re-run the iteration from a vector dominating the fixed point and compare.
pub fn restart_probe(tuner: &Tuner<'_>, report: &TunerReport, start: BoundaryVector) -> Result<RestartProbe> {
    if start.iter().zip(&report.fixed_point).any(|(s, f)| s < f) {
        return Err(Error::InvalidSpec("restart vector must dominate the fixed point".into()));
    }
    tuner.cache.lock().expect("cache lock").clear();
    let again = tuner.run_from(start.clone())?;
    let max_difference =
        again.fixed_point.iter().zip(&report.fixed_point).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(RestartProbe { start, fixed_point: again.fixed_point, max_difference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::BoundaryKind;
    use crate::grid::{Excision, Grid};
    use crate::models::{build_model, build_model_with_kinds, ModelSpec};

    fn box_grid() -> Grid {
        Grid::torus(1.0, 2.0, 16, 12, 12).with_excision(Excision { lo: [6, 3, 3], hi: [10, 7, 7] })
    }

    fn fast() -> TunerParams {
        TunerParams { value_tol: 1e-4, ..TunerParams::default() }
    }

    #[test]
    fn two_boundary_domain_needs_no_tuning() {
        let data = build_model(&ModelSpec::kottler(), &Grid::radial(1.0, 2.0, 20)).unwrap();
        let report = tune_boundary_constants(&data, SolverParams::default(), fast()).unwrap();
        assert!(report.fixed_point.is_empty() && report.iterates.len() == 1);
        assert!(report.solution.is_some());
    }

    #[test]
    fn hopf_signs_at_the_bracket_ends() {
        let data = build_model(&ModelSpec::kottler(), &box_grid()).unwrap();
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let at_one = phi_map(&solver, &[1.0]).unwrap();
        let at_zero = phi_map(&solver, &[0.0]).unwrap();
        assert!(at_one[0].min() > 0.0 && at_zero[0].min() < 0.0);
    }

    #[test]
    fn extremal_derivative_increases_with_the_constant() {
        let data = build_model(&ModelSpec::kottler(), &box_grid()).unwrap();
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let mins: Vec<f64> = [0.2, 0.4, 0.6].iter().map(|&c| phi_map(&solver, &[c]).unwrap()[0].min()).collect();
        assert!(mins[0] < mins[1] && mins[1] < mins[2], "{mins:?}");
    }

    #[test]
    fn kottler_box_fixed_point() {
        let data = build_model(&ModelSpec::kottler(), &box_grid()).unwrap();
        let report = tune_boundary_constants(&data, SolverParams::default(), fast()).unwrap();
        let a = report.fixed_point[0];
        assert!(a > 0.0 && a < 1.0, "{a}");
        for w in report.iterates.windows(2) {
            assert!(w[1][0] <= w[0][0] + report.value_tol);
        }
        assert!(report.extremal_normal_derivatives[0].abs() <= 5.0 * data.grid.h());
    }

    #[test]
    fn bisection_bracket_halves_each_step() {
        let data = build_model(&ModelSpec::kottler(), &box_grid()).unwrap();
        let params = TunerParams { value_tol: 1.0 / 64.0, ..TunerParams::default() };
        let tuner = Tuner::new(&data, SolverParams::default(), params).unwrap();
        let (_, count) = tuner.optimal_value(0, &[1.0]).unwrap();
        assert!(count <= 6);
    }

    #[test]
    fn reflection_maps_value_to_one_minus_value() {
        // A flat slab with k = 0 is symmetric under r ↦ 3 − r. Reflecting the
        // domain and swapping the anchors sends u to 1 − u, which turns the
        // min condition on a plus box into the max condition on a minus box.
        use crate::data::InitialDataSet;
        use crate::tensor::Sym3;
        let solve_for = |lo_r: usize, hi_r: usize, kind: BoundaryKind| {
            let grid = Grid::torus(1.0, 2.0, 17, 12, 12).with_excision(Excision { lo: [lo_r, 3, 3], hi: [hi_r, 7, 7] });
            let n = grid.len();
            let comps = InitialDataSet::default_components(&grid, &[kind]);
            let data = InitialDataSet::new(grid, vec![Sym3::IDENTITY; n], vec![Sym3::ZERO; n], comps).unwrap();
            let tuner = Tuner::new(&data, SolverParams::default(), fast()).unwrap();
            tuner.optimal_value(0, &[1.0]).unwrap().0
        };
        let t = solve_for(4, 8, BoundaryKind::OuterPlus);
        let mirrored = solve_for(8, 12, BoundaryKind::InnerMinus);
        assert!((t + mirrored - 1.0).abs() < 3e-4, "{t} + {mirrored}");
        assert!((t - 0.5).abs() > 0.01);
    }

    #[test]
    fn restart_from_dominating_vector_reconverges() {
        let grid = Grid::torus(1.0, 2.0, 16, 16, 16)
            .with_excision(Excision { lo: [4, 2, 2], hi: [7, 5, 5] })
            .with_excision(Excision { lo: [9, 9, 9], hi: [12, 12, 12] });
        let data = build_model_with_kinds(
            &ModelSpec::perturbed_kottler(0.3, 3.0, [1, 0]),
            &grid,
            &[BoundaryKind::OuterPlus, BoundaryKind::OuterPlus],
        )
        .unwrap();
        let tuner = Tuner::new(&data, SolverParams::default(), fast()).unwrap();
        let report = tuner.run_from(vec![1.0, 1.0]).unwrap();
        assert!(report.fixed_point.iter().all(|a| *a > 0.0 && *a < 1.0));
        assert!(report.iterates.len() > 2, "two boxes should interact");
        for w in report.iterates.windows(2) {
            assert!(w[1].iter().zip(&w[0]).all(|(n, o)| *n <= o + report.value_tol));
        }
        let start: Vec<f64> = report.fixed_point.iter().map(|v| (v + 0.2).min(1.0)).collect();
        let probe = restart_probe(&tuner, &report, start).unwrap();
        assert!(probe.max_difference <= 10.0 * report.value_tol, "{probe:?}");
    }

    #[test]
    fn order_of_constants_is_preserved() {
        let data = build_model(&ModelSpec::kottler(), &box_grid()).unwrap();
        let solver = Solver::new(&data, SolverParams::default()).unwrap();
        let lo = solver.solve(&boundary_values(&data, &[0.3]), None).unwrap();
        let hi = solver.solve(&boundary_values(&data, &[0.7]), None).unwrap();
        assert!(lo.u.iter().zip(&hi.u).all(|(a, b)| *a <= b + 1e-12));
    }

    #[test]
    fn optimal_value_map_is_monotone() {
        let grid = Grid::torus(1.0, 2.0, 16, 16, 16)
            .with_excision(Excision { lo: [4, 2, 2], hi: [7, 5, 5] })
            .with_excision(Excision { lo: [9, 9, 9], hi: [12, 12, 12] });
        let data = build_model(&ModelSpec::kottler(), &grid).unwrap();
        let tuner = Tuner::new(&data, SolverParams::default(), fast()).unwrap();
        let (low, _) = tuner.optimal_value(0, &[0.0, 0.2]).unwrap();
        let (high, _) = tuner.optimal_value(0, &[0.0, 0.8]).unwrap();
        assert!(low <= high + tuner.params.value_tol, "{low} > {high}");
    }
}
