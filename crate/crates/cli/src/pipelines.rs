//! One function per subcommand. Each fills a [`RunReport`] and writes its
//! side files into the output directory.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;
use shf_core::geometry::{compute_constraints, ConstraintFields};
use shf_core::grid::NodeKind;
use shf_core::levelset::{LevelField, LevelPiece};
use shf_core::solver::{Solver, SpacetimeHarmonicSolution};
use shf_core::tuner::{restart_probe, tunable_components, Tuner};
use shf_core::verify::audit::ppwave_audit;
use shf_core::verify::energy::{mass_aspect_of, truncation_value};
use shf_core::verify::{
    asymptotic_solution, build_barriers, check_bracketing, energy_from_flux, energy_lower_bound, penrose_bound,
    rigidity_diagnostics, verify_identity, EnergyEstimate, VerifyParams,
};
use shf_core::{InitialDataSet, ModelKind};

use crate::config::{Pipeline, ScenarioConfig};
use crate::error::{CliError, CliResult};
use crate::output::{self, FLUX_CSV, ITERATES_CSV, PROFILE_CSV, REFINE_CSV};
use crate::refine::{exact_solution, refinement_study};
use crate::report::{Check, RunReport, Timing};

pub const REPORT_JSON: &str = "report.json";
pub const TIMING_JSON: &str = "timing.json";
pub const BARRIERS_CSV: &str = "barriers.csv";

/// Pixels per side of the coordinate tori exported for radial level sets.
const RADIAL_MESH_RESOLUTION: usize = 16;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    /// `None` lets rayon pick; `Some(1)` gives bitwise reproducible output.
    pub threads: Option<usize>,
    pub tolerance_scale: Option<f64>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub out_dir: PathBuf,
    pub timing: Timing,
}

struct Ctx<'c> {
    config: &'c ScenarioConfig,
    out: PathBuf,
    scale: f64,
    report: RunReport,
    timing: Timing,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn wrote(&mut self, name: &str) {
        self.report.files.push(name.to_string());
    }

    fn h(&self) -> f64 {
        self.report.grid.h
    }

    /// Profile CSV and requested meshes for a solution.
    fn solution_files(&mut self, solver: &Solver<'_>, u: &[f64], constraints: &ConstraintFields) -> CliResult<()> {
        if self.config.output.profiles {
            output::write_profile(&self.path(PROFILE_CSV), solver, u, constraints)?;
            self.wrote(PROFILE_CSV);
        }
        let field = LevelField::new(solver, u);
        for (k, &t) in self.config.output.mesh_levels.clone().iter().enumerate() {
            let surface = match field.extract(t) {
                Ok(s) => s,
                Err(e) => {
                    warn!("skipping mesh export of level {t}: {e}");
                    continue;
                }
            };
            let periods = solver.data.grid.periods;
            let meshes: Vec<_> = surface
                .pieces
                .iter()
                .map(|p| match p {
                    LevelPiece::CoordinateTorus { r } => output::coordinate_torus_mesh(*r, periods, RADIAL_MESH_RESOLUTION),
                    LevelPiece::Mesh(m) => m.clone(),
                })
                .collect();
            let name = format!("level_{k:02}.mesh");
            let path = self.path(&name);
            let mut w = BufWriter::new(File::create(&path).map_err(|e| CliError::io(&path, e))?);
            output::write_mesh(&mut w, &meshes.iter().collect::<Vec<_>>()).map_err(|e| CliError::io(&path, e))?;
            self.wrote(&name);
        }
        Ok(())
    }
}

/// Runs `pipeline` on `config` inside a pool of the requested size.
pub fn run_scenario(pipeline: Pipeline, config: &ScenarioConfig, opts: &RunOptions) -> CliResult<RunOutcome> {
    config.validate(pipeline)?;
    if let Some(x) = opts.tolerance_scale {
        if !(x > 0.0 && x.is_finite()) {
            return Err(CliError::config("--tolerance-scale", "must be positive"));
        }
    }
    if opts.threads == Some(0) {
        return Err(CliError::config("--threads", "must be positive"));
    }
    let out = opts
        .out
        .clone()
        .or_else(|| config.output.directory.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config("--threads", e.to_string()))?;
    let threads = pool.current_num_threads();
    let scale = opts.tolerance_scale.unwrap_or(config.verify.tolerance_scale);
    let mut ctx = Ctx {
        config,
        out: out.clone(),
        scale,
        report: RunReport::new(pipeline, config, scale),
        timing: Timing::start(pipeline, threads),
    };
    pool.install(|| dispatch(pipeline, &mut ctx))?;
    if config.output.plot_script {
        if let Some(name) = output::write_plot_script(&out)? {
            ctx.wrote(&name);
        }
    }
    ctx.report.files.sort();
    ctx.report.write(&out.join(REPORT_JSON))?;
    ctx.timing.finish();
    crate::report::write_json(&out.join(TIMING_JSON), &ctx.timing)?;
    Ok(RunOutcome { report: ctx.report, out_dir: out, timing: ctx.timing })
}

fn dispatch(pipeline: Pipeline, ctx: &mut Ctx<'_>) -> CliResult<()> {
    match pipeline {
        Pipeline::Solve => solve(ctx),
        Pipeline::Tune => tune(ctx),
        Pipeline::VerifyIdentity => verify(ctx),
        Pipeline::Energy => energy(ctx),
        Pipeline::Penrose => penrose(ctx),
        Pipeline::Barriers => barriers(ctx),
        Pipeline::Rigidity => rigidity(ctx),
        Pipeline::PpwaveAudit => audit(ctx),
        Pipeline::Refine => refine(ctx),
    }
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    boundary_values: &'a BTreeMap<usize, f64>,
    residual_norm: f64,
    picard_iters: usize,
    linear_iters: usize,
    picard_history: &'a [f64],
    spacetime_hessian_max: f64,
}

fn hessian_max(solver: &Solver<'_>, u: &[f64]) -> f64 {
    let hess = solver.spacetime_hessian(u);
    (0..u.len())
        .filter(|&n| solver.lattice.kinds[n] == NodeKind::Interior)
        .map(|n| hess[n].norm_sq(&solver.pgs[n].ginv).sqrt())
        .fold(0.0, f64::max)
}

fn record_solution(ctx: &mut Ctx<'_>, solver: &Solver<'_>, sol: &SpacetimeHarmonicSolution) -> CliResult<f64> {
    let spacetime_hessian_max = hessian_max(solver, &sol.u);
    ctx.report.record(
        "solution",
        SolveSummary {
            boundary_values: &sol.boundary_values,
            residual_norm: sol.residual_norm,
            picard_iters: sol.picard_iters,
            linear_iters: sol.linear_iters,
            picard_history: &sol.picard_history,
            spacetime_hessian_max,
        },
    )?;
    Ok(spacetime_hessian_max)
}

fn solve(ctx: &mut Ctx<'_>) -> CliResult<()> {
    let config = ctx.config;
    let data = config.data()?;
    let solver = Solver::new(&data, config.solver)?;
    ctx.timing.mark("setup");
    let defaulted = config.solve.values.is_none();
    let values: BTreeMap<usize, f64> = match &config.solve.values {
        Some(v) => v.iter().copied().enumerate().collect(),
        None => BTreeMap::from([(0, 0.0), (1, truncation_value(&data)?)]),
    };
    let sol = solver.solve(&values, None)?;
    ctx.timing.mark("solve");
    let hess = record_solution(ctx, &solver, &sol)?;
    let grid = &data.grid;
    // Known answers: u − u(r_min) is the closed form and its spacetime Hessian vanishes.
    let spec = config.model.spec();
    if let (true, Some(exact)) = (defaulted && grid.excisions.is_empty(), exact_solution(&spec, grid.r_min)) {
        // The equation is 1-homogeneous, so the closed form rescales to the outer value.
        let span = values[&1];
        let k = span / exact(grid.r_max).0;
        let err = (0..grid.len())
            .map(|n| (sol.u[n] - k * exact(grid.r(grid.unindex(n)[0])).0).abs())
            .fold(0.0, f64::max);
        let h = grid.h();
        let tol = match spec.kind {
            ModelKind::Kottler => 1e-6,
            _ => 10.0 * h * h * (1.0 + span),
        } * ctx.scale;
        ctx.report.check(Check::at_most("exact_solution_error", err, tol));
        ctx.report.check(Check::at_most("spacetime_hessian_max", hess, tol));
    }
    let constraints = compute_constraints(&data)?;
    ctx.solution_files(&solver, &sol.u, &constraints)?;
    ctx.timing.mark("output");
    Ok(())
}

fn tune(ctx: &mut Ctx<'_>) -> CliResult<()> {
    let config = ctx.config;
    let data = config.data()?;
    let tuner = Tuner::new(&data, config.solver, config.tuner)?;
    ctx.timing.mark("setup");
    let components = tunable_components(&data);
    let rep = tuner.run_from(vec![1.0; components.len()])?;
    ctx.timing.mark("fixed point");
    let h = ctx.h();
    let increase = rep
        .iterates
        .windows(2)
        .flat_map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect::<Vec<_>>())
        .fold(f64::NEG_INFINITY, f64::max);
    ctx.report.check(Check::at_most("iterates_non_increasing", increase, rep.value_tol * ctx.scale));
    for (c, d) in components.iter().zip(&rep.extremal_normal_derivatives) {
        ctx.report.check(Check::at_most(format!("min_normal_derivative_{c}"), d.abs(), 5.0 * h * ctx.scale));
    }
    let start: Vec<f64> = rep.fixed_point.iter().map(|a| a + config.restart.offset).collect();
    let probe = restart_probe(&tuner, &rep, start)?;
    ctx.timing.mark("restart");
    ctx.report.check(Check::at_most("restart_agreement", probe.max_difference, 10.0 * rep.value_tol * ctx.scale));
    ctx.report.record("tuner", &rep)?;
    ctx.report.record("restart", &probe)?;
    output::write_iterates(&ctx.path(ITERATES_CSV), &components, &rep.iterates)?;
    ctx.wrote(ITERATES_CSV);
    if let Some(sol) = &rep.solution {
        record_solution(ctx, &tuner.solver, sol)?;
        let constraints = compute_constraints(&data)?;
        ctx.solution_files(&tuner.solver, &sol.u, &constraints)?;
    }
    ctx.timing.mark("output");
    Ok(())
}

/// Solver, asymptotically normalized solution and constraint fields.
fn prepare<'d>(
    ctx: &mut Ctx<'_>,
    data: &'d InitialDataSet,
) -> CliResult<(Solver<'d>, SpacetimeHarmonicSolution, ConstraintFields)> {
    let solver = Solver::new(data, ctx.config.solver)?;
    let (sol, scale) = asymptotic_solution(&solver, &ctx.config.tuner)?;
    ctx.report.record("solution_scale", scale)?;
    let constraints = compute_constraints(data)?;
    ctx.timing.mark("solve");
    Ok((solver, sol, constraints))
}

fn verify(ctx: &mut Ctx<'_>) -> CliResult<()> {
    let data = ctx.config.data()?;
    let (solver, sol, constraints) = prepare(ctx, &data)?;
    let params = VerifyParams { tolerance_scale: ctx.scale, ..ctx.config.verify };
    let rep = verify_identity(&solver, &sol, &constraints, &params)?;
    ctx.timing.mark("identity");
    // The inequality holds when rhs − lhs ≥ −tolerance.
    ctx.report.check(Check::at_least("identity_margin", rep.margin, -rep.tolerance));
    ctx.report.record("identity", &rep)?;
    record_solution(ctx, &solver, &sol)?;
    ctx.solution_files(&solver, &sol.u, &constraints)?;
    ctx.timing.mark("output");
    Ok(())
}

fn energy(ctx: &mut Ctx<'_>) -> CliResult<()> {
    let config = ctx.config;
    let data = config.data()?;
    let e_mass_aspect = mass_aspect_of(&data);
    let flux = energy_from_flux(&data, &config.energy.radii, config.solver, &config.tuner)?;
    ctx.timing.mark("flux");
    let (solver, sol, constraints) = prepare(ctx, &data)?;
    let lower = energy_lower_bound(&solver, &sol.u, &constraints);
    let penrose = penrose_bound(&solver, &sol)?;
    let estimate = EnergyEstimate {
        torus_area: data.grid.torus_area(),
        e_mass_aspect,
        flux: Some(flux.clone()),
        lower_bound_rhs: Some(lower),
        penrose: Some(penrose),
    };
    let h = ctx.h();
    if let Some(e) = estimate.best() {
        let tol = 10.0 * h * h * (1.0 + lower.abs()) * ctx.scale;
        ctx.report.check(Check::at_least("energy_minus_lower_bound", e - lower, -tol));
    }
    if let Some(e) = e_mass_aspect {
        let tol = (0.05 * e.abs()).max(1e-3) * ctx.scale;
        ctx.report.check(Check::at_most("flux_vs_mass_aspect", (flux.extrapolated - e).abs(), tol));
        let errors: Vec<f64> = flux.samples.iter().map(|s| (s.flux - e).abs()).collect();
        if errors.len() >= 2 && errors.iter().any(|x| *x > 1e-8) {
            let worst = errors.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
            ctx.report.check(Check::at_most("flux_error_ratio", worst, 1.0));
        }
    }
    ctx.report.record("energy", &estimate)?;
    output::write_flux(&ctx.path(FLUX_CSV), &flux)?;
    ctx.wrote(FLUX_CSV);
    ctx.solution_files(&solver, &sol.u, &constraints)?;
    ctx.timing.mark("output");
    Ok(())
}

fn penrose(ctx: &mut Ctx<'_>) -> CliResult<()> {
    let config = ctx.config;
    let data = config.data()?;
    let (solver, sol, constraints) = prepare(ctx, &data)?;
    let bound = penrose_bound(&solver, &sol)?;
    let energy = match mass_aspect_of(&data) {
        Some(e) => Some(e),
        None if !config.energy.radii.is_empty() => {
            Some(energy_from_flux(&data, &config.energy.radii, config.solver, &config.tuner)?.extrapolated)
        }
        None => None,
    };
    ctx.timing.mark("bound");
    if let (true, Some(e)) = (bound.applicable, energy) {
        let h = ctx.h();
        let tol = 10.0 * h * h * (1.0 + bound.bound.abs()) * ctx.scale;
        ctx.report.check(Check::at_least("energy_minus_penrose_bound", e - bound.bound, -tol));
    } else if let Some(reason) = &bound.reason {
        info!("Penrose bound does not apply: {reason}");
    }
    ctx.report.record("energy", energy)?;
    ctx.report.record("penrose", &bound)?;
    ctx.solution_files(&solver, &sol.u, &constraints)?;
    ctx.timing.mark("output");
    Ok(())
}

#[derive(Serialize)]
struct BarrierSummary<'a> {
    lambda: f64,
    varsigma: f64,
    c0: f64,
    c1: f64,
    r0: f64,
    r1: f64,
    gluing_inner: f64,
    gluing_outer: f64,
    lower_gluing: f64,
    plus_signs: &'a shf_core::verify::barrier::SignCheck,
    minus_signs: &'a shf_core::verify::barrier::SignCheck,
    outer_value: f64,
}

fn barriers(ctx: &mut Ctx<'_>) -> CliResult<()> {
    let config = ctx.config;
    let data = config.data()?;
    let pair = build_barriers(&data, config.solver, &config.barriers)?;
    ctx.timing.mark("barriers");
    let (_solver, sol, _) = prepare(ctx, &data)?;
    let floor = 1.0 - config.barriers.max_violation_fraction;
    ctx.report.check(Check::at_least("upper_barrier_sign_fraction", pair.plus_signs.fraction_correct(), floor));
    ctx.report.check(Check::at_least("lower_barrier_sign_fraction", pair.minus_signs.fraction_correct(), floor));
    let br = check_bracketing(&pair, &data.grid, &sol.u, 1e-4 * ctx.scale);
    ctx.report.check(Check::at_most("bracketing_excess", br.max_above.max(br.max_below), br.tolerance));
    ctx.report.record(
        "barriers",
        BarrierSummary {
            lambda: pair.lambda,
            varsigma: pair.varsigma,
            c0: pair.c0,
            c1: pair.c1,
            r0: pair.r0,
            r1: pair.r1,
            gluing_inner: pair.gluing_inner,
            gluing_outer: pair.gluing_outer,
            lower_gluing: pair.lower_gluing,
            plus_signs: &pair.plus_signs,
            minus_signs: &pair.minus_signs,
            outer_value: pair.outer_value,
        },
    )?;
    ctx.report.record("bracketing", br)?;
    // The barriers only depend on r, so one angular sample per radius suffices.
    let grid = &data.grid;
    let rows: Vec<usize> = (0..grid.n_r).map(|i| grid.index(i, 0, 0)).collect();
    let pick = |v: &[f64]| rows.iter().map(|&n| v[n]).collect::<Vec<f64>>();
    let r: Vec<f64> = (0..grid.n_r).map(|i| grid.r(i)).collect();
    let (u, zp, zm) = (pick(&sol.u), pick(&pair.z_plus), pick(&pair.z_minus));
    output::write_columns(&ctx.path(BARRIERS_CSV), &[("r", &r), ("u", &u), ("z_plus", &zp), ("z_minus", &zm)])?;
    ctx.wrote(BARRIERS_CSV);
    ctx.timing.mark("output");
    Ok(())
}

fn rigidity(ctx: &mut Ctx<'_>) -> CliResult<()> {
    let config = ctx.config;
    let data = config.data()?;
    let (solver, sol, constraints) = prepare(ctx, &data)?;
    let rep = rigidity_diagnostics(&solver, &sol.u, &constraints, config.verify.n_levels)?;
    ctx.timing.mark("rigidity");
    let tol = rep.tolerance * ctx.scale;
    let rigid = rep.norms().iter().all(|(_, v)| *v <= tol);
    // Zero energy forces the equality case, so only then are the norms checked.
    let e = mass_aspect_of(&data);
    if e == Some(0.0) {
        for (name, v) in rep.norms() {
            ctx.report.check(Check::at_most(name, v, tol));
        }
    }
    ctx.report.record("rigid", rigid)?;
    ctx.report.record("energy", e)?;
    ctx.report.record("rigidity", &rep)?;
    ctx.solution_files(&solver, &sol.u, &constraints)?;
    ctx.timing.mark("output");
    Ok(())
}

fn audit(ctx: &mut Ctx<'_>) -> CliResult<()> {
    let config = ctx.config;
    let g = &config.grid;
    let a = ppwave_audit(config.model.r0, g.r_max, g.n_r, &config.audit.rhos)?;
    ctx.timing.mark("audit");
    let x = ctx.scale;
    ctx.report.check(Check::at_most("spacetime_hessian_max", a.hessian_max, 1e-8 * x));
    ctx.report.check(Check::at_most("mu_max", a.mu_max, 1e-8 * x));
    ctx.report.check(Check::at_most("j_max", a.j_max, 1e-8 * x));
    ctx.report.check(Check::at_most("mass_aspect_abs", a.mass_aspect.abs(), 0.0));
    ctx.report.check(Check::at_most("tr_m_error", (a.tr_m + 1.0 / 3.0).abs(), 1e-15));
    ctx.report.check(Check::at_most("tr_p_error", (a.tr_p + 0.5).abs(), 1e-15));
    for c in &a.rho_chart {
        ctx.report.check(Check::at_most(format!("rho_closed_form_gap_{}", c.rho), c.closed_form_gap, 1e-10 * x));
    }
    // o(ρ⁻³): the remainder times ρ³ must shrink along the sample radii.
    let s: Vec<f64> = a.rho_chart.iter().map(|c| c.scaled_remainder).collect();
    if s.len() >= 2 {
        let worst = s.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
        ctx.report.check(Check::at_most("rho_scaled_remainder_ratio", worst, 1.0));
    }
    if let Some(last) = s.last() {
        ctx.report.check(Check::at_most("rho_scaled_remainder_last", *last, 1e-3 * x));
    }
    ctx.report.record("audit", &a)?;
    Ok(())
}

fn refine(ctx: &mut Ctx<'_>) -> CliResult<()> {
    let config = ctx.config;
    let r = &config.refine;
    let studies = refinement_study(
        &config.model.spec(),
        config.grid.r_min,
        config.grid.r_max,
        r.base_n,
        r.grids,
        config.derivatives,
        config.solver,
    )?;
    ctx.timing.mark("study");
    for s in &studies {
        if let Some(p) = s.min_order {
            ctx.report.check(Check::at_least(format!("order_{}", s.quantity), p, r.min_order));
        }
    }
    let rows: Vec<_> = studies.iter().flat_map(|s| s.rows()).collect();
    output::write_refine(&ctx.path(REFINE_CSV), &rows)?;
    ctx.wrote(REFINE_CSV);
    ctx.report.record("refine", &studies)?;
    Ok(())
}

/// Loads a scenario from disk and runs it.
pub fn run_file(pipeline: Pipeline, config: &Path, opts: &RunOptions) -> CliResult<RunOutcome> {
    let config = ScenarioConfig::load(config)?;
    run_scenario(pipeline, &config, opts)
}
