//! Scenario files.
//!
//! A scenario is one TOML file. Unknown keys are rejected everywhere and
//! every error carries the dotted path of the field that caused it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shf_core::models::{build_model_with_kinds, Perturbation, Warp};
use shf_core::solver::SolverParams;
use shf_core::tuner::TunerParams;
use shf_core::verify::{BarrierParams, VerifyParams};
use shf_core::{Backend, BoundaryKind, DerivativeMode, Grid, InitialDataSet, ModelKind, ModelSpec};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Solve,
    Tune,
    VerifyIdentity,
    Energy,
    Penrose,
    Barriers,
    Rigidity,
    PpwaveAudit,
    Refine,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Solve => "solve",
            Pipeline::Tune => "tune",
            Pipeline::VerifyIdentity => "verify-identity",
            Pipeline::Energy => "energy",
            Pipeline::Penrose => "penrose",
            Pipeline::Barriers => "barriers",
            Pipeline::Rigidity => "rigidity",
            Pipeline::PpwaveAudit => "ppwave-audit",
            Pipeline::Refine => "refine",
        }
    }
}

fn one() -> f64 {
    1.0
}

fn unit_periods() -> [f64; 2] {
    [1.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default = "one")]
    pub r0: f64,
    #[serde(default = "unit_periods")]
    pub periods: [f64; 2],
    #[serde(default)]
    pub warp: Option<Warp>,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
}

impl ModelConfig {
    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            kind: self.kind,
            r0: self.r0,
            periods: self.periods,
            warp: self.warp,
            perturbation: self.perturbation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub backend: Backend,
    pub r_min: f64,
    pub r_max: f64,
    pub n_r: usize,
    #[serde(default)]
    pub n_xi: Option<usize>,
    #[serde(default)]
    pub n_theta: Option<usize>,
}

fn outer_plus() -> BoundaryKind {
    BoundaryKind::OuterPlus
}

/// An excised box in coordinates; it snaps to the enclosing lattice nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub r: [f64; 2],
    pub xi: [f64; 2],
    pub theta: [f64; 2],
    #[serde(default = "outer_plus")]
    pub kind: BoundaryKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    /// Dirichlet constants by component id. Defaults to `0` inside and the
    /// truncation value outside when there are no boxes.
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RestartConfig {
    /// The restart vector is the fixed point plus this offset in every slot.
    pub offset: f64,
}

impl Default for RestartConfig {
    fn default() -> Self {
        RestartConfig { offset: 0.5 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    /// Truncation radii for the flux estimator, increasing.
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    pub rhos: Vec<f64>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig { rhos: vec![10.0, 20.0, 40.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineConfig {
    /// Radial node count of the coarsest grid; each refinement halves `h`.
    pub base_n: usize,
    pub grids: usize,
    pub min_order: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig { base_n: 41, grids: 4, min_order: 1.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    pub profiles: bool,
    pub plot_script: bool,
    /// Levels `u = t` to export as triangle meshes.
    pub mesh_levels: Vec<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: None, profiles: true, plot_script: true, mesh_levels: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    /// Pins the scenario to one pipeline when set.
    #[serde(default)]
    pub pipeline: Option<Pipeline>,
    pub model: ModelConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub boxes: Vec<BoxConfig>,
    #[serde(default)]
    pub derivatives: DerivativeMode,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub tuner: TunerParams,
    #[serde(default)]
    pub restart: RestartConfig,
    #[serde(default)]
    pub verify: VerifyParams,
    #[serde(default)]
    pub energy: EnergyConfig,
    #[serde(default)]
    pub barriers: BarrierParams,
    #[serde(default)]
    pub audit: AuditConfig,
    #[serde(default)]
    pub refine: RefineConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::config("<document>", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config("--config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn grid(&self) -> Grid {
        let g = &self.grid;
        let mut grid = match g.backend {
            Backend::Radial1D => Grid::radial(g.r_min, g.r_max, g.n_r),
            Backend::Torus3D => Grid::torus(g.r_min, g.r_max, g.n_r, g.n_xi.unwrap_or(0), g.n_theta.unwrap_or(0)),
        }
        .with_periods(self.model.periods);
        if g.backend == Backend::Radial1D {
            grid.n_xi = g.n_xi.unwrap_or(1);
            grid.n_theta = g.n_theta.unwrap_or(1);
        }
        for b in &self.boxes {
            let ex = grid.excision_from_coords(b.r, b.xi, b.theta);
            grid = grid.with_excision(ex);
        }
        grid
    }

    pub fn box_kinds(&self) -> Vec<BoundaryKind> {
        self.boxes.iter().map(|b| b.kind).collect()
    }

    /// Sampled data with the configured derivative mode.
    pub fn data(&self) -> CliResult<InitialDataSet> {
        let data = build_model_with_kinds(&self.model.spec(), &self.grid(), &self.box_kinds())
            .map_err(|e| CliError::config("model", e.to_string()))?;
        Ok(data.with_derivative_mode(self.derivatives))
    }

    pub fn n_components(&self) -> usize {
        2 + self.boxes.len()
    }

    /// Checks that do not need sampled data, plus the ones `pipeline` needs.
    pub fn validate(&self, pipeline: Pipeline) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", self.schema_version),
            ));
        }
        if let Some(p) = self.pipeline {
            if p != pipeline {
                return Err(CliError::config("pipeline", format!("scenario is for `{}`, not `{}`", p.name(), pipeline.name())));
            }
        }
        self.model.spec().validate().map_err(|e| CliError::config("model", e.to_string()))?;
        if self.grid.backend == Backend::Torus3D && (self.grid.n_xi.is_none() || self.grid.n_theta.is_none()) {
            return Err(CliError::config("grid", "the torus backend needs n_xi and n_theta"));
        }
        for (b, bx) in self.boxes.iter().enumerate() {
            for (name, range) in [("r", bx.r), ("xi", bx.xi), ("theta", bx.theta)] {
                if !(range[0] < range[1]) {
                    return Err(CliError::config(format!("boxes[{b}].{name}"), "range must be increasing"));
                }
            }
            if bx.kind == BoundaryKind::AsymptoticTorus {
                return Err(CliError::config(format!("boxes[{b}].kind"), "a box cannot be an asymptotic torus"));
            }
        }
        self.grid().validate().map_err(|e| CliError::config("grid", e.to_string()))?;
        self.solver.validate().map_err(|e| CliError::config("solver", e.to_string()))?;
        if self.verify.n_levels == 0 {
            return Err(CliError::config("verify.n_levels", "must be positive"));
        }
        if let Some(values) = &self.solve.values {
            if values.len() != self.n_components() {
                return Err(CliError::config(
                    "solve.values",
                    format!("{} values for {} boundary components", values.len(), self.n_components()),
                ));
            }
        }
        match pipeline {
            Pipeline::Solve if !self.boxes.is_empty() && self.solve.values.is_none() => {
                return Err(CliError::config("solve.values", "required when boxes are present"));
            }
            Pipeline::Tune if self.boxes.is_empty() => {
                return Err(CliError::config("boxes", "the tuner needs at least one box"));
            }
            Pipeline::Tune if !(self.restart.offset >= 0.0) => {
                return Err(CliError::config("restart.offset", "must be nonnegative"));
            }
            Pipeline::Energy => {
                let r = &self.energy.radii;
                if r.is_empty() {
                    return Err(CliError::config("energy.radii", "required for the energy pipeline"));
                }
                if r.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(CliError::config("energy.radii", "must be increasing"));
                }
                if r[0] <= self.grid.r_min || r[r.len() - 1] > self.grid.r_max {
                    return Err(CliError::config("energy.radii", "must lie in (r_min, r_max]"));
                }
            }
            Pipeline::Barriers => {
                let r1 = self.barriers.r1.unwrap_or(self.barriers.r0);
                for (name, r) in [("barriers.r0", self.barriers.r0), ("barriers.r1", r1)] {
                    if !(r > self.grid.r_min && r < self.grid.r_max) {
                        return Err(CliError::config(name, "matching radius must lie strictly inside the grid"));
                    }
                }
            }
            Pipeline::PpwaveAudit => {
                if self.model.kind != ModelKind::PpWave {
                    return Err(CliError::config("model.kind", "the audit runs on PpWave data"));
                }
                if self.audit.rhos.is_empty() {
                    return Err(CliError::config("audit.rhos", "at least one radius is needed"));
                }
            }
            Pipeline::Refine => {
                if self.grid.backend != Backend::Radial1D {
                    return Err(CliError::config("grid.backend", "the refinement study runs on Radial1D"));
                }
                if self.refine.grids < 3 {
                    return Err(CliError::config("refine.grids", "need at least three grids"));
                }
                if self.refine.base_n < 8 {
                    return Err(CliError::config("refine.base_n", "must be at least 8"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}
