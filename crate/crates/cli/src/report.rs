//! The run report and its timing sidecar.
//!
//! `report.json` holds only deterministic content so that repeated runs on
//! one thread produce identical bytes; wall-clock times go to `timing.json`.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::config::{Pipeline, ScenarioConfig, SCHEMA_VERSION};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Pass when `value ≤ tolerance`.
    AtMost,
    /// Pass when `value ≥ tolerance`.
    AtLeast,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub relation: Relation,
    /// Distance to the threshold, positive when passing.
    pub margin: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        let margin = tolerance - value;
        Check { name: name.into(), value, tolerance, relation: Relation::AtMost, margin, pass: margin >= 0.0 }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        let margin = value - tolerance;
        Check { name: name.into(), value, tolerance, relation: Relation::AtLeast, margin, pass: margin >= 0.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridMeta {
    pub backend: shf_core::Backend,
    pub dims: [usize; 3],
    pub h: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub pipeline: &'static str,
    pub config: ScenarioConfig,
    pub tolerance_scale: f64,
    pub grid: GridMeta,
    pub checks: Vec<Check>,
    pub results: BTreeMap<String, Value>,
    /// Files written next to the report, relative to the output directory.
    pub files: Vec<String>,
}

impl RunReport {
    pub fn new(pipeline: Pipeline, config: &ScenarioConfig, tolerance_scale: f64) -> Self {
        let grid = config.grid();
        RunReport {
            schema_version: SCHEMA_VERSION,
            pipeline: pipeline.name(),
            config: config.clone(),
            tolerance_scale,
            grid: GridMeta { backend: grid.backend, dims: grid.dims(), h: grid.h(), nodes: grid.len() },
            checks: Vec::new(),
            results: BTreeMap::new(),
            files: Vec::new(),
        }
    }

    pub fn record(&mut self, key: &str, value: impl Serialize) -> CliResult<()> {
        self.results.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_json(path, self)
    }
}

/// Wall-clock stages of one run.
#[derive(Debug, Serialize)]
pub struct Timing {
    pub pipeline: &'static str,
    pub threads: usize,
    pub stages: Vec<(String, f64)>,
    pub total_seconds: f64,
    #[serde(skip)]
    start: Option<Instant>,
    #[serde(skip)]
    last: Option<Instant>,
}

impl Timing {
    pub fn start(pipeline: Pipeline, threads: usize) -> Self {
        let now = Instant::now();
        Timing {
            pipeline: pipeline.name(),
            threads,
            stages: Vec::new(),
            total_seconds: 0.0,
            start: Some(now),
            last: Some(now),
        }
    }

    /// Close the stage that began at the previous mark.
    pub fn mark(&mut self, stage: &str) {
        let now = Instant::now();
        if let Some(last) = self.last {
            self.stages.push((stage.to_string(), (now - last).as_secs_f64()));
        }
        self.last = Some(now);
    }

    pub fn finish(&mut self) {
        if let Some(s) = self.start {
            self.total_seconds = s.elapsed().as_secs_f64();
        }
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn margin_sign_matches_pass(value in -1e3f64..1e3, tol in -1e3f64..1e3) {
            for c in [Check::at_most("a", value, tol), Check::at_least("b", value, tol)] {
                prop_assert_eq!(c.pass, c.margin >= 0.0);
            }
            prop_assert_eq!(Check::at_most("a", value, tol).margin, -Check::at_least("b", value, tol).margin);
        }
    }
}
