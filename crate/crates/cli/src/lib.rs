//! Scenario runner for the `macsim` command: presets, seed sweeps, result
//! files.

pub mod demos;
pub mod output;
pub mod presets;
pub mod runner;
pub mod scenario;
pub mod spec;

use std::path::Path;

use anyhow::{anyhow, Result};
use macsim_core::checkers::CheckReport;

use demos::DemoOutcome;
use runner::{RunRecord, RunRow};
use scenario::{Experiment, Scenario};

/// Everything one scenario produced.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    /// Simulate experiments: one record per (cell, seed).
    pub records: Vec<RunRecord>,
    /// Fixed constructions.
    pub demo: Option<DemoOutcome>,
}

impl ScenarioResult {
    pub fn rows(&self) -> Vec<&RunRow> {
        match &self.demo {
            Some(d) => d.rows.iter().collect(),
            None => self.records.iter().map(|r| &r.row).collect(),
        }
    }

    /// Check report per row, where one exists.
    pub fn row_reports(&self) -> Vec<Option<&CheckReport>> {
        match &self.demo {
            Some(d) => vec![None; d.rows.len()],
            None => self.records.iter().map(|r| Some(&r.report)).collect(),
        }
    }

    /// For constructions, only the construction's own checks count: an
    /// agreement violation on the partitioned network is the expected
    /// outcome and shows up there as a passing check.
    pub fn any_failed(&self) -> bool {
        match &self.demo {
            Some(d) => d.report.any_failed(),
            None => self.records.iter().any(|r| r.report.any_failed()),
        }
    }
}

/// Resolves `--scenario`: a preset name, else a file path.
pub fn load_scenario(name_or_path: &str) -> Result<Scenario> {
    if let Some(p) = presets::find(name_or_path) {
        return Ok(p.scenario());
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        let names: Vec<_> = presets::PRESETS.iter().map(|p| p.name).collect();
        return Err(anyhow!(
            "{name_or_path:?} is neither a preset ({}) nor an existing file",
            names.join(", ")
        ));
    }
    Scenario::load(path)
}

/// Runs a scenario with `threads` workers for seed sweeps.
pub fn run_scenario(scenario: &Scenario, threads: usize, keep_traces: bool) -> Result<ScenarioResult> {
    scenario.validate()?;
    let (records, demo) = match &scenario.experiment {
        Experiment::Simulate { runs } => (runner::run_matrix(scenario, runs, threads, keep_traces)?, None),
        Experiment::GadgetPartition { diameter, n } => (Vec::new(), Some(demos::gadget_partition(*diameter, *n)?)),
        Experiment::KdPartition { diameter } => (Vec::new(), Some(demos::kd_partition(*diameter)?)),
        Experiment::CausalBound { diameters, f_ack } => (Vec::new(), Some(demos::causal_bound(diameters, *f_ack)?)),
        Experiment::Explore(spec) => (Vec::new(), Some(demos::explore(spec)?)),
    };
    let mut demo = demo;
    if let Some(d) = &mut demo {
        for r in &mut d.rows {
            r.scenario = scenario.name.clone();
        }
    }
    Ok(ScenarioResult {
        scenario: scenario.clone(),
        records,
        demo,
    })
}
