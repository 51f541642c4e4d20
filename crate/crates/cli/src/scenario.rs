//! Scenario files: what to run, on which network, under which scheduler,
//! with which inputs and checks, over which seeds.
//!
//! Scenarios are TOML (or JSON) documents. A minimal one:
//!
//! ```toml
//! name = "small"
//! seeds = "0..10"
//!
//! [experiment]
//! kind = "simulate"
//!
//! [[experiment.runs]]
//! topology = "clique:n=5"
//! scheduler = "random:seed=0"
//! protocol = "twophase"
//! values = "random"
//! f_ack = 4
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use macsim_core::{SchedulerSpec, Time};
use serde::{Deserialize, Serialize};

use crate::spec::{ProtocolSpec, TopologySpec, ValueSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// Repetitions: each simulate cell runs once per seed.
    #[serde(default)]
    pub seeds: SeedRange,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExperimentTable", into = "ExperimentTable")]
pub enum Experiment {
    /// A matrix of independent runs, each repeated over the seed range.
    Simulate { runs: Vec<RunSpec> },
    /// Anonymous flooding on gadget network A under the bridge scheduler,
    /// compared with network B under the synchronous scheduler.
    GadgetPartition { diameter: usize, n: usize },
    /// Id-based flooding without knowledge of `n` on `K_D` under the
    /// semi-synchronous scheduler, compared with a free-standing line.
    KdPartition { diameter: usize },
    /// wPAXOS on lines under maximum delay: causal-history and decision
    /// time lower bounds.
    CausalBound { diameters: Vec<usize>, f_ack: Time },
    /// Valid-step exploration of two-phase consensus on a clique.
    Explore(ExploreSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ExperimentKind {
    Simulate,
    GadgetPartition,
    KdPartition,
    CausalBound,
    Explore,
}

/// Wire form of [`Experiment`]: a flat table keyed by `kind`. Flat fields
/// keep their source positions, so a bad value is reported at its own line.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentTable {
    kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    runs: Option<Vec<RunSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diameter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diameters: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_ack: Option<Time>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    crash_budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<ValueSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    protocol: Option<ProtocolSpec>,
}

impl ExperimentTable {
    fn empty(kind: ExperimentKind) -> Self {
        ExperimentTable {
            kind,
            runs: None,
            diameter: None,
            diameters: None,
            n: None,
            f_ack: None,
            crash_budget: None,
            depth: None,
            values: None,
            protocol: None,
        }
    }
}

impl TryFrom<ExperimentTable> for Experiment {
    type Error = String;

    fn try_from(t: ExperimentTable) -> std::result::Result<Self, String> {
        let kind = t.kind;
        let need = |v: Option<usize>, field: &str| v.ok_or_else(|| format!("{kind:?} experiment needs `{field}`"));
        let allowed: &[&str] = match kind {
            ExperimentKind::Simulate => &["runs"],
            ExperimentKind::GadgetPartition => &["diameter", "n"],
            ExperimentKind::KdPartition => &["diameter"],
            ExperimentKind::CausalBound => &["diameters", "f_ack"],
            ExperimentKind::Explore => &["n", "crash_budget", "depth", "values", "protocol"],
        };
        let present = [
            ("runs", t.runs.is_some()),
            ("diameter", t.diameter.is_some()),
            ("diameters", t.diameters.is_some()),
            ("n", t.n.is_some()),
            ("f_ack", t.f_ack.is_some()),
            ("crash_budget", t.crash_budget.is_some()),
            ("depth", t.depth.is_some()),
            ("values", t.values.is_some()),
            ("protocol", t.protocol.is_some()),
        ];
        if let Some((field, _)) = present.iter().find(|(f, p)| *p && !allowed.contains(f)) {
            return Err(format!("`{field}` does not apply to a {kind:?} experiment"));
        }
        Ok(match kind {
            ExperimentKind::Simulate => Experiment::Simulate {
                runs: t.runs.ok_or("simulate experiment needs `runs`")?,
            },
            ExperimentKind::GadgetPartition => Experiment::GadgetPartition {
                diameter: need(t.diameter, "diameter")?,
                n: need(t.n, "n")?,
            },
            ExperimentKind::KdPartition => Experiment::KdPartition {
                diameter: need(t.diameter, "diameter")?,
            },
            ExperimentKind::CausalBound => Experiment::CausalBound {
                diameters: t.diameters.ok_or("causal-bound experiment needs `diameters`")?,
                f_ack: t.f_ack.ok_or("causal-bound experiment needs `f_ack`")?,
            },
            ExperimentKind::Explore => Experiment::Explore(ExploreSpec {
                n: need(t.n, "n")?,
                crash_budget: t.crash_budget.unwrap_or(0),
                depth: t.depth.unwrap_or_else(default_depth),
                values: t.values,
                protocol: t.protocol.unwrap_or_else(ProtocolSpec::twophase),
            }),
        })
    }
}

impl From<Experiment> for ExperimentTable {
    fn from(e: Experiment) -> Self {
        match e {
            Experiment::Simulate { runs } => ExperimentTable {
                runs: Some(runs),
                ..ExperimentTable::empty(ExperimentKind::Simulate)
            },
            Experiment::GadgetPartition { diameter, n } => ExperimentTable {
                diameter: Some(diameter),
                n: Some(n),
                ..ExperimentTable::empty(ExperimentKind::GadgetPartition)
            },
            Experiment::KdPartition { diameter } => ExperimentTable {
                diameter: Some(diameter),
                ..ExperimentTable::empty(ExperimentKind::KdPartition)
            },
            Experiment::CausalBound { diameters, f_ack } => ExperimentTable {
                diameters: Some(diameters),
                f_ack: Some(f_ack),
                ..ExperimentTable::empty(ExperimentKind::CausalBound)
            },
            Experiment::Explore(x) => ExperimentTable {
                n: Some(x.n),
                crash_budget: Some(x.crash_budget),
                depth: Some(x.depth),
                values: x.values,
                protocol: Some(x.protocol),
                ..ExperimentTable::empty(ExperimentKind::Explore)
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExploreSpec {
    pub n: usize,
    pub crash_budget: usize,
    pub depth: usize,
    /// Omitted: every input vector in `{0,1}^n`.
    pub values: Option<ValueSpec>,
    pub protocol: ProtocolSpec,
}

fn default_depth() -> usize {
    64
}

/// One cell of a simulate matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub topology: TopologySpec,
    pub scheduler: SchedulerSpec,
    pub protocol: ProtocolSpec,
    #[serde(default = "default_values")]
    pub values: ValueSpec,
    #[serde(default = "default_fack")]
    pub f_ack: Time,
    /// wPAXOS's knowledge of `n`; defaults to the true size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_known: Option<usize>,
    /// Omitted: every check applicable to the protocol.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<CheckKind>>,
    /// Termination must happen by this time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<Time>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<Time>,
    /// Keep running after every node has decided, until nothing is pending.
    #[serde(default)]
    pub quiescent: bool,
}

fn default_values() -> ValueSpec {
    ValueSpec::Alternate
}

fn default_fack() -> Time {
    1
}

impl RunSpec {
    pub fn new(topology: TopologySpec, scheduler: SchedulerSpec, protocol: ProtocolSpec) -> Self {
        RunSpec {
            topology,
            scheduler,
            protocol,
            values: default_values(),
            f_ack: default_fack(),
            n_known: None,
            checks: None,
            deadline: None,
            horizon: None,
            quiescent: false,
        }
    }

    pub fn values(mut self, values: ValueSpec) -> Self {
        self.values = values;
        self
    }

    pub fn f_ack(mut self, f_ack: Time) -> Self {
        self.f_ack = f_ack;
        self
    }

    pub fn quiescent(mut self) -> Self {
        self.quiescent = true;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Agreement,
    Validity,
    Termination,
    Contract,
    MessageSize,
    /// Two-phase: every message carries exactly one id.
    UniformIds,
    StatusCoexistence,
    Audit,
    DecideFlood,
    AcceptorMonotonicity,
    Tree,
    /// Largest proposal tag at most `n^3`.
    TagBound,
}

impl CheckKind {
    pub fn defaults_for(protocol: &ProtocolSpec) -> Vec<CheckKind> {
        use CheckKind::*;
        let mut v = vec![Agreement, Validity, Termination, Contract, MessageSize];
        match protocol {
            ProtocolSpec::TwoPhase { .. } => v.extend([UniformIds, StatusCoexistence]),
            ProtocolSpec::Wpaxos { .. } => v.extend([Audit, DecideFlood, AcceptorMonotonicity, Tree, TagBound]),
            ProtocolSpec::AnonFlood { .. } | ProtocolSpec::IdFlood { .. } => {}
        }
        v
    }
}

/// Half-open seed range `a..b`; `a..=b` and a single `a` are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

impl SeedRange {
    pub fn new(start: u64, end: u64) -> Self {
        SeedRange { start, end }
    }

    pub fn iter(&self) -> std::ops::Range<u64> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for SeedRange {
    fn default() -> Self {
        SeedRange { start: 0, end: 1 }
    }
}

impl fmt::Display for SeedRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl FromStr for SeedRange {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |x: &str| -> Result<u64> { x.trim().parse().map_err(|_| anyhow!("bad seed {x:?} in range {s:?}")) };
        let range = if let Some((a, b)) = s.split_once("..=") {
            SeedRange::new(num(a)?, num(b)?.checked_add(1).ok_or_else(|| anyhow!("seed overflow"))?)
        } else if let Some((a, b)) = s.split_once("..") {
            SeedRange::new(num(a)?, num(b)?)
        } else {
            let a = num(s)?;
            SeedRange::new(a, a + 1)
        };
        if range.is_empty() {
            bail!("empty seed range {s:?}");
        }
        Ok(range)
    }
}

impl Serialize for SeedRange {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SeedRange {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(|e: anyhow::Error| serde::de::Error::custom(e))
    }
}

/// Command-line overrides applied to every simulate cell.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub topology: Option<TopologySpec>,
    pub scheduler: Option<SchedulerSpec>,
    pub protocol: Option<ProtocolSpec>,
    pub values: Option<ValueSpec>,
    pub f_ack: Option<Time>,
    pub n_known: Option<usize>,
    pub seeds: Option<SeedRange>,
}

impl Overrides {
    fn touches_cells(&self) -> bool {
        self.topology.is_some()
            || self.scheduler.is_some()
            || self.protocol.is_some()
            || self.values.is_some()
            || self.f_ack.is_some()
            || self.n_known.is_some()
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        // toml's error display carries the line and column.
        toml::from_str(text).map_err(|e| anyhow!("scenario parse error: {e}"))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| anyhow!("scenario parse error at line {}, column {}: {e}", e.line(), e.column()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            Scenario::from_json(&text)
        } else {
            Scenario::from_toml(&text)
        };
        parsed.with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenarios serialize to TOML")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seeds) = o.seeds {
            self.seeds = seeds;
        }
        if !o.touches_cells() {
            return Ok(());
        }
        let Experiment::Simulate { runs } = &mut self.experiment else {
            bail!(
                "scenario {:?} is a fixed construction; only --seeds and output flags apply",
                self.name
            );
        };
        for run in runs {
            if let Some(t) = &o.topology {
                run.topology = t.clone();
            }
            if let Some(s) = &o.scheduler {
                run.scheduler = s.clone();
            }
            if let Some(p) = o.protocol {
                run.protocol = p;
                run.checks = None;
            }
            if let Some(v) = &o.values {
                run.values = v.clone();
            }
            if let Some(f) = o.f_ack {
                run.f_ack = f;
            }
            if let Some(k) = o.n_known {
                run.n_known = Some(k);
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        match &self.experiment {
            Experiment::Simulate { runs } if runs.is_empty() => bail!("scenario {:?} has no runs", self.name),
            Experiment::Simulate { runs } => {
                for run in runs {
                    if run.f_ack == 0 {
                        bail!("f_ack must be at least 1");
                    }
                    if matches!(run.scheduler, SchedulerSpec::Exhaustive { .. }) {
                        bail!("exhaustive schedules belong in an explore experiment");
                    }
                }
                Ok(())
            }
            Experiment::CausalBound { diameters, f_ack } if diameters.is_empty() || *f_ack == 0 => {
                bail!("causal-bound needs diameters and f_ack >= 1")
            }
            Experiment::Explore(e) if !matches!(e.protocol, ProtocolSpec::TwoPhase { .. }) => {
                bail!("exploration supports the two-phase protocol only")
            }
            _ => Ok(()),
        }
    }
}
