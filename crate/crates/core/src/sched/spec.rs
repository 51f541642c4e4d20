use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{BridgeScheduler, MaxDelayScheduler, RandomScheduler, Scheduler, SemiSyncScheduler, SyncScheduler};
use crate::topology::Topology;
use crate::types::Time;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpecError {
    #[error("invalid scheduler spec {spec:?}: {msg}")]
    Parse { spec: String, msg: String },
    #[error("scheduler configuration error: {0}")]
    Config(String),
}

/// Textual scheduler selection:
/// `sync | semisync:t=<int> | bridge:t=<int> | maxdelay | random:seed=<int> | exhaustive:depth=<int>`.
///
/// `t` may be omitted for the withholding schedulers; callers then measure
/// it from a reference run and supply it to [`SchedulerSpec::build`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SchedulerSpec {
    Sync,
    SemiSync { t: Option<Time> },
    Bridge { t: Option<Time> },
    MaxDelay,
    Random { seed: u64 },
    Exhaustive { depth: usize },
}

impl SchedulerSpec {
    /// Instantiates a timing scheduler. `measured_t` fills in an omitted `t`.
    pub fn build(&self, topology: &Topology, measured_t: Option<Time>) -> Result<Box<dyn Scheduler>, SpecError> {
        let need_t = |t: Option<Time>| {
            t.or(measured_t)
                .ok_or_else(|| SpecError::Config(format!("{self} needs t, and none was measured")))
        };
        Ok(match *self {
            SchedulerSpec::Sync => Box::new(SyncScheduler),
            SchedulerSpec::MaxDelay => Box::new(MaxDelayScheduler),
            SchedulerSpec::Random { seed } => Box::new(RandomScheduler::new(seed)),
            SchedulerSpec::SemiSync { t } => Box::new(SemiSyncScheduler::for_topology(topology, need_t(t)?)?),
            SchedulerSpec::Bridge { t } => Box::new(BridgeScheduler::for_topology(topology, need_t(t)?)?),
            SchedulerSpec::Exhaustive { .. } => {
                return Err(SpecError::Config(
                    "exhaustive exploration is not a timing scheduler; use the explorer".into(),
                ))
            }
        })
    }

    /// Same spec with the seed replaced, for seed sweeps. Non-random specs
    /// are returned unchanged.
    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            SchedulerSpec::Random { .. } => SchedulerSpec::Random { seed },
            other => other.clone(),
        }
    }
}

impl fmt::Display for SchedulerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedulerSpec::Sync => write!(f, "sync"),
            SchedulerSpec::MaxDelay => write!(f, "maxdelay"),
            SchedulerSpec::SemiSync { t: None } => write!(f, "semisync"),
            SchedulerSpec::SemiSync { t: Some(t) } => write!(f, "semisync:t={t}"),
            SchedulerSpec::Bridge { t: None } => write!(f, "bridge"),
            SchedulerSpec::Bridge { t: Some(t) } => write!(f, "bridge:t={t}"),
            SchedulerSpec::Random { seed } => write!(f, "random:seed={seed}"),
            SchedulerSpec::Exhaustive { depth } => write!(f, "exhaustive:depth={depth}"),
        }
    }
}

impl FromStr for SchedulerSpec {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, SpecError> {
        let err = |msg: &str| SpecError::Parse {
            spec: s.to_string(),
            msg: msg.to_string(),
        };
        let (kind, rest) = match s.trim().split_once(':') {
            Some((k, r)) => (k, Some(r)),
            None => (s.trim(), None),
        };
        let param = |key: &str| -> Result<Option<u64>, SpecError> {
            let Some(rest) = rest else { return Ok(None) };
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| err(&format!("expected {key}=<int>")))?;
            if k.trim() != key {
                return Err(err(&format!("unknown parameter {k:?}, expected {key}")));
            }
            v.trim()
                .parse()
                .map(Some)
                .map_err(|_| err(&format!("{key} must be a non-negative integer")))
        };
        let required = |key: &str| param(key)?.ok_or_else(|| err(&format!("missing {key}=<int>")));
        let no_params = || match rest {
            None => Ok(()),
            Some(_) => Err(err("takes no parameters")),
        };
        match kind {
            "sync" => no_params().map(|_| SchedulerSpec::Sync),
            "maxdelay" => no_params().map(|_| SchedulerSpec::MaxDelay),
            "semisync" => Ok(SchedulerSpec::SemiSync { t: param("t")? }),
            "bridge" => Ok(SchedulerSpec::Bridge { t: param("t")? }),
            "random" => Ok(SchedulerSpec::Random {
                seed: required("seed")?,
            }),
            "exhaustive" => Ok(SchedulerSpec::Exhaustive {
                depth: required("depth")? as usize,
            }),
            _ => Err(err("unknown scheduler")),
        }
    }
}

impl TryFrom<String> for SchedulerSpec {
    type Error = SpecError;

    fn try_from(s: String) -> Result<Self, SpecError> {
        s.parse()
    }
}

impl From<SchedulerSpec> for String {
    fn from(s: SchedulerSpec) -> String {
        s.to_string()
    }
}
