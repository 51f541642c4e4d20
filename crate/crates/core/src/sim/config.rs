use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::types::{NodeId, Time};

pub const DEFAULT_ID_CAPACITY: usize = 12;

/// A scheduled crash: `node` halts at `time`; of its in-flight broadcast,
/// only `survivors` still receive the message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashSpec {
    pub node: NodeId,
    pub time: Time,
    #[serde(default)]
    pub survivors: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Maximum delay between a broadcast (or its release) and its ack.
    pub f_ack: Time,
    /// Maximum id-valued fields per wire message.
    pub id_capacity: usize,
    #[serde(default)]
    pub crash_plan: Vec<CrashSpec>,
    /// Excludes node ids from state digests.
    #[serde(default)]
    pub anonymous_mode: bool,
    /// Stop as soon as every live node has decided; otherwise run until no
    /// events remain.
    #[serde(default = "default_true")]
    pub stop_when_decided: bool,
}

fn default_true() -> bool {
    true
}

impl SimConfig {
    pub fn new(f_ack: Time) -> Self {
        SimConfig {
            f_ack,
            ..Self::default()
        }
    }

    pub fn anonymous(mut self) -> Self {
        self.anonymous_mode = true;
        self
    }

    pub fn run_to_quiescence(mut self) -> Self {
        self.stop_when_decided = false;
        self
    }

    pub fn with_crash(mut self, crash: CrashSpec) -> Self {
        self.crash_plan.push(crash);
        self
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            f_ack: 1,
            id_capacity: DEFAULT_ID_CAPACITY,
            crash_plan: Vec::new(),
            anonymous_mode: false,
            stop_when_decided: true,
        }
    }
}
