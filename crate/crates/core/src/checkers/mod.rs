//! Post-hoc validators. Every checker is a pure function of a trace.

mod audit;
mod causal;
mod consensus;
mod contract;
mod similarity;
mod sizes;
mod twophase;
mod wpaxos;

use serde::Serialize;

use crate::types::{NodeId, Time, Value};

pub use audit::{audit_counts, CountAudit, PropositionAudit};
pub use causal::{causal_histories, check_causal_bound, first_far_influence, CausalHistory};
pub use consensus::{check_agreement, check_termination, check_validity};
pub use contract::check_contract;
pub use similarity::check_indistinguishable;
pub use sizes::{check_message_size, check_uniform_ids, id_field_range, measure_times, TimingMetrics};
pub use twophase::check_status_coexistence;
pub use wpaxos::{
    check_acceptor_monotonicity, check_decide_flood, check_tag_bound, check_tree_after_stabilization, gst_estimate,
    max_tag,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inapplicable,
}

/// Concrete evidence for a failed check.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub steps: Vec<u64>,
    pub nodes: Vec<NodeId>,
    pub values: Vec<Value>,
    pub detail: String,
}

impl Witness {
    pub fn new(detail: impl Into<String>) -> Self {
        Witness {
            detail: detail.into(),
            ..Default::default()
        }
    }

    pub fn steps(mut self, steps: impl IntoIterator<Item = u64>) -> Self {
        self.steps.extend(steps);
        self
    }

    pub fn nodes(mut self, nodes: impl IntoIterator<Item = NodeId>) -> Self {
        self.nodes.extend(nodes);
        self
    }

    pub fn values(mut self, values: impl IntoIterator<Item = Value>) -> Self {
        self.values.extend(values);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    pub fn pass(name: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            verdict: Verdict::Pass,
            witness: None,
            note: None,
        }
    }

    /// A failure always carries its witness.
    pub fn fail(name: impl Into<String>, witness: Witness) -> Self {
        CheckResult {
            name: name.into(),
            verdict: Verdict::Fail,
            witness: Some(witness),
            note: None,
        }
    }

    pub fn inapplicable(name: impl Into<String>, why: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            verdict: Verdict::Inapplicable,
            witness: None,
            note: Some(why.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fail
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReportMetrics {
    pub decision_time: Option<Time>,
    pub decision_time_over_fack: Option<f64>,
    pub decision_time_over_d_fack: Option<f64>,
    pub max_ids_per_message: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tag: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gst: Option<Time>,
}

/// All verdicts for one trace plus its headline metrics.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CheckReport {
    pub checks: Vec<CheckResult>,
    pub metrics: ReportMetrics,
}

impl CheckReport {
    pub fn push(&mut self, result: CheckResult) {
        self.checks.push(result);
    }

    pub fn any_failed(&self) -> bool {
        self.checks.iter().any(CheckResult::failed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| c.failed())
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }
}
