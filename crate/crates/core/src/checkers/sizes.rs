use serde::Serialize;

use super::{CheckResult, Witness};
use crate::sim::{ExecutionTrace, Protocol, WireMessage};
use crate::types::Time;

/// Smallest and largest id-field count over all accepted broadcasts.
pub fn id_field_range<P: Protocol>(trace: &ExecutionTrace<P>) -> Option<(usize, usize)> {
    let counts = trace.broadcasts.iter().map(|b| b.payload.id_fields());
    counts.fold(None, |acc, c| match acc {
        None => Some((c, c)),
        Some((lo, hi)) => Some((lo.min(c), hi.max(c))),
    })
}

/// Every wire message carries at most `cap` id-sized fields, and the run
/// was not aborted for an oversized message.
pub fn check_message_size<P: Protocol>(trace: &ExecutionTrace<P>, cap: usize) -> CheckResult {
    const NAME: &str = "message_size";
    if let Some(reason) = &trace.abort {
        return CheckResult::fail(NAME, Witness::new(reason.clone()));
    }
    for b in &trace.broadcasts {
        let ids = b.payload.id_fields();
        if ids > cap {
            return CheckResult::fail(
                NAME,
                Witness::new(format!("{} carries {ids} ids, cap {cap}", b.payload.summary()))
                    .steps([b.issue_step])
                    .nodes([b.sender]),
            );
        }
    }
    let max = id_field_range(trace).map_or(0, |(_, hi)| hi);
    CheckResult::pass(NAME).with_note(format!("max {max} ids per message"))
}

/// Every wire message carries exactly `k` id-sized fields.
pub fn check_uniform_ids<P: Protocol>(trace: &ExecutionTrace<P>, k: usize) -> CheckResult {
    const NAME: &str = "uniform_ids";
    match trace.broadcasts.iter().find(|b| b.payload.id_fields() != k) {
        Some(b) => CheckResult::fail(
            NAME,
            Witness::new(format!(
                "{} carries {} ids, expected {k}",
                b.payload.summary(),
                b.payload.id_fields()
            ))
            .steps([b.issue_step])
            .nodes([b.sender]),
        ),
        None => CheckResult::pass(NAME),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingMetrics {
    pub decision_time: Option<Time>,
    pub over_fack: Option<f64>,
    pub over_d_fack: Option<f64>,
    pub f_ack: Time,
    pub diameter: u32,
}

/// Decision time, raw and normalized by `f_ack` and by `D * f_ack`. The
/// normalizer is the configured bound, or the observed one when a
/// withholding scheduler stretched it.
pub fn measure_times<P: Protocol>(trace: &ExecutionTrace<P>) -> TimingMetrics {
    let f_ack = trace.config.f_ack.max(trace.effective_f_ack).max(1);
    let diameter = trace.topology.diameter();
    let decision_time = if trace.terminated { trace.decision_time() } else { None };
    TimingMetrics {
        decision_time,
        over_fack: decision_time.map(|t| t as f64 / f_ack as f64),
        over_d_fack: decision_time
            .filter(|_| diameter > 0)
            .map(|t| t as f64 / (f64::from(diameter) * f_ack as f64)),
        f_ack,
        diameter,
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::sched::MaxDelayScheduler;
    use crate::sim::{run_simulation, SimConfig};
    use crate::topology::build_clique;
    use crate::twophase::{TwoPhaseNode, TwoPhaseOptions};
    use crate::types::Value;

    #[test]
    fn two_phase_messages_carry_one_id() {
        let t = run_simulation(
            Arc::new(build_clique(4).unwrap()),
            TwoPhaseNode::factory(vec![Value::One; 4], TwoPhaseOptions::default()),
            MaxDelayScheduler,
            SimConfig::new(5),
            1000,
        )
        .unwrap();
        assert_eq!(id_field_range(&t), Some((1, 1)));
        assert!(check_message_size(&t, 12).passed());
        assert!(check_message_size(&t, 0).failed());
        assert!(check_uniform_ids(&t, 1).passed());
        let m = measure_times(&t);
        assert_eq!(m.decision_time, Some(10));
        assert_eq!(m.over_fack, Some(2.0));
        assert_eq!(m.over_d_fack, Some(2.0));
    }
}
