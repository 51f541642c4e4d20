use super::{CheckResult, Witness};
use crate::sim::ExecutionTrace;
use crate::twophase::{Status, TwoPhaseNode};
use crate::types::Value;

/// No two phase-2 messages in one run report opposite decided statuses.
pub fn check_status_coexistence(trace: &ExecutionTrace<TwoPhaseNode>) -> CheckResult {
    const NAME: &str = "status_coexistence";
    let mut seen: [Option<usize>; 2] = [None, None];
    for (i, b) in trace.broadcasts.iter().enumerate() {
        if let Some(Status::Decided(v)) = b.payload.status() {
            seen[v.as_u8() as usize].get_or_insert(i);
        }
    }
    if let [Some(z), Some(o)] = seen {
        let (bz, bo) = (&trace.broadcasts[z], &trace.broadcasts[o]);
        return CheckResult::fail(
            NAME,
            Witness::new("decided(0) and decided(1) both broadcast")
                .steps([bz.issue_step, bo.issue_step])
                .nodes([bz.sender, bo.sender])
                .values([Value::Zero, Value::One]),
        );
    }
    CheckResult::pass(NAME)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::sched::RandomScheduler;
    use crate::sim::{run_simulation, SimConfig};
    use crate::topology::build_clique;
    use crate::twophase::{TwoPhaseMsg, TwoPhaseOptions};
    use crate::types::NodeId;

    #[test]
    fn random_runs_never_mix_statuses() {
        for seed in 0..50 {
            let values = (0..4).map(|i| Value::from((i + seed) % 3 == 0)).collect();
            let t = run_simulation(
                Arc::new(build_clique(4).unwrap()),
                TwoPhaseNode::factory(values, TwoPhaseOptions::default()),
                RandomScheduler::new(seed as u64),
                SimConfig::new(4),
                1000,
            )
            .unwrap();
            assert!(check_status_coexistence(&t).passed());
        }
    }

    #[test]
    fn planted_conflict_is_reported() {
        let mut t = run_simulation(
            Arc::new(build_clique(2).unwrap()),
            TwoPhaseNode::factory(vec![Value::Zero, Value::One], TwoPhaseOptions::default()),
            RandomScheduler::new(1),
            SimConfig::new(2),
            1000,
        )
        .unwrap();
        let mut extra = t.broadcasts[0].clone();
        extra.payload = TwoPhaseMsg::Phase2 {
            id: NodeId(0),
            status: Status::Decided(Value::Zero),
        };
        t.broadcasts.push(extra.clone());
        extra.payload = TwoPhaseMsg::Phase2 {
            id: NodeId(1),
            status: Status::Decided(Value::One),
        };
        t.broadcasts.push(extra);
        assert!(check_status_coexistence(&t).failed());
    }
}
