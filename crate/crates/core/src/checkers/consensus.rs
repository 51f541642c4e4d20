use super::{CheckResult, Witness};
use crate::sim::{EventKind, ExecutionTrace, Protocol};
use crate::types::{NodeId, Time, Value};

fn decide_events<P: Protocol>(trace: &ExecutionTrace<P>) -> impl Iterator<Item = (u64, NodeId, Value)> + '_ {
    trace.events.iter().filter_map(|e| match e.kind {
        EventKind::Decide { node, value } => Some((e.step, node, value)),
        _ => None,
    })
}

/// No two decide events, at any nodes, carry different values.
pub fn check_agreement<P: Protocol>(trace: &ExecutionTrace<P>) -> CheckResult {
    let mut first: Option<(u64, NodeId, Value)> = None;
    for (step, node, value) in decide_events(trace) {
        match first {
            None => first = Some((step, node, value)),
            Some((s0, n0, v0)) if v0 != value => {
                return CheckResult::fail(
                    "agreement",
                    Witness::new(format!("node {n0} decided {v0}, node {node} decided {value}"))
                        .steps([s0, step])
                        .nodes([n0, node])
                        .values([v0, value]),
                );
            }
            Some(_) => {}
        }
    }
    CheckResult::pass("agreement")
}

/// Every decided value is some node's initial value.
pub fn check_validity<P: Protocol>(trace: &ExecutionTrace<P>) -> CheckResult {
    for (step, node, value) in decide_events(trace) {
        if !trace.initial_values.contains(&Some(value)) {
            return CheckResult::fail(
                "validity",
                Witness::new(format!("node {node} decided {value}, which no node proposed"))
                    .steps([step])
                    .nodes([node])
                    .values([value]),
            );
        }
    }
    CheckResult::pass("validity")
}

/// Every non-crashed node decided, by `bound` if one is given.
pub fn check_termination<P: Protocol>(trace: &ExecutionTrace<P>, bound: Option<Time>) -> CheckResult {
    let undecided: Vec<NodeId> = (0..trace.n())
        .filter(|&i| !trace.crashed[i] && trace.decisions[i].is_none())
        .map(NodeId::from)
        .collect();
    if !undecided.is_empty() {
        return CheckResult::fail(
            "termination",
            Witness::new(format!(
                "{} live node(s) undecided at time {}",
                undecided.len(),
                trace.end_time
            ))
            .nodes(undecided),
        );
    }
    if let (Some(bound), Some(t)) = (bound, trace.decision_time()) {
        if t > bound {
            let late: Vec<NodeId> = (0..trace.n())
                .filter(|&i| trace.decisions[i].is_some_and(|(_, d)| d > bound))
                .map(NodeId::from)
                .collect();
            return CheckResult::fail(
                "termination",
                Witness::new(format!("all decided at {t}, bound {bound}")).nodes(late),
            );
        }
    }
    CheckResult::pass("termination")
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::sched::SyncScheduler;
    use crate::sim::{run_simulation, SimConfig, SimEvent};
    use crate::topology::build_clique;
    use crate::twophase::{TwoPhaseNode, TwoPhaseOptions};

    fn base(values: Vec<Value>) -> ExecutionTrace<TwoPhaseNode> {
        let n = values.len();
        run_simulation(
            Arc::new(build_clique(n).unwrap()),
            TwoPhaseNode::factory(values, TwoPhaseOptions::default()),
            SyncScheduler,
            SimConfig::new(1),
            100,
        )
        .unwrap()
    }

    fn with_decisions(mut t: ExecutionTrace<TwoPhaseNode>, ds: &[Value]) -> ExecutionTrace<TwoPhaseNode> {
        t.events.retain(|e| !matches!(e.kind, EventKind::Decide { .. }));
        for (i, &v) in ds.iter().enumerate() {
            t.events.push(SimEvent {
                step: 1000 + i as u64,
                time: 5,
                kind: EventKind::Decide {
                    node: NodeId::from(i),
                    value: v,
                },
            });
            t.decisions[i] = Some((v, 5));
        }
        t
    }

    #[test]
    fn uniform_decisions_agree() {
        let t = with_decisions(base(vec![Value::Zero; 3]), &[Value::Zero; 3]);
        assert!(check_agreement(&t).passed());
        assert!(check_validity(&t).passed());
        assert!(check_termination(&t, Some(5)).passed());
        assert!(check_termination(&t, Some(4)).failed());
    }

    #[test]
    fn split_decision_fails_with_pair() {
        let t = with_decisions(base(vec![Value::Zero, Value::One]), &[Value::Zero, Value::One]);
        let r = check_agreement(&t);
        assert!(r.failed());
        let w = r.witness.unwrap();
        assert_eq!(w.nodes, vec![NodeId(0), NodeId(1)]);
        assert_eq!(w.values, vec![Value::Zero, Value::One]);
    }

    #[test]
    fn deciding_unproposed_value_fails_validity() {
        let t = with_decisions(base(vec![Value::One; 3]), &[Value::Zero; 3]);
        assert!(check_validity(&t).failed());
    }

    #[test]
    fn undecided_node_fails_termination() {
        let mut t = base(vec![Value::One; 3]);
        t.decisions[2] = None;
        let r = check_termination(&t, None);
        assert_eq!(r.witness.unwrap().nodes, vec![NodeId(2)]);
    }
}
