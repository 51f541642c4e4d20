use std::collections::BTreeMap;

use super::{CheckResult, Witness};
use crate::sim::ExecutionTrace;
use crate::types::{NodeId, Time, Value};
use crate::wpaxos::{ProposalNumber, WpaxosNode};

/// Largest proposal tag carried by any wire message.
pub fn max_tag(trace: &ExecutionTrace<WpaxosNode>) -> u64 {
    trace
        .broadcasts
        .iter()
        .filter_map(|b| b.payload.max_tag())
        .max()
        .unwrap_or(0)
}

pub fn check_tag_bound(trace: &ExecutionTrace<WpaxosNode>, ceiling: u64) -> CheckResult {
    const NAME: &str = "tag_bound";
    match trace
        .broadcasts
        .iter()
        .find(|b| b.payload.max_tag().is_some_and(|t| t > ceiling))
    {
        Some(b) => CheckResult::fail(
            NAME,
            Witness::new(format!(
                "tag {} exceeds ceiling {ceiling}",
                b.payload.max_tag().unwrap_or(0)
            ))
            .steps([b.issue_step])
            .nodes([b.sender]),
        ),
        None => CheckResult::pass(NAME).with_note(format!("max tag {}, ceiling {ceiling}", max_tag(trace))),
    }
}

/// Time of the step that generated the final change event.
pub fn gst_estimate(trace: &ExecutionTrace<WpaxosNode>) -> Option<Time> {
    trace.probes.iter().rev().find(|r| r.probe.change_fired).map(|r| r.time)
}

/// Every flooded decide message carries the same value.
pub fn check_decide_flood(trace: &ExecutionTrace<WpaxosNode>) -> CheckResult {
    const NAME: &str = "decide_flood";
    let mut first: Option<(u64, NodeId, Value)> = None;
    for b in &trace.broadcasts {
        let Some(v) = b.payload.decide else { continue };
        match first {
            None => first = Some((b.issue_step, b.sender, v)),
            Some((s, u, w)) if w != v => {
                return CheckResult::fail(
                    NAME,
                    Witness::new(format!("{u} flooded decide({w}), {} flooded decide({v})", b.sender))
                        .steps([s, b.issue_step])
                        .nodes([u, b.sender])
                        .values([w, v]),
                );
            }
            Some(_) => {}
        }
    }
    CheckResult::pass(NAME)
}

/// Promised numbers never decrease and accepted numbers never exceed them.
pub fn check_acceptor_monotonicity(trace: &ExecutionTrace<WpaxosNode>) -> CheckResult {
    const NAME: &str = "acceptor_monotonicity";
    let mut last: BTreeMap<NodeId, Option<ProposalNumber>> = BTreeMap::new();
    for rec in &trace.probes {
        let p = &rec.probe;
        let prev = last.insert(rec.node, p.promised).flatten();
        if prev > p.promised {
            return CheckResult::fail(
                NAME,
                Witness::new(format!("{} promise fell from {:?} to {:?}", rec.node, prev, p.promised))
                    .steps([rec.step])
                    .nodes([rec.node]),
            );
        }
        if let Some(a) = p.accepted {
            if Some(a.number) > p.promised {
                return CheckResult::fail(
                    NAME,
                    Witness::new(format!("{} accepted {} above its promise", rec.node, a.number))
                        .steps([rec.step])
                        .nodes([rec.node]),
                );
            }
        }
    }
    CheckResult::pass(NAME)
}

/// Once every node's leader estimate is the largest id, each node's hop
/// count to it equals its BFS distance. Judged on each node's final state,
/// so the trace should run to quiescence.
pub fn check_tree_after_stabilization(trace: &ExecutionTrace<WpaxosNode>) -> CheckResult {
    const NAME: &str = "tree_after_stabilization";
    let n = trace.n();
    let leader = NodeId::from(n - 1);
    let mut final_state = vec![None; n];
    for rec in &trace.probes {
        final_state[rec.node.index()] = Some(rec);
    }
    if final_state.iter().any(|r| r.is_none_or(|r| r.probe.omega != leader)) {
        return CheckResult::inapplicable(NAME, "leader estimates had not stabilized when the run ended");
    }
    let bfs = trace.topology.bfs_distances(leader);
    for (u, rec) in final_state.iter().enumerate() {
        let rec = rec.expect("checked above");
        if rec.probe.dist_to_omega != bfs[u] {
            return CheckResult::fail(
                NAME,
                Witness::new(format!(
                    "{} has distance {:?} to {leader}, BFS says {:?}",
                    rec.node, rec.probe.dist_to_omega, bfs[u]
                ))
                .steps([rec.step])
                .nodes([rec.node, leader]),
            );
        }
        if let Some(parent) = rec.probe.parent_to_omega.filter(|&p| p != rec.node) {
            if bfs[parent.index()].map(|d| d + 1) != bfs[u] {
                return CheckResult::fail(
                    NAME,
                    Witness::new(format!("{}'s parent {parent} is not one hop closer", rec.node))
                        .steps([rec.step])
                        .nodes([rec.node, parent]),
                );
            }
        }
    }
    CheckResult::pass(NAME)
}
