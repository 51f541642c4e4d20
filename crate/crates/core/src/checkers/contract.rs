use std::collections::{BTreeMap, BTreeSet};

use super::{CheckResult, Witness};
use crate::sim::{EventKind, ExecutionTrace, Protocol};
use crate::types::{NodeId, Time};

const NAME: &str = "mac_contract";

/// Re-derives the abstract MAC layer guarantees from the event log alone:
/// receive windows, one receive per live neighbour before the ack, the
/// F_ack bound, one pending broadcast per node, and eventual acks.
pub fn check_contract<P: Protocol>(trace: &ExecutionTrace<P>) -> CheckResult {
    let f_ack = trace.config.f_ack;
    let mut receives: BTreeMap<usize, Vec<(u64, Time, NodeId)>> = BTreeMap::new();
    let mut acks: BTreeMap<usize, (u64, Time)> = BTreeMap::new();
    let mut crash_step: BTreeMap<NodeId, u64> = BTreeMap::new();
    for e in &trace.events {
        match e.kind {
            EventKind::Receive { target, instance, .. } => {
                receives.entry(instance).or_default().push((e.step, e.time, target))
            }
            EventKind::Ack { instance, .. } => {
                if acks.insert(instance, (e.step, e.time)).is_some() {
                    return CheckResult::fail(
                        NAME,
                        Witness::new(format!("instance {instance} acked twice")).steps([e.step]),
                    );
                }
            }
            EventKind::Crash { node } => {
                crash_step.entry(node).or_insert(e.step);
            }
            EventKind::Decide { .. } => {}
        }
    }
    let crashed_before = |node: NodeId, step: u64| crash_step.get(&node).is_some_and(|&c| c < step);

    for (idx, b) in trace.broadcasts.iter().enumerate() {
        let rs = receives.get(&idx).map(Vec::as_slice).unwrap_or(&[]);
        let mut seen = BTreeSet::new();
        for &(step, time, target) in rs {
            if !trace.topology.are_adjacent(b.sender, target) {
                return CheckResult::fail(
                    NAME,
                    Witness::new(format!("{target} received from non-neighbour {}", b.sender))
                        .steps([step])
                        .nodes([b.sender, target]),
                );
            }
            if !seen.insert(target) {
                return CheckResult::fail(
                    NAME,
                    Witness::new(format!("{target} received instance {idx} twice"))
                        .steps([step])
                        .nodes([target]),
                );
            }
            if time <= b.issue_time || time > b.release_time + f_ack {
                return CheckResult::fail(
                    NAME,
                    Witness::new(format!(
                        "receive at {time} outside ({}, {}]",
                        b.issue_time,
                        b.release_time + f_ack
                    ))
                    .steps([step])
                    .nodes([target]),
                );
            }
        }
        match acks.get(&idx) {
            Some(&(ack_step, ack_time)) => {
                if ack_time > b.release_time + f_ack {
                    return CheckResult::fail(
                        NAME,
                        Witness::new(format!(
                            "ack at {ack_time} exceeds release {} + f_ack {f_ack}",
                            b.release_time
                        ))
                        .steps([ack_step])
                        .nodes([b.sender]),
                    );
                }
                if let Some(&(s, _, v)) = rs.iter().find(|&&(s, _, _)| s > ack_step) {
                    return CheckResult::fail(
                        NAME,
                        Witness::new(format!("{v} received after the sender's ack"))
                            .steps([ack_step, s])
                            .nodes([b.sender, v]),
                    );
                }
                for &(v, _) in &b.receivers {
                    if !seen.contains(&v) && !crashed_before(v, ack_step) {
                        return CheckResult::fail(
                            NAME,
                            Witness::new(format!("ack to {} before live neighbour {v} received", b.sender))
                                .steps([ack_step])
                                .nodes([b.sender, v]),
                        );
                    }
                }
            }
            None => {
                let sender_crashed = trace.crashed[b.sender.index()];
                if !sender_crashed && b.ack_time < trace.end_time {
                    return CheckResult::fail(
                        NAME,
                        Witness::new(format!(
                            "broadcast {idx} from {} never acked though the run reached {}",
                            b.sender, trace.end_time
                        ))
                        .steps([b.issue_step])
                        .nodes([b.sender]),
                    );
                }
            }
        }
    }

    let mut per_sender: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (idx, b) in trace.broadcasts.iter().enumerate() {
        per_sender.entry(b.sender).or_default().push(idx);
    }
    for (sender, list) in per_sender {
        for w in list.windows(2) {
            let next = &trace.broadcasts[w[1]];
            let ok = acks.get(&w[0]).is_some_and(|&(s, _)| s <= next.issue_step);
            if !ok {
                return CheckResult::fail(
                    NAME,
                    Witness::new(format!("{sender} issued broadcast {} while {} was pending", w[1], w[0]))
                        .steps([next.issue_step])
                        .nodes([sender]),
                );
            }
        }
    }
    CheckResult::pass(NAME)
}
