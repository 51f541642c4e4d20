use super::{CheckResult, Witness};
use crate::sim::{EventKind, ExecutionTrace, Protocol};
use crate::types::{NodeId, Time};

/// `first[u][w]`: the step and time at which node `w` first entered `u`'s
/// causal history through a chain of receives. Every node has itself at
/// step 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalHistory {
    pub first: Vec<Vec<Option<(u64, Time)>>>,
}

impl CausalHistory {
    pub fn contains(&self, u: NodeId, w: NodeId, time: Time) -> bool {
        self.first[u.index()][w.index()].is_some_and(|(_, t)| t <= time)
    }
}

pub fn causal_histories<P: Protocol>(trace: &ExecutionTrace<P>) -> CausalHistory {
    let n = trace.n();
    let mut first = vec![vec![None; n]; n];
    for (u, row) in first.iter_mut().enumerate() {
        row[u] = Some((0, 0));
    }
    let mut snapshots: Vec<Option<Vec<bool>>> = vec![None; trace.broadcasts.len()];
    let mut next_issue = 0;
    let mut known: Vec<Vec<bool>> = (0..n).map(|u| (0..n).map(|w| w == u).collect()).collect();
    let mut snap_through = |step: u64, known: &Vec<Vec<bool>>, snapshots: &mut Vec<Option<Vec<bool>>>| {
        while next_issue < trace.broadcasts.len() && trace.broadcasts[next_issue].issue_step <= step {
            let b = &trace.broadcasts[next_issue];
            snapshots[next_issue] = Some(known[b.sender.index()].clone());
            next_issue += 1;
        }
    };
    snap_through(0, &known, &mut snapshots);
    for e in &trace.events {
        if let EventKind::Receive { target, instance, .. } = e.kind {
            if let Some(snap) = &snapshots[instance] {
                let t = target.index();
                for w in 0..n {
                    if snap[w] && !known[t][w] {
                        known[t][w] = true;
                        first[t][w] = Some((e.step, e.time));
                    }
                }
            }
        }
        snap_through(e.step, &known, &mut snapshots);
    }
    CausalHistory { first }
}

/// Earliest `(step, time, origin)` at which a node farther than `radius`
/// hops from `endpoint` entered its causal history.
pub fn first_far_influence<P: Protocol>(
    trace: &ExecutionTrace<P>,
    history: &CausalHistory,
    endpoint: NodeId,
    radius: u32,
) -> Option<(u64, Time, NodeId)> {
    let dist = trace.topology.bfs_distances(endpoint);
    history.first[endpoint.index()]
        .iter()
        .enumerate()
        .filter(|(w, _)| dist[*w].is_some_and(|d| d > radius))
        .filter_map(|(w, f)| f.map(|(s, t)| (s, t, NodeId::from(w))))
        .min_by_key(|&(s, t, _)| (t, s))
}

/// At the ends of a longest shortest path, nothing from beyond half the
/// diameter may enter the causal history before `bound`.
pub fn check_causal_bound<P: Protocol>(trace: &ExecutionTrace<P>, bound: Time) -> CheckResult {
    const NAME: &str = "causal_history_bound";
    let diameter = trace.topology.diameter();
    let radius = diameter / 2;
    let endpoints: Vec<NodeId> = trace
        .topology
        .nodes()
        .filter(|&u| trace.topology.bfs_distances(u).iter().flatten().max() == Some(&diameter))
        .collect();
    let history = causal_histories(trace);
    let mut earliest: Option<Time> = None;
    for &u in &endpoints {
        if let Some((step, time, origin)) = first_far_influence(trace, &history, u, radius) {
            if time < bound {
                return CheckResult::fail(
                    NAME,
                    Witness::new(format!("{origin} reached endpoint {u} at time {time}, bound {bound}"))
                        .steps([step])
                        .nodes([u, origin]),
                );
            }
            earliest = Some(earliest.map_or(time, |e| e.min(time)));
        }
    }
    let note = match earliest {
        Some(t) => format!("earliest far influence at time {t}, bound {bound}"),
        None => format!("no far influence before the run ended, bound {bound}"),
    };
    CheckResult::pass(NAME).with_note(note)
}
