use super::{CheckResult, Witness};
use crate::sim::{ExecutionTrace, Protocol, StateRecord};
use crate::types::{NodeId, Time};

const NAME: &str = "indistinguishable";

fn digest_at(timeline: &[StateRecord], time: Time) -> Option<u64> {
    let idx = timeline.partition_point(|r| r.time <= time);
    idx.checked_sub(1).map(|i| timeline[i].digest)
}

/// For every `(x, y)` in `mapping` and every time `r <= t`, node `x` in
/// `left` ends time `r` in the same state as node `y` in `right`.
///
/// Both traces should come from lock-step schedulers so that time `r`
/// is round `r`. Use anonymous digests when ids differ across the pair.
pub fn check_indistinguishable<P: Protocol, Q: Protocol>(
    left: &ExecutionTrace<P>,
    right: &ExecutionTrace<Q>,
    mapping: &[(NodeId, NodeId)],
    t: Time,
) -> CheckResult {
    if mapping.is_empty() {
        return CheckResult::inapplicable(NAME, "empty node mapping");
    }
    let lt = left.state_timelines();
    let rt = right.state_timelines();
    for &(x, y) in mapping {
        if x.index() >= lt.len() || y.index() >= rt.len() {
            return CheckResult::inapplicable(NAME, format!("mapping pair ({x}, {y}) out of range"));
        }
    }
    for r in 0..=t {
        for &(x, y) in mapping {
            let a = digest_at(&lt[x.index()], r);
            let b = digest_at(&rt[y.index()], r);
            if a != b {
                let step = |tl: &[StateRecord]| {
                    tl.iter()
                        .take_while(|rec| rec.time <= r)
                        .last()
                        .map_or(0, |rec| rec.step)
                };
                return CheckResult::fail(
                    NAME,
                    Witness::new(format!("{x} and {y} differ at time {r}"))
                        .steps([step(&lt[x.index()]), step(&rt[y.index()])])
                        .nodes([x, y]),
                );
            }
        }
    }
    CheckResult::pass(NAME).with_note(format!("{} pairs through time {t}", mapping.len()))
}
