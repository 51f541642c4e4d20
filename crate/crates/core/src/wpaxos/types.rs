use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sim::WireMessage;
use crate::types::{NodeId, Value};

/// `(tag, id)`, ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub struct ProposalNumber {
    pub tag: u64,
    pub id: NodeId,
}

impl ProposalNumber {
    pub fn new(tag: u64, id: NodeId) -> Self {
        ProposalNumber { tag, id }
    }
}

impl fmt::Display for ProposalNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.tag, self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PropKind {
    Prepare,
    Propose,
}

/// A proposer message type with its proposal number; the proposer is
/// `number.id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Proposition {
    pub kind: PropKind,
    pub number: ProposalNumber,
}

impl Proposition {
    pub fn prepare(number: ProposalNumber) -> Self {
        Proposition {
            kind: PropKind::Prepare,
            number,
        }
    }

    pub fn propose(number: ProposalNumber) -> Self {
        Proposition {
            kind: PropKind::Propose,
            number,
        }
    }

    pub fn proposer(&self) -> NodeId {
        self.number.id
    }
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            PropKind::Prepare => "prepare",
            PropKind::Propose => "propose",
        };
        write!(f, "{kind}({})", self.number)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
}

/// A previously accepted proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Accepted {
    pub number: ProposalNumber,
    pub value: Value,
}

/// A prepare or propose as flooded by proposers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProposerMsg {
    pub prop: Proposition,
    /// Present exactly for proposes.
    pub value: Option<Value>,
}

/// One or more acceptor responses of the same polarity to the same
/// proposition, headed for the same next hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AggregatedResponse {
    pub prop: Proposition,
    pub polarity: Polarity,
    pub count: u32,
    /// Highest-numbered previously accepted proposal among the merged
    /// positive prepare responses.
    pub prior: Option<Accepted>,
    /// Highest number the rejecting acceptors were committed to.
    pub committed: Option<ProposalNumber>,
    /// Next hop toward the proposer; `None` while the route is unknown.
    pub dest: Option<NodeId>,
}

impl AggregatedResponse {
    pub fn key(&self) -> (Proposition, Polarity, Option<NodeId>) {
        (self.prop, self.polarity, self.dest)
    }

    pub fn is_affirmative(&self) -> bool {
        self.polarity == Polarity::Positive
    }

    /// Merges `other` (same key) into `self`: counts add, carried numbers
    /// keep the maximum.
    pub fn merge(&mut self, other: &AggregatedResponse) {
        debug_assert_eq!(self.key(), other.key());
        self.count += other.count;
        self.prior = max_opt(self.prior, other.prior, |a| a.number);
        self.committed = max_opt(self.committed, other.committed, |n| *n);
    }

    fn id_fields(&self) -> usize {
        1 + usize::from(self.dest.is_some()) + usize::from(self.prior.is_some()) + usize::from(self.committed.is_some())
    }
}

pub(crate) fn max_opt<T: Copy, K: Ord>(a: Option<T>, b: Option<T>, key: impl Fn(&T) -> K) -> Option<T> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if key(&y).cmp(&key(&x)) == Ordering::Greater {
            y
        } else {
            x
        }),
        (x, None) => x,
        (None, y) => y,
    }
}

pub(crate) fn min_opt<T: Copy, K: Ord>(a: Option<T>, b: Option<T>, key: impl Fn(&T) -> K) -> Option<T> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if key(&y) < key(&x) { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Change-service timestamp: a Lamport clock value with the id of the node
/// that generated the change as tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChangeStamp {
    pub time: u64,
    pub id: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Search {
    pub root: NodeId,
    pub hops: u32,
}

/// One multiplexed broadcast: at most one entry from each service queue.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct Bundle {
    /// Sender's logical clock; not an id.
    pub clock: u64,
    pub decide: Option<Value>,
    pub leader: Option<NodeId>,
    pub change: Option<ChangeStamp>,
    pub search: Option<Search>,
    pub proposer: Option<ProposerMsg>,
    pub response: Option<AggregatedResponse>,
}

impl Bundle {
    pub fn is_empty(&self) -> bool {
        self.decide.is_none()
            && self.leader.is_none()
            && self.change.is_none()
            && self.search.is_none()
            && self.proposer.is_none()
            && self.response.is_none()
    }

    /// Largest tag of any proposal number carried.
    pub fn max_tag(&self) -> Option<u64> {
        let mut tags = Vec::new();
        if let Some(p) = &self.proposer {
            tags.push(p.prop.number.tag);
        }
        if let Some(r) = &self.response {
            tags.push(r.prop.number.tag);
            tags.extend(r.prior.map(|a| a.number.tag));
            tags.extend(r.committed.map(|n| n.tag));
        }
        tags.into_iter().max()
    }

    pub fn component_names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.decide.is_some() {
            out.push("decide");
        }
        if self.leader.is_some() {
            out.push("leader");
        }
        if self.change.is_some() {
            out.push("change");
        }
        if self.search.is_some() {
            out.push("search");
        }
        if self.proposer.is_some() {
            out.push("proposer");
        }
        if self.response.is_some() {
            out.push("response");
        }
        out
    }
}

impl WireMessage for Bundle {
    fn id_fields(&self) -> usize {
        usize::from(self.leader.is_some())
            + usize::from(self.change.is_some())
            + usize::from(self.search.is_some())
            + usize::from(self.proposer.is_some())
            + self.response.as_ref().map_or(0, AggregatedResponse::id_fields)
    }

    fn summary(&self) -> String {
        let mut parts = Vec::new();
        if let Some(v) = self.decide {
            parts.push(format!("decide({v})"));
        }
        if let Some(l) = self.leader {
            parts.push(format!("leader({l})"));
        }
        if let Some(c) = self.change {
            parts.push(format!("change({},{})", c.time, c.id));
        }
        if let Some(s) = self.search {
            parts.push(format!("search({},{})", s.root, s.hops));
        }
        if let Some(p) = &self.proposer {
            match p.value {
                Some(v) => parts.push(format!("{}={v}", p.prop)),
                None => parts.push(p.prop.to_string()),
            }
        }
        if let Some(r) = &self.response {
            let sign = match r.polarity {
                Polarity::Positive => '+',
                Polarity::Negative => '-',
            };
            let dest = r.dest.map_or("?".to_string(), |d| d.to_string());
            parts.push(format!("resp({sign}{}x{}->{dest})", r.prop, r.count));
        }
        parts.join("|")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(tag: u64, id: u32) -> ProposalNumber {
        ProposalNumber::new(tag, NodeId(id))
    }

    fn resp(count: u32, prior: Option<Accepted>) -> AggregatedResponse {
        AggregatedResponse {
            prop: Proposition::prepare(num(3, 1)),
            polarity: Polarity::Positive,
            count,
            prior,
            committed: None,
            dest: Some(NodeId(0)),
        }
    }

    #[test]
    fn proposal_numbers_order_by_tag_then_id() {
        assert!(num(3, 4) > num(2, 5));
        assert!(num(2, 5) > num(2, 4));
        assert_eq!(num(1, 1), num(1, 1));
    }

    #[test]
    fn merge_sums_counts_and_keeps_largest_prior() {
        let a = Accepted {
            number: num(1, 7),
            value: Value::Zero,
        };
        let b = Accepted {
            number: num(2, 4),
            value: Value::One,
        };
        let mut x = resp(2, Some(a));
        x.merge(&resp(3, Some(b)));
        assert_eq!(x.count, 5);
        assert_eq!(x.prior, Some(b));
        let mut y = resp(1, Some(b));
        y.merge(&resp(1, Some(a)));
        assert_eq!(y.prior, Some(b));
        let mut z = resp(1, None);
        z.merge(&resp(1, Some(a)));
        assert_eq!(z.prior, Some(a));
    }

    #[test]
    fn full_bundle_fits_id_capacity() {
        let b = Bundle {
            clock: 9,
            decide: Some(Value::One),
            leader: Some(NodeId(4)),
            change: Some(ChangeStamp { time: 3, id: NodeId(2) }),
            search: Some(Search {
                root: NodeId(4),
                hops: 2,
            }),
            proposer: Some(ProposerMsg {
                prop: Proposition::propose(num(5, 4)),
                value: Some(Value::One),
            }),
            response: Some(AggregatedResponse {
                prop: Proposition::prepare(num(5, 4)),
                polarity: Polarity::Positive,
                count: 3,
                prior: Some(Accepted {
                    number: num(2, 1),
                    value: Value::Zero,
                }),
                committed: None,
                dest: Some(NodeId(1)),
            }),
        };
        assert_eq!(b.id_fields(), 7);
        assert!(b.id_fields() <= crate::sim::DEFAULT_ID_CAPACITY);
        assert_eq!(b.max_tag(), Some(5));
        assert_eq!(b.component_names().len(), 6);
    }

    #[test]
    fn single_component_bundle() {
        let b = Bundle {
            leader: Some(NodeId(1)),
            ..Default::default()
        };
        assert_eq!(b.id_fields(), 1);
        assert_eq!(b.summary(), "leader(1)");
        assert!(Bundle::default().is_empty());
    }
}
