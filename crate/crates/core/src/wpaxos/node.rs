use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::types::{
    max_opt, min_opt, Accepted, AggregatedResponse, Bundle, ChangeStamp, Polarity, PropKind, ProposalNumber,
    ProposerMsg, Proposition, Search,
};
use crate::sim::{NodeCtx, Protocol};
use crate::types::{NodeId, Value};

/// Deliberate bugs for mutation testing of the count audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WpaxosFault {
    /// Merging adds the incoming count twice.
    DoubleCount,
    /// Merging keeps the smaller carried proposal number instead of the
    /// larger.
    KeepMinPrior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WpaxosConfig {
    /// Network size known to every node; sets the majority threshold.
    pub n_known: usize,
    pub fault: Option<WpaxosFault>,
}

impl WpaxosConfig {
    pub fn new(n_known: usize) -> Self {
        WpaxosConfig { n_known, fault: None }
    }

    pub fn with_fault(mut self, fault: WpaxosFault) -> Self {
        self.fault = Some(fault);
        self
    }

    fn is_majority(&self, count: u32) -> bool {
        2 * count as usize > self.n_known
    }

    /// Negative count at which a positive majority becomes impossible.
    fn blocking(&self) -> u32 {
        (self.n_known - self.n_known / 2) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProposerPhase {
    Idle,
    Preparing,
    Proposing,
    Decided,
}

/// What one node did during one callback, for trace-level audits.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct WpaxosProbe {
    pub omega: NodeId,
    pub dist_to_omega: Option<u32>,
    pub parent_to_omega: Option<NodeId>,
    /// Acceptor queue after the callback, before the next bundle is built
    /// from it.
    pub response_queue: Vec<AggregatedResponse>,
    /// Responses this node's acceptor generated (count 1 each). Responses
    /// to its own propositions have `dest == Some(self)`.
    pub generated: Vec<AggregatedResponse>,
    /// Responses addressed to this node for another proposer, as received.
    pub relayed_in: Vec<AggregatedResponse>,
    /// Responses to this node's own propositions that it counted.
    pub consumed: Vec<AggregatedResponse>,
    /// Responses dropped to keep the queue on the leader's newest number.
    pub discarded: Vec<AggregatedResponse>,
    /// The change service fired locally.
    pub change_fired: bool,
    pub promised: Option<ProposalNumber>,
    pub accepted: Option<Accepted>,
    pub current_number: Option<ProposalNumber>,
    pub max_tag_seen: u64,
}

#[derive(Debug, Clone)]
pub struct WpaxosNode {
    id: NodeId,
    initial: Value,
    cfg: WpaxosConfig,
    clock: u64,

    omega: NodeId,
    leader_q: Option<NodeId>,

    dist: BTreeMap<NodeId, u32>,
    parent: BTreeMap<NodeId, NodeId>,
    tree_q: VecDeque<Search>,

    last_change: Option<ChangeStamp>,
    change_q: Option<ChangeStamp>,

    number: Option<ProposalNumber>,
    phase: ProposerPhase,
    positives: u32,
    negatives: u32,
    best_prior: Option<Accepted>,
    max_committed: Option<ProposalNumber>,
    retries_left: u8,
    max_tag: u64,
    proposal_value: Option<Value>,
    prop_q: VecDeque<ProposerMsg>,

    promised: Option<ProposalNumber>,
    accepted: Option<Accepted>,
    seen: BTreeSet<Proposition>,
    newest_from: BTreeMap<NodeId, ProposalNumber>,
    resp_q: Vec<AggregatedResponse>,

    decided: Option<Value>,
    pending_decision: Option<Value>,
    decide_slot: Option<Value>,

    probe: WpaxosProbe,
}

impl WpaxosNode {
    pub fn new(id: NodeId, initial: Value, cfg: WpaxosConfig) -> Self {
        assert!(cfg.n_known >= 1, "n_known must be positive");
        WpaxosNode {
            id,
            initial,
            cfg,
            clock: 0,
            omega: id,
            leader_q: None,
            dist: BTreeMap::new(),
            parent: BTreeMap::new(),
            tree_q: VecDeque::new(),
            last_change: None,
            change_q: None,
            number: None,
            phase: ProposerPhase::Idle,
            positives: 0,
            negatives: 0,
            best_prior: None,
            max_committed: None,
            retries_left: 0,
            max_tag: 0,
            proposal_value: None,
            prop_q: VecDeque::new(),
            promised: None,
            accepted: None,
            seen: BTreeSet::new(),
            newest_from: BTreeMap::new(),
            resp_q: Vec::new(),
            decided: None,
            pending_decision: None,
            decide_slot: None,
            probe: WpaxosProbe::default(),
        }
    }

    pub fn factory(values: Vec<Value>, cfg: WpaxosConfig) -> impl FnMut(NodeId) -> WpaxosNode + Clone {
        move |u| WpaxosNode::new(u, values[u.index()], cfg)
    }

    pub fn omega(&self) -> NodeId {
        self.omega
    }

    pub fn dist(&self, root: NodeId) -> Option<u32> {
        self.dist.get(&root).copied()
    }

    pub fn parent(&self, root: NodeId) -> Option<NodeId> {
        self.parent.get(&root).copied()
    }

    pub fn promised(&self) -> Option<ProposalNumber> {
        self.promised
    }

    pub fn accepted(&self) -> Option<Accepted> {
        self.accepted
    }

    pub fn phase(&self) -> ProposerPhase {
        self.phase
    }

    pub fn current_number(&self) -> Option<ProposalNumber> {
        self.number
    }

    pub fn decided(&self) -> Option<Value> {
        self.decided
    }

    pub fn last_change(&self) -> Option<ChangeStamp> {
        self.last_change
    }

    pub fn response_queue(&self) -> &[AggregatedResponse] {
        &self.resp_q
    }

    fn tick(&mut self) {
        self.clock += 1;
    }

    // --- leader election -------------------------------------------------

    fn on_leader(&mut self, id: NodeId) {
        if id > self.omega {
            self.omega = id;
            self.leader_q = Some(id);
            self.prioritize_leader_search();
            self.on_change();
        }
    }

    // --- tree building ---------------------------------------------------

    fn tree_update_q(&mut self, s: Search) {
        self.tree_q.push_back(s);
        self.tree_q.retain(|x| !(x.root == s.root && x.hops > s.hops));
        self.prioritize_leader_search();
    }

    fn prioritize_leader_search(&mut self) {
        if let Some(pos) = self.tree_q.iter().position(|s| s.root == self.omega) {
            let s = self.tree_q.remove(pos).expect("position is in range");
            self.tree_q.push_front(s);
        }
    }

    fn on_search(&mut self, from: NodeId, s: Search) {
        if self.dist.get(&s.root).is_none_or(|&d| s.hops < d) {
            self.dist.insert(s.root, s.hops);
            self.parent.insert(s.root, from);
            self.tree_update_q(Search {
                root: s.root,
                hops: s.hops + 1,
            });
            if s.root == self.omega {
                self.on_change();
            }
        }
    }

    // --- change service --------------------------------------------------

    fn on_change(&mut self) {
        self.tick();
        let stamp = ChangeStamp {
            time: self.clock,
            id: self.id,
        };
        self.probe.change_fired = true;
        self.change_update_q(stamp);
    }

    fn on_change_msg(&mut self, stamp: ChangeStamp) {
        if self.last_change.is_none_or(|c| stamp > c) {
            self.change_update_q(stamp);
        }
    }

    fn change_update_q(&mut self, stamp: ChangeStamp) {
        self.last_change = Some(stamp);
        self.change_q = Some(stamp);
        if self.omega == self.id {
            self.generate_new_proposal();
        }
    }

    // --- proposer --------------------------------------------------------

    fn note_number(&mut self, n: ProposalNumber) {
        self.max_tag = self.max_tag.max(n.tag);
        let newest = self.newest_from.entry(n.id).or_insert(n);
        if n > *newest {
            *newest = n;
        }
    }

    fn generate_new_proposal(&mut self) {
        if self.decided.is_some() {
            return;
        }
        self.retries_left = 1;
        self.start_prepare();
    }

    fn start_prepare(&mut self) {
        let number = ProposalNumber::new(self.max_tag + 1, self.id);
        self.number = Some(number);
        self.phase = ProposerPhase::Preparing;
        self.proposal_value = None;
        self.reset_counts();
        self.issue_proposer_msg(ProposerMsg {
            prop: Proposition::prepare(number),
            value: None,
        });
    }

    fn reset_counts(&mut self) {
        self.positives = 0;
        self.negatives = 0;
        self.best_prior = None;
        self.max_committed = None;
    }

    fn issue_proposer_msg(&mut self, m: ProposerMsg) {
        self.note_number(m.prop.number);
        self.seen.insert(m.prop);
        self.enforce_queue_invariants();
        self.prop_q.push_back(m);
        self.accept_or_reject(m);
    }

    fn on_proposer_msg(&mut self, m: ProposerMsg) {
        self.note_number(m.prop.number);
        if !self.seen.insert(m.prop) {
            return;
        }
        let u = m.prop.proposer();
        if u == self.omega && self.newest_from.get(&u) == Some(&m.prop.number) {
            self.prop_q.push_back(m);
        }
        self.accept_or_reject(m);
    }

    fn consume(&mut self, r: AggregatedResponse) {
        self.probe.consumed.push(r);
        let expected = match self.phase {
            ProposerPhase::Preparing => PropKind::Prepare,
            ProposerPhase::Proposing => PropKind::Propose,
            _ => return,
        };
        if Some(r.prop.number) != self.number || r.prop.kind != expected {
            return;
        }
        match r.polarity {
            Polarity::Positive => self.positives += r.count,
            Polarity::Negative => self.negatives += r.count,
        }
        self.best_prior = max_opt(self.best_prior, r.prior, |a| a.number);
        self.max_committed = max_opt(self.max_committed, r.committed, |n| *n);
        if let Some(c) = r.committed {
            self.note_number(c);
        }
        self.evaluate();
    }

    fn evaluate(&mut self) {
        if self.omega != self.id {
            return;
        }
        let number = self.number.expect("counting implies a proposal");
        if self.cfg.is_majority(self.positives) {
            match self.phase {
                ProposerPhase::Preparing => {
                    let value = self.best_prior.map_or(self.initial, |a| a.value);
                    self.phase = ProposerPhase::Proposing;
                    self.proposal_value = Some(value);
                    self.reset_counts();
                    self.issue_proposer_msg(ProposerMsg {
                        prop: Proposition::propose(number),
                        value: Some(value),
                    });
                }
                ProposerPhase::Proposing => {
                    let value = self.proposal_value.expect("proposing carries a value");
                    self.decide(value);
                }
                _ => {}
            }
        } else if self.negatives >= self.cfg.blocking()
            && self.max_committed.is_some_and(|c| c > number)
            && self.retries_left > 0
        {
            self.retries_left -= 1;
            self.start_prepare();
        }
    }

    fn decide(&mut self, v: Value) {
        if self.decided.is_none() {
            self.decided = Some(v);
            self.pending_decision = Some(v);
            self.decide_slot = Some(v);
        }
        self.phase = ProposerPhase::Decided;
    }

    // --- acceptor --------------------------------------------------------

    fn accept_or_reject(&mut self, m: ProposerMsg) {
        let n = m.prop.number;
        let (polarity, prior, committed) = match m.prop.kind {
            PropKind::Prepare => {
                if self.promised.is_none_or(|p| n > p) {
                    self.promised = Some(n);
                    (Polarity::Positive, self.accepted, None)
                } else {
                    (Polarity::Negative, None, self.promised)
                }
            }
            PropKind::Propose => {
                if self.promised.is_none_or(|p| n >= p) {
                    self.promised = Some(n);
                    let value = m.value.expect("propose carries a value");
                    self.accepted = Some(Accepted { number: n, value });
                    (Polarity::Positive, None, None)
                } else {
                    (Polarity::Negative, None, self.promised)
                }
            }
        };
        let u = m.prop.proposer();
        let mut r = AggregatedResponse {
            prop: m.prop,
            polarity,
            count: 1,
            prior,
            committed,
            dest: None,
        };
        if u == self.id {
            r.dest = Some(self.id);
            self.probe.generated.push(r);
            self.consume(r);
        } else {
            r.dest = self.parent.get(&u).copied();
            self.probe.generated.push(r);
            self.enqueue_response(r);
        }
    }

    fn on_response(&mut self, r: AggregatedResponse) {
        if r.dest != Some(self.id) {
            return;
        }
        self.note_number(r.prop.number);
        for n in r.committed.into_iter().chain(r.prior.map(|a| a.number)) {
            self.max_tag = self.max_tag.max(n.tag);
        }
        let u = r.prop.proposer();
        if u == self.id {
            self.consume(r);
        } else {
            self.probe.relayed_in.push(r);
            let mut fwd = r;
            fwd.dest = self.parent.get(&u).copied();
            self.enqueue_response(fwd);
        }
    }

    fn response_is_current(&self, r: &AggregatedResponse) -> bool {
        let u = r.prop.proposer();
        u == self.omega && self.newest_from.get(&u) == Some(&r.prop.number)
    }

    fn enqueue_response(&mut self, r: AggregatedResponse) {
        if !self.response_is_current(&r) {
            self.probe.discarded.push(r);
            return;
        }
        match self.resp_q.iter_mut().find(|x| x.key() == r.key()) {
            Some(existing) => merge_with_fault(existing, &r, self.cfg.fault),
            None => self.resp_q.push(r),
        }
    }

    /// Drops queued proposer messages and responses that are not for the
    /// current leader's newest proposal number, and routes held responses
    /// whose next hop has become known.
    fn enforce_queue_invariants(&mut self) {
        let omega = self.omega;
        let newest = self.newest_from.get(&omega).copied();
        self.prop_q
            .retain(|m| m.prop.proposer() == omega && Some(m.prop.number) == newest);
        let queue = std::mem::take(&mut self.resp_q);
        for mut r in queue {
            if r.dest.is_none() {
                r.dest = self.parent.get(&r.prop.proposer()).copied();
            }
            if !self.response_is_current(&r) {
                self.probe.discarded.push(r);
            } else {
                match self.resp_q.iter_mut().find(|x| x.key() == r.key()) {
                    Some(existing) => merge_with_fault(existing, &r, self.cfg.fault),
                    None => self.resp_q.push(r),
                }
            }
        }
    }

    // --- decisions and broadcast multiplexing -----------------------------

    fn on_decide_msg(&mut self, v: Value) {
        if self.decided.is_none() {
            self.decide(v);
        }
    }

    fn pump(&mut self, ctx: &mut NodeCtx<Bundle>) {
        self.enforce_queue_invariants();
        if let Some(v) = self.pending_decision.take() {
            ctx.decide(v);
        }
        if ctx.is_busy() {
            return;
        }
        let response = self
            .resp_q
            .iter()
            .position(|r| r.dest.is_some())
            .map(|i| self.resp_q.remove(i));
        let mut bundle = Bundle {
            clock: 0,
            decide: self.decide_slot.take(),
            leader: self.leader_q.take(),
            change: self.change_q.take(),
            search: self.tree_q.pop_front(),
            proposer: self.prop_q.pop_front(),
            response,
        };
        if !bundle.is_empty() {
            self.tick();
            bundle.clock = self.clock;
            ctx.broadcast(bundle);
        }
    }
}

fn merge_with_fault(existing: &mut AggregatedResponse, incoming: &AggregatedResponse, fault: Option<WpaxosFault>) {
    match fault {
        None => existing.merge(incoming),
        Some(WpaxosFault::DoubleCount) => {
            existing.merge(incoming);
            existing.count += incoming.count;
        }
        Some(WpaxosFault::KeepMinPrior) => {
            existing.count += incoming.count;
            existing.prior = min_opt(existing.prior, incoming.prior, |a| a.number);
            existing.committed = min_opt(existing.committed, incoming.committed, |n| *n);
        }
    }
}

impl Protocol for WpaxosNode {
    type Msg = Bundle;
    type Probe = WpaxosProbe;

    fn on_init(&mut self, ctx: &mut NodeCtx<Bundle>) {
        self.tick();
        self.omega = self.id;
        self.leader_q = Some(self.id);
        self.dist.insert(self.id, 0);
        self.parent.insert(self.id, self.id);
        self.tree_update_q(Search { root: self.id, hops: 1 });
        // Setting the leader estimate is itself a change; with n = 1 this
        // is what lets the lone node decide.
        self.on_change();
        self.pump(ctx);
    }

    fn on_receive(&mut self, from: NodeId, b: &Bundle, ctx: &mut NodeCtx<Bundle>) {
        self.clock = self.clock.max(b.clock) + 1;
        if let Some(v) = b.decide {
            self.on_decide_msg(v);
        }
        if let Some(id) = b.leader {
            self.on_leader(id);
        }
        if let Some(stamp) = b.change {
            self.on_change_msg(stamp);
        }
        if let Some(s) = b.search {
            self.on_search(from, s);
        }
        if let Some(m) = b.proposer {
            self.on_proposer_msg(m);
        }
        if let Some(r) = b.response {
            self.on_response(r);
        }
        self.pump(ctx);
    }

    fn on_ack(&mut self, ctx: &mut NodeCtx<Bundle>) {
        self.tick();
        self.pump(ctx);
    }

    fn hash_state(&self, h: &mut DefaultHasher, anonymous: bool) {
        if !anonymous {
            self.id.hash(h);
        }
        self.initial.hash(h);
        self.clock.hash(h);
        self.omega.hash(h);
        self.leader_q.hash(h);
        self.dist.hash(h);
        self.parent.hash(h);
        self.tree_q.hash(h);
        self.last_change.hash(h);
        self.change_q.hash(h);
        self.number.hash(h);
        self.phase.hash(h);
        (self.positives, self.negatives).hash(h);
        self.best_prior.hash(h);
        self.max_committed.hash(h);
        self.retries_left.hash(h);
        self.max_tag.hash(h);
        self.proposal_value.hash(h);
        self.prop_q.hash(h);
        self.promised.hash(h);
        self.accepted.hash(h);
        self.seen.hash(h);
        self.resp_q.hash(h);
        self.decided.hash(h);
        self.decide_slot.hash(h);
    }

    fn initial_value(&self) -> Option<Value> {
        Some(self.initial)
    }

    fn take_probe(&mut self) -> Option<WpaxosProbe> {
        let mut p = std::mem::take(&mut self.probe);
        p.omega = self.omega;
        p.dist_to_omega = self.dist.get(&self.omega).copied();
        p.parent_to_omega = self.parent.get(&self.omega).copied();
        p.response_queue = self.resp_q.clone();
        p.promised = self.promised;
        p.accepted = self.accepted;
        p.current_number = self.number;
        p.max_tag_seen = self.max_tag;
        Some(p)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::sched::{MaxDelayScheduler, RandomScheduler, SyncScheduler};
    use crate::sim::{run_simulation, SimConfig};
    use crate::topology::{build_clique, build_line};

    fn num(tag: u64, id: u32) -> ProposalNumber {
        ProposalNumber::new(tag, NodeId(id))
    }

    fn deliver(node: &mut WpaxosNode, from: u32, b: Bundle) -> Option<Bundle> {
        let mut ctx = NodeCtx::new(0, false);
        node.on_receive(NodeId(from), &b, &mut ctx);
        ctx.into_parts().0
    }

    fn fresh(id: u32, n: usize) -> WpaxosNode {
        let mut node = WpaxosNode::new(NodeId(id), Value::One, WpaxosConfig::new(n));
        let mut ctx = NodeCtx::new(0, false);
        node.on_init(&mut ctx);
        node
    }

    #[test]
    fn leader_estimate_takes_the_max() {
        let mut node = fresh(3, 10);
        let out = deliver(
            &mut node,
            7,
            Bundle {
                leader: Some(NodeId(7)),
                ..Default::default()
            },
        )
        .expect("leader change is forwarded");
        assert_eq!(node.omega(), NodeId(7));
        assert_eq!(out.leader, Some(NodeId(7)));
        deliver(
            &mut node,
            3,
            Bundle {
                leader: Some(NodeId(3)),
                ..Default::default()
            },
        );
        assert_eq!(node.omega(), NodeId(7));
    }

    #[test]
    fn stale_search_is_ignored() {
        let mut node = fresh(0, 10);
        let search = |hops| Bundle {
            search: Some(Search { root: NodeId(9), hops }),
            ..Default::default()
        };
        deliver(&mut node, 4, search(2));
        assert_eq!(node.dist(NodeId(9)), Some(2));
        deliver(&mut node, 5, search(5));
        assert_eq!(node.dist(NodeId(9)), Some(2));
        assert_eq!(node.parent(NodeId(9)), Some(NodeId(4)));
    }

    #[test]
    fn stale_change_is_dropped() {
        let mut node = fresh(0, 10);
        let newer = ChangeStamp {
            time: 50,
            id: NodeId(4),
        };
        let out = deliver(
            &mut node,
            4,
            Bundle {
                change: Some(newer),
                ..Default::default()
            },
        )
        .expect("newer change is forwarded");
        assert_eq!(node.last_change(), Some(newer));
        assert_eq!(out.change, Some(newer));
        deliver(
            &mut node,
            4,
            Bundle {
                change: Some(ChangeStamp { time: 3, id: NodeId(4) }),
                ..Default::default()
            },
        );
        assert_eq!(node.last_change(), Some(newer));
    }

    #[test]
    fn acceptor_commits_to_larger_and_rejects_smaller() {
        let mut node = fresh(0, 10);
        // A larger leader id must be known, or responses are dropped.
        deliver(
            &mut node,
            9,
            Bundle {
                leader: Some(NodeId(9)),
                search: Some(Search {
                    root: NodeId(9),
                    hops: 1,
                }),
                ..Default::default()
            },
        );
        let prepare = |n: ProposalNumber| Bundle {
            proposer: Some(ProposerMsg {
                prop: Proposition::prepare(n),
                value: None,
            }),
            ..Default::default()
        };
        let out = deliver(&mut node, 9, prepare(num(3, 9))).unwrap();
        assert_eq!(node.promised(), Some(num(3, 9)));
        let r = out.response.expect("response sent toward the leader");
        assert_eq!(r.polarity, Polarity::Positive);
        assert_eq!(r.dest, Some(NodeId(9)));
        assert!(node.response_queue().is_empty());

        // An older number from the same proposer is stale: rejected, and
        // its response dropped by the queue invariant.
        deliver(&mut node, 9, prepare(num(2, 9)));
        assert_eq!(node.promised(), Some(num(3, 9)));
        assert_eq!(node.take_probe().unwrap().discarded.len(), 1);

        let propose = Bundle {
            proposer: Some(ProposerMsg {
                prop: Proposition::propose(num(3, 9)),
                value: Some(Value::Zero),
            }),
            ..Default::default()
        };
        deliver(&mut node, 9, propose);
        assert_eq!(
            node.accepted(),
            Some(Accepted {
                number: num(3, 9),
                value: Value::Zero
            })
        );
    }

    #[test]
    fn negative_response_carries_committed_number() {
        let mut node = fresh(0, 10);
        let mut probe = node.take_probe().unwrap();
        assert!(probe.change_fired);
        node.promised = Some(num(3, 4));
        node.accept_or_reject(ProposerMsg {
            prop: Proposition::prepare(num(2, 5)),
            value: None,
        });
        probe = node.take_probe().unwrap();
        let r = probe.generated[0];
        assert_eq!(r.polarity, Polarity::Negative);
        assert_eq!(r.committed, Some(num(3, 4)));
    }

    #[test]
    fn majority_is_strict() {
        let cfg = WpaxosConfig::new(5);
        assert!(!cfg.is_majority(2));
        assert!(cfg.is_majority(3));
        assert!(!WpaxosConfig::new(4).is_majority(2));
        assert_eq!(WpaxosConfig::new(4).blocking(), 2);
    }

    #[test]
    fn double_count_fault_inflates_merges() {
        let r = AggregatedResponse {
            prop: Proposition::prepare(num(1, 2)),
            polarity: Polarity::Positive,
            count: 2,
            prior: None,
            committed: None,
            dest: Some(NodeId(2)),
        };
        let mut x = r;
        merge_with_fault(&mut x, &r, None);
        assert_eq!(x.count, 4);
        let mut y = r;
        merge_with_fault(&mut y, &r, Some(WpaxosFault::DoubleCount));
        assert_eq!(y.count, 6);
    }

    #[test]
    fn single_node_decides_at_init() {
        let topo = Arc::new(build_clique(1).unwrap());
        let trace = run_simulation(
            topo,
            WpaxosNode::factory(vec![Value::Zero], WpaxosConfig::new(1)),
            SyncScheduler,
            SimConfig::new(1),
            10,
        )
        .unwrap();
        assert!(trace.terminated);
        assert_eq!(trace.decisions[0], Some((Value::Zero, 0)));
    }

    #[test]
    fn tree_converges_on_a_line() {
        let topo = Arc::new(build_line(3).unwrap());
        let mut engine = crate::sim::Engine::new(
            topo,
            WpaxosNode::factory(vec![Value::One; 4], WpaxosConfig::new(4)),
            SyncScheduler,
            SimConfig::new(1).run_to_quiescence(),
        )
        .unwrap();
        while engine.step(1000).unwrap() {}
        for i in 0..4u32 {
            let node = engine.node(NodeId(i));
            assert_eq!(node.omega(), NodeId(3));
            assert_eq!(node.dist(NodeId(3)), Some(3 - i));
        }
    }

    #[test]
    fn clique_of_three_decides_leader_value() {
        let topo = Arc::new(build_clique(3).unwrap());
        let values = vec![Value::Zero, Value::Zero, Value::One];
        let trace = run_simulation(
            topo,
            WpaxosNode::factory(values, WpaxosConfig::new(3)),
            SyncScheduler,
            SimConfig::new(1),
            1000,
        )
        .unwrap();
        assert!(trace.terminated);
        let decided = trace.decided_values();
        assert!(decided.iter().all(|d| *d == decided[0]));
        // The eventual leader proposes its own value unless it adopted one.
        assert!(decided[0].is_some());
    }

    #[test]
    fn decides_under_random_and_max_delay() {
        for seed in 0..20 {
            let topo = Arc::new(build_line(4).unwrap());
            let values: Vec<Value> = (0..5).map(|i| Value::from((i + seed) % 2 == 0)).collect();
            let trace = run_simulation(
                Arc::clone(&topo),
                WpaxosNode::factory(values.clone(), WpaxosConfig::new(5)),
                RandomScheduler::new(seed as u64),
                SimConfig::new(3),
                100_000,
            )
            .unwrap();
            assert!(trace.terminated, "seed {seed}");
            let trace = run_simulation(
                topo,
                WpaxosNode::factory(values, WpaxosConfig::new(5)),
                MaxDelayScheduler,
                SimConfig::new(3),
                100_000,
            )
            .unwrap();
            assert!(trace.terminated);
        }
    }
}
