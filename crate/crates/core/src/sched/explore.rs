//! Exhaustive exploration of valid-step interleavings.
//!
//! Every pending broadcast has exactly one next valid step: a receive at the
//! smallest non-crashed neighbour that has not yet received it, or the ack
//! once every non-crashed neighbour has. The explorer branches over which
//! sender moves next and, within the crash budget, over which node crashes.
//! A crash keeps the receives that already happened and cancels the rest.

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, HashSet};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::sim::{
    BroadcastInstance, EventKind, ExecutionTrace, NodeCtx, ProbeRecord, Protocol, SimConfig, SimEvent, StateRecord,
};
use crate::topology::Topology;
use crate::types::{NodeId, Time, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ValidStep {
    Receive { target: NodeId, sender: NodeId },
    Ack { sender: NodeId },
    Crash { node: NodeId },
}

#[derive(Debug, Clone)]
pub struct ExploreConfig {
    /// Maximum number of steps along any path.
    pub depth: usize,
    pub crash_budget: usize,
    /// Skip states already explored at the same or smaller depth.
    pub memoize: bool,
    /// Stop after visiting this many states; the result is then flagged
    /// truncated.
    pub max_states: usize,
    /// Keep every maximal step sequence. Only meaningful without memoization.
    pub collect_prefixes: bool,
}

impl ExploreConfig {
    pub fn new(depth: usize) -> Self {
        ExploreConfig {
            depth,
            crash_budget: 0,
            memoize: true,
            max_states: 2_000_000,
            collect_prefixes: false,
        }
    }

    pub fn crash_budget(mut self, budget: usize) -> Self {
        self.crash_budget = budget;
        self
    }

    /// Plain tree enumeration that records every maximal prefix.
    pub fn enumerate_prefixes(mut self) -> Self {
        self.memoize = false;
        self.collect_prefixes = true;
        self
    }
}

/// A state where exploration ended along some path.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub decisions: Vec<Option<Value>>,
    pub crashed: Vec<bool>,
    /// Steps leading here from the initial configuration.
    pub path: Vec<ValidStep>,
    /// A node tried to decide a second, different value.
    pub redecided: bool,
}

impl Outcome {
    pub fn all_live_decided(&self) -> bool {
        self.decisions.iter().zip(&self.crashed).all(|(d, &c)| c || d.is_some())
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ExploreResult {
    pub initial_values: Vec<Option<Value>>,
    pub states_visited: usize,
    /// Complete executions: every live node decided.
    pub terminals: Vec<Outcome>,
    /// Executions with no valid step left but some live node undecided.
    pub stuck: Vec<Outcome>,
    /// Paths cut at the depth bound.
    pub cutoff: usize,
    pub truncated: bool,
    pub prefixes: Vec<Vec<ValidStep>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValenceStats {
    pub states: usize,
    pub bivalent: usize,
    pub univalent_zero: usize,
    pub univalent_one: usize,
    /// No decision reachable (for example, blocked after a crash).
    pub nullvalent: usize,
    /// Bivalent states with at least one crash step still available.
    pub bivalent_with_crash_budget: usize,
    pub initial: Valence,
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum Valence {
    #[default]
    None,
    Zero,
    One,
    Both,
}

impl Valence {
    fn from_bits(bits: u8) -> Valence {
        match bits & 3 {
            0 => Valence::None,
            1 => Valence::Zero,
            2 => Valence::One,
            _ => Valence::Both,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExploreError {
    #[error("step {index} ({step:?}) is not valid in the execution so far")]
    InvalidStep { index: usize, step: ValidStep },
}

#[derive(Debug, Clone)]
struct Pending<M> {
    seq: u64,
    msg: M,
    received: Vec<bool>,
    instance: usize,
}

#[derive(Clone)]
struct ExState<P: Protocol> {
    nodes: Vec<P>,
    pending: Vec<Option<Pending<P::Msg>>>,
    crashed: Vec<bool>,
    decisions: Vec<Option<Value>>,
    crashes_used: usize,
    seqs: Vec<u64>,
    steps: usize,
    redecided: bool,
}

/// Trace under construction during replay.
struct Recorder<P: Protocol> {
    events: Vec<SimEvent>,
    broadcasts: Vec<BroadcastInstance<P::Msg>>,
    state_hashes: Vec<StateRecord>,
    probes: Vec<ProbeRecord<P::Probe>>,
    decisions: Vec<Option<(Value, Time)>>,
    step: u64,
}

impl<P: Protocol> ExState<P> {
    fn init(topology: &Topology, factory: &mut dyn FnMut(NodeId) -> P, mut rec: Option<&mut Recorder<P>>) -> Self {
        let n = topology.n();
        let mut s = ExState {
            nodes: topology.nodes().map(&mut *factory).collect(),
            pending: vec![None; n],
            crashed: vec![false; n],
            decisions: vec![None; n],
            crashes_used: 0,
            seqs: vec![0; n],
            steps: 0,
            redecided: false,
        };
        for u in topology.nodes() {
            let mut ctx = NodeCtx::new(0, false);
            s.nodes[u.index()].on_init(&mut ctx);
            s.after(u, ctx, topology, rec.as_deref_mut());
        }
        s
    }

    fn terminal(&self) -> bool {
        self.decisions.iter().zip(&self.crashed).all(|(d, &c)| c || d.is_some())
    }

    fn valid_steps(&self, topology: &Topology, crash_budget: usize) -> Vec<ValidStep> {
        let mut out = Vec::new();
        for u in topology.nodes() {
            if self.crashed[u.index()] {
                continue;
            }
            let Some(p) = &self.pending[u.index()] else { continue };
            let next = topology
                .neighbors(u)
                .iter()
                .enumerate()
                .find(|&(i, v)| !p.received[i] && !self.crashed[v.index()]);
            out.push(match next {
                Some((_, &v)) => ValidStep::Receive { target: v, sender: u },
                None => ValidStep::Ack { sender: u },
            });
        }
        if self.crashes_used < crash_budget {
            for u in topology.nodes() {
                if !self.crashed[u.index()] {
                    out.push(ValidStep::Crash { node: u });
                }
            }
        }
        out
    }

    fn apply(&mut self, step: ValidStep, topology: &Topology, mut rec: Option<&mut Recorder<P>>) {
        self.steps += 1;
        let now = self.steps as Time;
        if let Some(r) = rec.as_deref_mut() {
            r.step += 1;
        }
        match step {
            ValidStep::Receive { target, sender } => {
                let p = self.pending[sender.index()].as_mut().expect("valid receive");
                let slot = topology
                    .neighbors(sender)
                    .iter()
                    .position(|&v| v == target)
                    .expect("receiver is a neighbour");
                p.received[slot] = true;
                let msg = p.msg.clone();
                let (seq, instance) = (p.seq, p.instance);
                if let Some(r) = rec.as_deref_mut() {
                    r.events.push(SimEvent {
                        step: r.step,
                        time: now,
                        kind: EventKind::Receive {
                            target,
                            sender,
                            seq,
                            instance,
                        },
                    });
                    r.broadcasts[instance].receivers.push((target, now));
                }
                let mut ctx = NodeCtx::new(now, self.pending[target.index()].is_some());
                self.nodes[target.index()].on_receive(sender, &msg, &mut ctx);
                self.after(target, ctx, topology, rec);
            }
            ValidStep::Ack { sender } => {
                let p = self.pending[sender.index()].take().expect("valid ack");
                if let Some(r) = rec.as_deref_mut() {
                    r.events.push(SimEvent {
                        step: r.step,
                        time: now,
                        kind: EventKind::Ack {
                            sender,
                            seq: p.seq,
                            instance: p.instance,
                        },
                    });
                    let b = &mut r.broadcasts[p.instance];
                    b.acked = true;
                    b.ack_time = now;
                }
                let mut ctx = NodeCtx::new(now, false);
                self.nodes[sender.index()].on_ack(&mut ctx);
                self.after(sender, ctx, topology, rec);
            }
            ValidStep::Crash { node } => {
                self.crashed[node.index()] = true;
                self.crashes_used += 1;
                self.pending[node.index()] = None;
                if let Some(r) = rec {
                    r.events.push(SimEvent {
                        step: r.step,
                        time: now,
                        kind: EventKind::Crash { node },
                    });
                }
            }
        }
    }

    fn after(&mut self, u: NodeId, ctx: NodeCtx<P::Msg>, topology: &Topology, mut rec: Option<&mut Recorder<P>>) {
        let now = self.steps as Time;
        let (outbox, _, decision) = ctx.into_parts();
        let trigger_step = rec.as_deref().map_or(0, |r| r.step);
        if let Some(v) = decision {
            match self.decisions[u.index()] {
                None => self.decisions[u.index()] = Some(v),
                Some(prev) if prev != v => self.redecided = true,
                Some(_) => {}
            }
            if let Some(r) = rec.as_deref_mut() {
                r.step += 1;
                r.events.push(SimEvent {
                    step: r.step,
                    time: now,
                    kind: EventKind::Decide { node: u, value: v },
                });
                r.decisions[u.index()].get_or_insert((v, now));
            }
        }
        if let Some(msg) = outbox {
            if self.pending[u.index()].is_none() {
                let seq = self.seqs[u.index()];
                self.seqs[u.index()] += 1;
                let instance = match rec.as_deref_mut() {
                    Some(r) => {
                        r.broadcasts.push(BroadcastInstance {
                            sender: u,
                            seq,
                            payload: msg.clone(),
                            issue_time: now,
                            issue_step: trigger_step,
                            release_time: now,
                            ack_time: 0,
                            receivers: Vec::new(),
                            acked: false,
                        });
                        r.broadcasts.len() - 1
                    }
                    None => 0,
                };
                self.pending[u.index()] = Some(Pending {
                    seq,
                    msg,
                    received: vec![false; topology.degree(u)],
                    instance,
                });
            }
        }
        if let Some(r) = rec {
            let node = &mut self.nodes[u.index()];
            r.state_hashes.push(StateRecord {
                step: trigger_step,
                time: now,
                node: u,
                digest: crate::sim::state_digest(node, false),
            });
            if let Some(probe) = node.take_probe() {
                r.probes.push(ProbeRecord {
                    step: trigger_step,
                    time: now,
                    node: u,
                    probe,
                });
            }
        }
    }

    fn digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for node in &self.nodes {
            node.hash_state(&mut h, false);
        }
        for p in &self.pending {
            match p {
                None => 0u8.hash(&mut h),
                Some(p) => {
                    1u8.hash(&mut h);
                    p.msg.hash(&mut h);
                    p.received.hash(&mut h);
                }
            }
        }
        self.crashed.hash(&mut h);
        self.decisions.hash(&mut h);
        self.crashes_used.hash(&mut h);
        self.redecided.hash(&mut h);
        h.finish()
    }

    fn outcome(&self, path: &[ValidStep]) -> Outcome {
        Outcome {
            decisions: self.decisions.clone(),
            crashed: self.crashed.clone(),
            path: path.to_vec(),
            redecided: self.redecided,
        }
    }
}

/// Valid-step explorer over one topology and protocol.
pub struct Explorer<P: Protocol> {
    topology: Arc<Topology>,
    root: ExState<P>,
    config: ExploreConfig,
}

impl<P: Protocol> Explorer<P> {
    pub fn new(topology: Arc<Topology>, mut factory: impl FnMut(NodeId) -> P, config: ExploreConfig) -> Self {
        let root = ExState::init(&topology, &mut factory, None);
        Explorer { topology, root, config }
    }

    pub fn run(&self) -> ExploreResult {
        let mut result = ExploreResult {
            initial_values: self.root.nodes.iter().map(Protocol::initial_value).collect(),
            ..Default::default()
        };
        let mut seen: HashMap<u64, usize> = HashMap::new();
        let mut path = Vec::new();
        self.dfs(&self.root, &mut path, &mut seen, &mut result);
        result
    }

    fn dfs(
        &self,
        state: &ExState<P>,
        path: &mut Vec<ValidStep>,
        seen: &mut HashMap<u64, usize>,
        result: &mut ExploreResult,
    ) {
        if result.states_visited >= self.config.max_states {
            result.truncated = true;
            return;
        }
        if self.config.memoize {
            let key = state.digest();
            match seen.get(&key) {
                Some(&d) if d <= path.len() => return,
                _ => {
                    seen.insert(key, path.len());
                }
            }
        }
        result.states_visited += 1;
        if state.terminal() {
            result.terminals.push(state.outcome(path));
            self.leaf(path, result);
            return;
        }
        let steps = state.valid_steps(&self.topology, self.config.crash_budget);
        if steps.iter().all(|s| matches!(s, ValidStep::Crash { .. })) {
            // Nothing left to deliver; crashing more nodes cannot help.
            result.stuck.push(state.outcome(path));
            self.leaf(path, result);
            return;
        }
        if path.len() >= self.config.depth {
            result.cutoff += 1;
            self.leaf(path, result);
            return;
        }
        for step in steps {
            let mut next = state.clone();
            next.apply(step, &self.topology, None);
            path.push(step);
            self.dfs(&next, path, seen, result);
            path.pop();
        }
    }

    fn leaf(&self, path: &[ValidStep], result: &mut ExploreResult) {
        if self.config.collect_prefixes {
            result.prefixes.push(path.to_vec());
        }
    }

    /// Classifies every reachable state by the set of decision values
    /// reachable from it.
    pub fn valence(&self) -> ValenceStats {
        let mut memo: HashMap<u64, u8> = HashMap::new();
        let mut stats = ValenceStats::default();
        let mut on_stack = HashSet::new();
        let bits = self.valence_dfs(&self.root, 0, &mut memo, &mut on_stack, &mut stats);
        stats.initial = Valence::from_bits(bits);
        stats
    }

    fn valence_dfs(
        &self,
        state: &ExState<P>,
        depth: usize,
        memo: &mut HashMap<u64, u8>,
        on_stack: &mut HashSet<u64>,
        stats: &mut ValenceStats,
    ) -> u8 {
        let key = state.digest();
        if let Some(&bits) = memo.get(&key) {
            return bits;
        }
        if memo.len() >= self.config.max_states || !on_stack.insert(key) {
            stats.truncated = true;
            return 0;
        }
        let bits = if state.terminal() {
            state
                .decisions
                .iter()
                .flatten()
                .fold(0u8, |acc, v| acc | (1 << v.as_u8()))
        } else if depth >= self.config.depth {
            stats.truncated = true;
            0
        } else {
            let mut acc = 0u8;
            for step in state.valid_steps(&self.topology, self.config.crash_budget) {
                let mut next = state.clone();
                next.apply(step, &self.topology, None);
                acc |= self.valence_dfs(&next, depth + 1, memo, on_stack, stats);
            }
            acc
        };
        on_stack.remove(&key);
        memo.insert(key, bits);
        stats.states += 1;
        match Valence::from_bits(bits) {
            Valence::Both => {
                stats.bivalent += 1;
                if state.crashes_used < self.config.crash_budget {
                    stats.bivalent_with_crash_budget += 1;
                }
            }
            Valence::Zero => stats.univalent_zero += 1,
            Valence::One => stats.univalent_one += 1,
            Valence::None => stats.nullvalent += 1,
        }
        bits
    }
}

/// Explores every valid interleaving up to `depth` steps with at most
/// `crash_budget` crashes, memoizing by global state.
pub fn enumerate_valid_executions<P: Protocol>(
    topology: Arc<Topology>,
    factory: impl FnMut(NodeId) -> P,
    crash_budget: usize,
    depth: usize,
) -> ExploreResult {
    Explorer::new(topology, factory, ExploreConfig::new(depth).crash_budget(crash_budget)).run()
}

/// Re-executes a step sequence and records it as a trace, with virtual time
/// equal to the step index.
pub fn replay<P: Protocol>(
    topology: Arc<Topology>,
    mut factory: impl FnMut(NodeId) -> P,
    steps: &[ValidStep],
) -> Result<ExecutionTrace<P>, ExploreError> {
    let n = topology.n();
    let mut rec = Recorder {
        events: Vec::new(),
        broadcasts: Vec::new(),
        state_hashes: Vec::new(),
        probes: Vec::new(),
        decisions: vec![None; n],
        step: 0,
    };
    let mut state = ExState::init(&topology, &mut factory, Some(&mut rec));
    let initial_values = state.nodes.iter().map(Protocol::initial_value).collect();
    for (index, &step) in steps.iter().enumerate() {
        if !state.valid_steps(&topology, usize::MAX).contains(&step) {
            return Err(ExploreError::InvalidStep { index, step });
        }
        state.apply(step, &topology, Some(&mut rec));
    }
    let end_time = state.steps as Time;
    let mut effective = 0;
    for b in rec.broadcasts.iter_mut() {
        if b.acked {
            effective = effective.max(b.ack_time - b.issue_time);
        } else {
            // Unacked (crashed or cut off): its window is still open.
            b.ack_time = b.receivers.iter().map(|&(_, t)| t).max().unwrap_or(b.issue_time + 1);
        }
    }
    let f_ack = effective.max(end_time).max(1);
    Ok(ExecutionTrace {
        config: SimConfig::new(f_ack),
        topology,
        scheduler: format!("valid-steps:{}", steps.len()),
        initial_values,
        events: rec.events,
        broadcasts: rec.broadcasts,
        state_hashes: rec.state_hashes,
        probes: rec.probes,
        decisions: rec.decisions,
        crashed: state.crashed.clone(),
        terminated: state.terminal(),
        abort: None,
        discarded_broadcasts: 0,
        end_time,
        horizon: end_time,
        effective_f_ack: effective,
    })
}
