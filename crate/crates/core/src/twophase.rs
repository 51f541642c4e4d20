//! Two-phase consensus for single-hop networks with unique ids and no
//! knowledge of `n`.
//!
//! Phase 1 broadcasts `(id, value)`. When it is acked, a node that has seen
//! a different value or a bivalent phase-2 message becomes bivalent;
//! otherwise it is decided on its own value. Phase 2 broadcasts the status.
//! A decided node decides as soon as phase 2 is acked. A bivalent node
//! freezes the set `W` of every id it has heard from and waits for a phase-2
//! message from each; it then decides 0 if it holds any decided(0) status,
//! and 1 otherwise.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{NodeCtx, Protocol, WireMessage};
use crate::types::{NodeId, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Status {
    Bivalent,
    Decided(Value),
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Bivalent => write!(f, "bivalent"),
            Status::Decided(v) => write!(f, "decided({v})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TwoPhaseMsg {
    Phase1 { id: NodeId, value: Value },
    Phase2 { id: NodeId, status: Status },
}

impl TwoPhaseMsg {
    pub fn id(&self) -> NodeId {
        match *self {
            TwoPhaseMsg::Phase1 { id, .. } | TwoPhaseMsg::Phase2 { id, .. } => id,
        }
    }

    pub fn status(&self) -> Option<Status> {
        match *self {
            TwoPhaseMsg::Phase2 { status, .. } => Some(status),
            TwoPhaseMsg::Phase1 { .. } => None,
        }
    }
}

impl WireMessage for TwoPhaseMsg {
    fn id_fields(&self) -> usize {
        1
    }

    fn summary(&self) -> String {
        match self {
            TwoPhaseMsg::Phase1 { id, value } => format!("phase1({id},{value})"),
            TwoPhaseMsg::Phase2 { id, status } => format!("phase2({id},{status})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    One,
    Two,
    WitnessWait,
    Done,
}

/// Where a bivalent node looks for decided(0) statuses once its witnesses
/// are complete.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum DecidedZeroSource {
    /// Every phase-2 message held, including those that arrived before the
    /// node's own phase-1 ack.
    #[default]
    AllReceived,
    /// Only phase-2 messages that arrived after the phase-1 ack. Breaks
    /// agreement; kept so the explorer can demonstrate it.
    AfterPhaseOneOnly,
}

/// Deliberate bugs for mutation testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TwoPhaseFault {
    /// Decide the initial value at the phase-1 ack and advertise it as
    /// decided, ignoring any evidence of the other value.
    PrematureDecide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TwoPhaseOptions {
    /// Decided nodes decide right after their phase-2 ack instead of also
    /// waiting on their witnesses.
    pub early_decide: bool,
    pub decided_zero_source: DecidedZeroSource,
    pub fault: Option<TwoPhaseFault>,
}

impl Default for TwoPhaseOptions {
    fn default() -> Self {
        TwoPhaseOptions {
            early_decide: true,
            decided_zero_source: DecidedZeroSource::AllReceived,
            fault: None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TwoPhaseError {
    #[error("node {0} was already started")]
    AlreadyStarted(NodeId),
}

#[derive(Debug, Clone)]
pub struct TwoPhaseNode {
    id: NodeId,
    value: Value,
    options: TwoPhaseOptions,
    phase: Phase,
    r1: BTreeSet<TwoPhaseMsg>,
    r2: BTreeSet<TwoPhaseMsg>,
    status: Option<Status>,
    witnesses: Option<BTreeSet<NodeId>>,
    decision: Option<Value>,
}

impl TwoPhaseNode {
    pub fn new(id: NodeId, value: Value) -> Self {
        Self::with_options(id, value, TwoPhaseOptions::default())
    }

    pub fn with_options(id: NodeId, value: Value, options: TwoPhaseOptions) -> Self {
        TwoPhaseNode {
            id,
            value,
            options,
            phase: Phase::Idle,
            r1: BTreeSet::new(),
            r2: BTreeSet::new(),
            status: None,
            witnesses: None,
            decision: None,
        }
    }

    /// Factory over per-node initial values.
    pub fn factory(values: Vec<Value>, options: TwoPhaseOptions) -> impl FnMut(NodeId) -> TwoPhaseNode + Clone {
        move |u| TwoPhaseNode::with_options(u, values[u.index()], options)
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn status(&self) -> Option<Status> {
        self.status
    }

    pub fn witnesses(&self) -> Option<&BTreeSet<NodeId>> {
        self.witnesses.as_ref()
    }

    pub fn decision(&self) -> Option<Value> {
        self.decision
    }

    pub fn r1(&self) -> &BTreeSet<TwoPhaseMsg> {
        &self.r1
    }

    pub fn r2(&self) -> &BTreeSet<TwoPhaseMsg> {
        &self.r2
    }

    /// Seeds `R1` with the node's own phase-1 message and returns it.
    pub fn start(&mut self) -> Result<TwoPhaseMsg, TwoPhaseError> {
        if self.phase != Phase::Idle {
            return Err(TwoPhaseError::AlreadyStarted(self.id));
        }
        let own = TwoPhaseMsg::Phase1 {
            id: self.id,
            value: self.value,
        };
        self.r1.insert(own);
        self.phase = Phase::One;
        Ok(own)
    }

    fn evidence_of_other_value(&self) -> bool {
        let other = self.value.flip();
        self.r1.iter().any(|m| match *m {
            TwoPhaseMsg::Phase1 { value, .. } => value == other,
            TwoPhaseMsg::Phase2 { status, .. } => status == Status::Bivalent,
        })
    }

    fn finish_phase_one(&mut self, ctx: &mut NodeCtx<TwoPhaseMsg>) {
        let status = if self.options.fault == Some(TwoPhaseFault::PrematureDecide) {
            self.decide(self.value, ctx);
            Status::Decided(self.value)
        } else if self.evidence_of_other_value() {
            Status::Bivalent
        } else {
            Status::Decided(self.value)
        };
        self.status = Some(status);
        let own = TwoPhaseMsg::Phase2 { id: self.id, status };
        self.r2.insert(own);
        self.phase = Phase::Two;
        ctx.broadcast(own);
    }

    fn finish_phase_two(&mut self, ctx: &mut NodeCtx<TwoPhaseMsg>) {
        if let (true, Some(Status::Decided(v))) = (self.options.early_decide, self.status) {
            self.decide(v, ctx);
            self.phase = Phase::Done;
            return;
        }
        let w = self.r1.iter().chain(&self.r2).map(TwoPhaseMsg::id).collect();
        self.witnesses = Some(w);
        self.phase = Phase::WitnessWait;
        self.try_finish(ctx);
    }

    fn try_finish(&mut self, ctx: &mut NodeCtx<TwoPhaseMsg>) {
        let Some(w) = &self.witnesses else { return };
        let heard: BTreeSet<NodeId> = self
            .r1
            .iter()
            .chain(&self.r2)
            .filter(|m| m.status().is_some())
            .map(TwoPhaseMsg::id)
            .collect();
        if !w.is_subset(&heard) {
            return;
        }
        let zero = Some(Status::Decided(Value::Zero));
        let saw_zero = match self.options.decided_zero_source {
            DecidedZeroSource::AllReceived => self.r1.iter().chain(&self.r2).any(|m| m.status() == zero),
            DecidedZeroSource::AfterPhaseOneOnly => self.r2.iter().any(|m| m.status() == zero),
        };
        self.decide(if saw_zero { Value::Zero } else { Value::One }, ctx);
        self.phase = Phase::Done;
    }

    fn decide(&mut self, v: Value, ctx: &mut NodeCtx<TwoPhaseMsg>) {
        if self.decision.is_none() {
            self.decision = Some(v);
            ctx.decide(v);
        }
    }
}

impl Protocol for TwoPhaseNode {
    type Msg = TwoPhaseMsg;
    type Probe = ();

    fn on_init(&mut self, ctx: &mut NodeCtx<TwoPhaseMsg>) {
        let own = self.start().expect("two-phase node initialized twice");
        ctx.broadcast(own);
    }

    fn on_receive(&mut self, _from: NodeId, msg: &TwoPhaseMsg, ctx: &mut NodeCtx<TwoPhaseMsg>) {
        match self.phase {
            Phase::One => {
                self.r1.insert(*msg);
            }
            Phase::Two => {
                self.r2.insert(*msg);
            }
            Phase::WitnessWait => {
                if msg.status().is_some() {
                    self.r2.insert(*msg);
                    self.try_finish(ctx);
                }
            }
            Phase::Idle | Phase::Done => {}
        }
    }

    fn on_ack(&mut self, ctx: &mut NodeCtx<TwoPhaseMsg>) {
        match self.phase {
            Phase::One => self.finish_phase_one(ctx),
            Phase::Two => self.finish_phase_two(ctx),
            _ => {}
        }
    }

    fn hash_state(&self, h: &mut DefaultHasher, anonymous: bool) {
        if !anonymous {
            self.id.hash(h);
        }
        self.value.hash(h);
        self.phase.hash(h);
        self.r1.hash(h);
        self.r2.hash(h);
        self.status.hash(h);
        self.witnesses.hash(h);
        self.decision.hash(h);
    }

    fn initial_value(&self) -> Option<Value> {
        Some(self.value)
    }
}
