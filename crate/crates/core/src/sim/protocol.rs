use std::collections::hash_map::DefaultHasher;
use std::fmt::Debug;
use std::hash::Hash;

use crate::types::{NodeId, Time, Value};

/// A message as it appears on the wire.
pub trait WireMessage: Clone + Debug + Hash + Send + Sync {
    /// Number of node-id valued fields carried, including the id inside any
    /// proposal number. Bounded by `SimConfig::id_capacity`.
    fn id_fields(&self) -> usize;

    /// Short human-readable rendering for trace exports.
    fn summary(&self) -> String;
}

/// Deterministic per-node logic driven by the engine.
///
/// Callbacks run in zero virtual time. A node learns nothing about the
/// network except through `on_receive` and `on_ack`.
pub trait Protocol: Clone + Send {
    type Msg: WireMessage;
    /// Per-step observation recorded in the trace for protocol-specific
    /// checkers.
    type Probe: Clone + Debug + Send;

    fn on_init(&mut self, ctx: &mut NodeCtx<Self::Msg>);
    fn on_receive(&mut self, from: NodeId, msg: &Self::Msg, ctx: &mut NodeCtx<Self::Msg>);
    fn on_ack(&mut self, ctx: &mut NodeCtx<Self::Msg>);

    /// Feeds the protocol state into `hasher`. With `anonymous` set, the
    /// node's own id must not be hashed.
    fn hash_state(&self, hasher: &mut DefaultHasher, anonymous: bool);

    fn initial_value(&self) -> Option<Value>;

    /// Drains the observation accumulated since the last call.
    fn take_probe(&mut self) -> Option<Self::Probe> {
        None
    }
}

/// What a node may do during one callback.
#[derive(Debug)]
pub struct NodeCtx<M> {
    now: Time,
    busy: bool,
    outbox: Option<M>,
    discarded: usize,
    decision: Option<Value>,
}

impl<M> NodeCtx<M> {
    pub(crate) fn new(now: Time, busy: bool) -> Self {
        NodeCtx {
            now,
            busy,
            outbox: None,
            discarded: 0,
            decision: None,
        }
    }

    pub fn now(&self) -> Time {
        self.now
    }

    /// True while a previous broadcast is awaiting its ack.
    pub fn is_busy(&self) -> bool {
        self.busy || self.outbox.is_some()
    }

    /// Starts a broadcast. Returns `false`, discarding `msg`, if one is
    /// already in flight.
    pub fn broadcast(&mut self, msg: M) -> bool {
        if self.is_busy() {
            self.discarded += 1;
            false
        } else {
            self.outbox = Some(msg);
            true
        }
    }

    /// Records a decision. Only the first call within one callback counts;
    /// the engine logs every callback that decides, so re-deciding is visible
    /// to checkers.
    pub fn decide(&mut self, value: Value) {
        if self.decision.is_none() {
            self.decision = Some(value);
        }
    }

    pub(crate) fn into_parts(self) -> (Option<M>, usize, Option<Value>) {
        (self.outbox, self.discarded, self.decision)
    }
}

/// Digest of a protocol state.
pub fn state_digest<P: Protocol>(p: &P, anonymous: bool) -> u64 {
    use std::hash::Hasher;
    let mut h = DefaultHasher::new();
    p.hash_state(&mut h, anonymous);
    h.finish()
}
