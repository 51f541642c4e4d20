//! Flooding protocols that are correct under the synchronous scheduler on
//! their intended networks but carry no guarantee otherwise. They serve as
//! concrete subjects for the partition demonstrations: an algorithm without
//! ids on the gadget networks, and an algorithm without knowledge of `n` on
//! `K_D`.

use std::collections::hash_map::DefaultHasher;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::sim::{NodeCtx, Protocol, WireMessage};
use crate::types::{NodeId, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MinValue(pub Value);

impl WireMessage for MinValue {
    fn id_fields(&self) -> usize {
        0
    }

    fn summary(&self) -> String {
        format!("min({})", self.0)
    }
}

/// Anonymous flooding: rebroadcast the smallest value seen, and decide it
/// after `rounds` acks. Never reads its own id.
#[derive(Debug, Clone)]
pub struct AnonFlooder {
    id: NodeId,
    initial: Value,
    min: Value,
    rounds: usize,
    acks: usize,
    decided: Option<Value>,
}

impl AnonFlooder {
    /// `rounds` is normally the network diameter.
    pub fn new(id: NodeId, initial: Value, rounds: usize) -> Self {
        AnonFlooder {
            id,
            initial,
            min: initial,
            rounds,
            acks: 0,
            decided: None,
        }
    }

    pub fn factory(values: Vec<Value>, rounds: usize) -> impl FnMut(NodeId) -> AnonFlooder + Clone {
        move |u| AnonFlooder::new(u, values[u.index()], rounds)
    }

    pub fn current_min(&self) -> Value {
        self.min
    }

    fn step(&mut self, ctx: &mut NodeCtx<MinValue>) {
        if self.acks >= self.rounds {
            self.decided = Some(self.min);
            ctx.decide(self.min);
        } else {
            ctx.broadcast(MinValue(self.min));
        }
    }
}

impl Protocol for AnonFlooder {
    type Msg = MinValue;
    type Probe = ();

    fn on_init(&mut self, ctx: &mut NodeCtx<MinValue>) {
        self.step(ctx);
    }

    fn on_receive(&mut self, _from: NodeId, msg: &MinValue, _ctx: &mut NodeCtx<MinValue>) {
        if self.decided.is_none() {
            self.min = self.min.min(msg.0);
        }
    }

    fn on_ack(&mut self, ctx: &mut NodeCtx<MinValue>) {
        if self.decided.is_none() {
            self.acks += 1;
            self.step(ctx);
        }
    }

    fn hash_state(&self, h: &mut DefaultHasher, anonymous: bool) {
        if !anonymous {
            self.id.hash(h);
        }
        self.initial.hash(h);
        self.min.hash(h);
        self.rounds.hash(h);
        self.acks.hash(h);
        self.decided.hash(h);
    }

    fn initial_value(&self) -> Option<Value> {
        Some(self.initial)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LeaderValue {
    pub leader: NodeId,
    pub value: Value,
}

impl WireMessage for LeaderValue {
    fn id_fields(&self) -> usize {
        1
    }

    fn summary(&self) -> String {
        format!("leader({},{})", self.leader, self.value)
    }
}

/// Id-based flooding without knowledge of `n`: adopt the initial value of
/// the smallest id heard of, and decide it after `rounds` acks.
#[derive(Debug, Clone)]
pub struct IdFlooder {
    id: NodeId,
    initial: Value,
    best: LeaderValue,
    rounds: usize,
    acks: usize,
    decided: Option<Value>,
}

impl IdFlooder {
    pub fn new(id: NodeId, initial: Value, rounds: usize) -> Self {
        IdFlooder {
            id,
            initial,
            best: LeaderValue {
                leader: id,
                value: initial,
            },
            rounds,
            acks: 0,
            decided: None,
        }
    }

    pub fn factory(values: Vec<Value>, rounds: usize) -> impl FnMut(NodeId) -> IdFlooder + Clone {
        move |u| IdFlooder::new(u, values[u.index()], rounds)
    }

    pub fn leader(&self) -> NodeId {
        self.best.leader
    }

    fn step(&mut self, ctx: &mut NodeCtx<LeaderValue>) {
        if self.acks >= self.rounds {
            self.decided = Some(self.best.value);
            ctx.decide(self.best.value);
        } else {
            ctx.broadcast(self.best);
        }
    }
}

impl Protocol for IdFlooder {
    type Msg = LeaderValue;
    type Probe = ();

    fn on_init(&mut self, ctx: &mut NodeCtx<LeaderValue>) {
        self.step(ctx);
    }

    fn on_receive(&mut self, _from: NodeId, msg: &LeaderValue, _ctx: &mut NodeCtx<LeaderValue>) {
        if self.decided.is_none() && msg.leader < self.best.leader {
            self.best = *msg;
        }
    }

    fn on_ack(&mut self, ctx: &mut NodeCtx<LeaderValue>) {
        if self.decided.is_none() {
            self.acks += 1;
            self.step(ctx);
        }
    }

    fn hash_state(&self, h: &mut DefaultHasher, anonymous: bool) {
        if !anonymous {
            self.id.hash(h);
        }
        self.initial.hash(h);
        self.best.hash(h);
        self.rounds.hash(h);
        self.acks.hash(h);
        self.decided.hash(h);
    }

    fn initial_value(&self) -> Option<Value> {
        Some(self.initial)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::sched::SyncScheduler;
    use crate::sim::{run_simulation, SimConfig};
    use crate::topology::{build_line, build_network_b};

    #[test]
    fn anon_flooder_agrees_on_line_under_sync() {
        let topo = Arc::new(build_line(5).unwrap());
        let values = vec![Value::One, Value::One, Value::One, Value::One, Value::One, Value::Zero];
        let trace = run_simulation(
            topo,
            AnonFlooder::factory(values, 5),
            SyncScheduler,
            SimConfig::new(1).anonymous(),
            100,
        )
        .unwrap();
        assert!(trace.terminated);
        assert!(trace.decided_values().iter().all(|d| *d == Some(Value::Zero)));
        assert_eq!(trace.decision_time(), Some(5));
    }

    #[test]
    fn anon_flooder_decides_uniform_input_on_network_b() {
        let (b, _) = build_network_b(6, 6).unwrap();
        let n = b.n();
        let trace = run_simulation(
            Arc::new(b),
            AnonFlooder::factory(vec![Value::One; n], 6),
            SyncScheduler,
            SimConfig::new(1).anonymous(),
            100,
        )
        .unwrap();
        assert!(trace.decided_values().iter().all(|d| *d == Some(Value::One)));
    }

    #[test]
    fn id_flooder_follows_smallest_id() {
        let topo = Arc::new(build_line(3).unwrap());
        let values = vec![Value::One, Value::Zero, Value::Zero, Value::Zero];
        let trace = run_simulation(
            topo,
            IdFlooder::factory(values, 3),
            SyncScheduler,
            SimConfig::new(1),
            100,
        )
        .unwrap();
        assert!(trace.decided_values().iter().all(|d| *d == Some(Value::One)));
    }

    #[test]
    fn message_id_counts() {
        assert_eq!(MinValue(Value::Zero).id_fields(), 0);
        let m = LeaderValue {
            leader: NodeId(2),
            value: Value::One,
        };
        assert_eq!(m.id_fields(), 1);
    }
}
