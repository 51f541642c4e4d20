use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::sync::Arc;

use super::config::SimConfig;
use super::protocol::{state_digest, NodeCtx, Protocol, WireMessage};
use super::trace::{BroadcastInstance, EventKind, ExecutionTrace, ProbeRecord, SimEvent, StateRecord};
use super::SimError;
use crate::sched::{BroadcastRequest, Scheduler};
use crate::topology::Topology;
use crate::types::{NodeId, Time, Value};

const RANK_RECEIVE: u8 = 0;
const RANK_ACK: u8 = 1;
const RANK_CRASH: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct QueueKey {
    time: Time,
    rank: u8,
    node: NodeId,
    seq: u64,
    sender: NodeId,
    /// Broadcast index for receives and acks, crash-plan index for crashes.
    slot: usize,
}

/// Event loop for one run. Owns its protocols and scheduler; move it to
/// another thread freely, but do not share it.
pub struct Engine<P: Protocol, S: Scheduler> {
    topology: Arc<Topology>,
    config: SimConfig,
    scheduler: S,
    nodes: Vec<P>,
    queue: BinaryHeap<Reverse<QueueKey>>,
    now: Time,
    step: u64,
    next_seq: Vec<u64>,
    in_flight: Vec<Option<usize>>,
    crashed: Vec<bool>,
    survivors: Vec<BTreeSet<NodeId>>,
    rejected_while_crashed: usize,
    initialized: bool,
    trace: ExecutionTrace<P>,
}

impl<P: Protocol, S: Scheduler> Engine<P, S> {
    pub fn new(
        topology: Arc<Topology>,
        mut factory: impl FnMut(NodeId) -> P,
        scheduler: S,
        config: SimConfig,
    ) -> Result<Self, SimError> {
        if config.f_ack < 1 {
            return Err(SimError::InvalidConfig("f_ack must be at least 1".into()));
        }
        let n = topology.n();
        for c in &config.crash_plan {
            if c.node.index() >= n {
                return Err(SimError::InvalidConfig(format!(
                    "crash plan names node {} outside 0..{n}",
                    c.node
                )));
            }
        }
        let nodes: Vec<P> = topology.nodes().map(&mut factory).collect();
        let trace = ExecutionTrace {
            config: config.clone(),
            topology: Arc::clone(&topology),
            scheduler: scheduler.name(),
            initial_values: nodes.iter().map(Protocol::initial_value).collect(),
            events: Vec::new(),
            broadcasts: Vec::new(),
            state_hashes: Vec::new(),
            probes: Vec::new(),
            decisions: vec![None; n],
            crashed: vec![false; n],
            terminated: false,
            abort: None,
            discarded_broadcasts: 0,
            end_time: 0,
            horizon: 0,
            effective_f_ack: 0,
        };
        let mut queue = BinaryHeap::new();
        for (slot, c) in config.crash_plan.iter().enumerate() {
            queue.push(Reverse(QueueKey {
                time: c.time,
                rank: RANK_CRASH,
                node: c.node,
                seq: 0,
                sender: c.node,
                slot,
            }));
        }
        Ok(Engine {
            topology,
            config,
            scheduler,
            nodes,
            queue,
            now: 0,
            step: 0,
            next_seq: vec![0; n],
            in_flight: vec![None; n],
            crashed: vec![false; n],
            survivors: vec![BTreeSet::new(); n],
            rejected_while_crashed: 0,
            initialized: false,
            trace,
        })
    }

    pub fn now(&self) -> Time {
        self.now
    }

    pub fn node(&self, u: NodeId) -> &P {
        &self.nodes[u.index()]
    }

    pub fn is_crashed(&self, u: NodeId) -> bool {
        self.crashed[u.index()]
    }

    /// Broadcasts refused because the sender had crashed.
    pub fn rejected_while_crashed(&self) -> usize {
        self.rejected_while_crashed
    }

    pub fn has_pending_broadcast(&self, u: NodeId) -> bool {
        self.in_flight[u.index()].is_some()
    }

    /// Runs every node's initialization at time 0. Idempotent.
    pub fn initialize(&mut self) -> Result<(), SimError> {
        if self.initialized {
            return Ok(());
        }
        self.initialized = true;
        for i in 0..self.topology.n() {
            let u = NodeId::from(i);
            let mut ctx = NodeCtx::new(0, false);
            self.nodes[u.index()].on_init(&mut ctx);
            self.after_callback(u, ctx)?;
            if self.trace.abort.is_some() {
                break;
            }
        }
        Ok(())
    }

    /// Starts a broadcast from `node`. Returns `Ok(false)` without creating
    /// an instance if `node` has one in flight or has crashed.
    pub fn issue_broadcast(&mut self, node: NodeId, payload: P::Msg) -> Result<bool, SimError> {
        self.issue_at(node, payload, self.step)
    }

    fn issue_at(&mut self, node: NodeId, payload: P::Msg, issue_step: u64) -> Result<bool, SimError> {
        if self.crashed[node.index()] {
            self.rejected_while_crashed += 1;
            return Ok(false);
        }
        if self.in_flight[node.index()].is_some() {
            self.trace.discarded_broadcasts += 1;
            return Ok(false);
        }
        let ids = payload.id_fields();
        if ids > self.config.id_capacity {
            let reason = format!(
                "node {node} broadcast {} carrying {ids} ids, capacity {}",
                payload.summary(),
                self.config.id_capacity
            );
            self.trace.abort = Some(reason.clone());
            return Err(SimError::MessageSize(reason));
        }
        let receivers: Vec<NodeId> = self
            .topology
            .neighbors(node)
            .iter()
            .copied()
            .filter(|v| !self.crashed[v.index()])
            .collect();
        let seq = self.next_seq[node.index()];
        self.next_seq[node.index()] += 1;
        let req = BroadcastRequest {
            sender: node,
            seq,
            issue_time: self.now,
            receivers: &receivers,
        };
        let plan = self.scheduler.plan(&req, &self.topology, self.config.f_ack);
        self.validate_plan(&req, &plan)?;
        let slot = self.trace.broadcasts.len();
        for &(target, time) in &plan.receives {
            self.queue.push(Reverse(QueueKey {
                time,
                rank: RANK_RECEIVE,
                node: target,
                seq,
                sender: node,
                slot,
            }));
        }
        self.queue.push(Reverse(QueueKey {
            time: plan.ack,
            rank: RANK_ACK,
            node,
            seq,
            sender: node,
            slot,
        }));
        self.trace.effective_f_ack = self.trace.effective_f_ack.max(plan.ack - self.now);
        let mut planned = plan.receives;
        planned.sort();
        self.trace.broadcasts.push(BroadcastInstance {
            sender: node,
            seq,
            payload,
            issue_time: self.now,
            issue_step,
            release_time: plan.release,
            ack_time: plan.ack,
            receivers: planned,
            acked: false,
        });
        self.in_flight[node.index()] = Some(slot);
        Ok(true)
    }

    fn validate_plan(&self, req: &BroadcastRequest<'_>, plan: &crate::sched::DeliveryPlan) -> Result<(), SimError> {
        let violation = |msg: String| {
            Err(SimError::ContractViolation(format!(
                "{} planning broadcast ({}, {}): {msg}",
                self.scheduler.name(),
                req.sender,
                req.seq
            )))
        };
        if plan.release < req.issue_time {
            return violation(format!("release {} before issue", plan.release));
        }
        if plan.ack > plan.release + self.config.f_ack {
            return violation(format!(
                "ack at {} exceeds release {} + f_ack {}",
                plan.ack, plan.release, self.config.f_ack
            ));
        }
        let mut targets: Vec<NodeId> = plan.receives.iter().map(|(v, _)| *v).collect();
        targets.sort();
        if targets != req.receivers {
            return violation(format!(
                "receiver set {targets:?} differs from neighbours {:?}",
                req.receivers
            ));
        }
        for &(v, t) in &plan.receives {
            if t <= req.issue_time || t > plan.ack {
                return violation(format!(
                    "receive at {v} scheduled at {t}, outside ({}, {}]",
                    req.issue_time, plan.ack
                ));
            }
        }
        Ok(())
    }

    /// Crashes `node` now. Of its in-flight broadcast, only `survivors`
    /// still receive the message; no ack is delivered for it.
    pub fn apply_crash(&mut self, node: NodeId, survivors: &BTreeSet<NodeId>) {
        if self.crashed[node.index()] {
            return;
        }
        self.crashed[node.index()] = true;
        self.trace.crashed[node.index()] = true;
        self.survivors[node.index()] = survivors.clone();
        self.step += 1;
        self.trace.events.push(SimEvent {
            step: self.step,
            time: self.now,
            kind: EventKind::Crash { node },
        });
    }

    /// Processes the next event. Returns `false` when the queue is empty or
    /// the next event lies beyond `horizon`.
    pub fn step(&mut self, horizon: Time) -> Result<bool, SimError> {
        self.initialize()?;
        loop {
            let Some(Reverse(key)) = self.queue.peek().copied() else {
                return Ok(false);
            };
            if key.time > horizon {
                return Ok(false);
            }
            self.queue.pop();
            self.now = key.time;
            if self.dispatch(key)? {
                return Ok(true);
            }
        }
    }

    /// Returns whether the key produced an event.
    fn dispatch(&mut self, key: QueueKey) -> Result<bool, SimError> {
        match key.rank {
            RANK_RECEIVE => {
                let target = key.node;
                let sender = key.sender;
                if self.crashed[target.index()] {
                    return Ok(false);
                }
                if self.crashed[sender.index()] && !self.survivors[sender.index()].contains(&target) {
                    return Ok(false);
                }
                self.step += 1;
                self.trace.events.push(SimEvent {
                    step: self.step,
                    time: self.now,
                    kind: EventKind::Receive {
                        target,
                        sender,
                        seq: key.seq,
                        instance: key.slot,
                    },
                });
                let msg = self.trace.broadcasts[key.slot].payload.clone();
                let mut ctx = NodeCtx::new(self.now, self.in_flight[target.index()].is_some());
                self.nodes[target.index()].on_receive(sender, &msg, &mut ctx);
                self.after_callback(target, ctx)?;
                Ok(true)
            }
            RANK_ACK => {
                let sender = key.node;
                if self.crashed[sender.index()] {
                    return Ok(false);
                }
                self.step += 1;
                self.trace.events.push(SimEvent {
                    step: self.step,
                    time: self.now,
                    kind: EventKind::Ack {
                        sender,
                        seq: key.seq,
                        instance: key.slot,
                    },
                });
                self.trace.broadcasts[key.slot].acked = true;
                self.in_flight[sender.index()] = None;
                let mut ctx = NodeCtx::new(self.now, false);
                self.nodes[sender.index()].on_ack(&mut ctx);
                self.after_callback(sender, ctx)?;
                Ok(true)
            }
            _ => {
                let spec = self.config.crash_plan[key.slot].clone();
                if self.crashed[spec.node.index()] {
                    return Ok(false);
                }
                self.apply_crash(spec.node, &spec.survivors);
                Ok(true)
            }
        }
    }

    fn after_callback(&mut self, u: NodeId, ctx: NodeCtx<P::Msg>) -> Result<(), SimError> {
        let (outbox, discarded, decision) = ctx.into_parts();
        self.trace.discarded_broadcasts += discarded;
        let trigger_step = self.step;
        if let Some(value) = decision {
            self.record_decision(u, value);
        }
        if let Some(msg) = outbox {
            match self.issue_at(u, msg, trigger_step) {
                Ok(_) => {}
                Err(SimError::MessageSize(_)) => {}
                Err(e) => return Err(e),
            }
        }
        let node = &mut self.nodes[u.index()];
        self.trace.state_hashes.push(StateRecord {
            step: trigger_step,
            time: self.now,
            node: u,
            digest: state_digest(node, self.config.anonymous_mode),
        });
        if let Some(probe) = node.take_probe() {
            self.trace.probes.push(ProbeRecord {
                step: trigger_step,
                time: self.now,
                node: u,
                probe,
            });
        }
        Ok(())
    }

    fn record_decision(&mut self, u: NodeId, value: Value) {
        self.step += 1;
        self.trace.events.push(SimEvent {
            step: self.step,
            time: self.now,
            kind: EventKind::Decide { node: u, value },
        });
        if self.trace.decisions[u.index()].is_none() {
            self.trace.decisions[u.index()] = Some((value, self.now));
        }
    }

    fn all_decided(&self) -> bool {
        self.trace
            .decisions
            .iter()
            .zip(&self.crashed)
            .all(|(d, &crashed)| crashed || d.is_some())
    }

    /// Runs until every live node decides (unless the config asks to run
    /// to quiescence), the queue drains, the horizon
    /// passes, or a message-size violation aborts the run.
    pub fn run(mut self, horizon: Time) -> Result<ExecutionTrace<P>, SimError> {
        if horizon < 1 {
            return Err(SimError::InvalidConfig("horizon must be at least 1".into()));
        }
        self.initialize()?;
        while self.trace.abort.is_none() && !(self.config.stop_when_decided && self.all_decided()) {
            if !self.step(horizon)? {
                break;
            }
        }
        Ok(self.finish(horizon))
    }

    fn finish(mut self, horizon: Time) -> ExecutionTrace<P> {
        self.trace.terminated = self.trace.abort.is_none() && self.all_decided();
        self.trace.end_time = self.now;
        self.trace.horizon = horizon;
        self.trace
    }
}

/// Builds an engine and runs it to completion.
pub fn run_simulation<P: Protocol, S: Scheduler>(
    topology: Arc<Topology>,
    factory: impl FnMut(NodeId) -> P,
    scheduler: S,
    config: SimConfig,
    horizon: Time,
) -> Result<ExecutionTrace<P>, SimError> {
    Engine::new(topology, factory, scheduler, config)?.run(horizon)
}
