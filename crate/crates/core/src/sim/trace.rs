//! The complete record of one run.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use super::config::SimConfig;
use super::protocol::{Protocol, WireMessage};
use crate::topology::Topology;
use crate::types::{NodeId, Time, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EventKind {
    Receive {
        target: NodeId,
        sender: NodeId,
        seq: u64,
        instance: usize,
    },
    Ack {
        sender: NodeId,
        seq: u64,
        instance: usize,
    },
    Crash {
        node: NodeId,
    },
    Decide {
        node: NodeId,
        value: Value,
    },
}

impl EventKind {
    pub fn node(&self) -> NodeId {
        match *self {
            EventKind::Receive { target, .. } => target,
            EventKind::Ack { sender, .. } => sender,
            EventKind::Crash { node } | EventKind::Decide { node, .. } => node,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            EventKind::Receive { .. } => "receive",
            EventKind::Ack { .. } => "ack",
            EventKind::Crash { .. } => "crash",
            EventKind::Decide { .. } => "decide",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimEvent {
    /// Global sequence number; 0 is reserved for initialization.
    pub step: u64,
    pub time: Time,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// One call to `broadcast` that the engine accepted.
#[derive(Debug, Clone)]
pub struct BroadcastInstance<M> {
    pub sender: NodeId,
    pub seq: u64,
    pub payload: M,
    pub issue_time: Time,
    /// Step during which the broadcast was issued.
    pub issue_step: u64,
    /// When the scheduler let the broadcast start; equals `issue_time`
    /// unless the scheduler withheld it.
    pub release_time: Time,
    pub ack_time: Time,
    /// Planned receive time per neighbour alive at issue.
    pub receivers: Vec<(NodeId, Time)>,
    pub acked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct StateRecord {
    pub step: u64,
    pub time: Time,
    pub node: NodeId,
    pub digest: u64,
}

#[derive(Debug, Clone)]
pub struct ProbeRecord<Pr> {
    pub step: u64,
    pub time: Time,
    pub node: NodeId,
    pub probe: Pr,
}

pub struct ExecutionTrace<P: Protocol> {
    pub config: SimConfig,
    pub topology: Arc<Topology>,
    pub scheduler: String,
    pub initial_values: Vec<Option<Value>>,
    pub events: Vec<SimEvent>,
    pub broadcasts: Vec<BroadcastInstance<P::Msg>>,
    pub state_hashes: Vec<StateRecord>,
    pub probes: Vec<ProbeRecord<P::Probe>>,
    /// First decision of each node, with its time.
    pub decisions: Vec<Option<(Value, Time)>>,
    pub crashed: Vec<bool>,
    /// Every non-crashed node decided before the horizon.
    pub terminated: bool,
    /// Set when the run was cut short by a message-size violation.
    pub abort: Option<String>,
    pub discarded_broadcasts: usize,
    pub end_time: Time,
    pub horizon: Time,
    /// Largest observed delay from issue to ack.
    pub effective_f_ack: Time,
}

impl<P: Protocol> Clone for ExecutionTrace<P> {
    fn clone(&self) -> Self {
        ExecutionTrace {
            config: self.config.clone(),
            topology: Arc::clone(&self.topology),
            scheduler: self.scheduler.clone(),
            initial_values: self.initial_values.clone(),
            events: self.events.clone(),
            broadcasts: self.broadcasts.clone(),
            state_hashes: self.state_hashes.clone(),
            probes: self.probes.clone(),
            decisions: self.decisions.clone(),
            crashed: self.crashed.clone(),
            terminated: self.terminated,
            abort: self.abort.clone(),
            discarded_broadcasts: self.discarded_broadcasts,
            end_time: self.end_time,
            horizon: self.horizon,
            effective_f_ack: self.effective_f_ack,
        }
    }
}

impl<P: Protocol> ExecutionTrace<P> {
    pub fn n(&self) -> usize {
        self.topology.n()
    }

    /// Time by which every node that decided had decided.
    pub fn decision_time(&self) -> Option<Time> {
        self.decisions.iter().flatten().map(|(_, t)| *t).max()
    }

    pub fn decided_values(&self) -> Vec<Option<Value>> {
        self.decisions.iter().map(|d| d.map(|(v, _)| v)).collect()
    }

    /// Digest of `node` after the last event at or before `step`.
    pub fn node_state_hash(&self, node: NodeId, step: u64) -> Option<u64> {
        self.state_hashes
            .iter()
            .take_while(|r| r.step <= step)
            .filter(|r| r.node == node)
            .last()
            .map(|r| r.digest)
    }

    /// Digest of `node` after every event at or before virtual time `time`.
    pub fn state_at_time(&self, node: NodeId, time: Time) -> Option<u64> {
        self.state_hashes
            .iter()
            .take_while(|r| r.time <= time)
            .filter(|r| r.node == node)
            .last()
            .map(|r| r.digest)
    }

    /// Per-node digest timelines, for repeated lookups.
    pub fn state_timelines(&self) -> Vec<Vec<StateRecord>> {
        let mut out = vec![Vec::new(); self.n()];
        for r in &self.state_hashes {
            out[r.node.index()].push(*r);
        }
        out
    }

    pub fn instance(&self, sender: NodeId, seq: u64) -> Option<&BroadcastInstance<P::Msg>> {
        self.broadcasts.iter().find(|b| b.sender == sender && b.seq == seq)
    }

    /// JSON-lines export: a header with the configuration, then one line
    /// per event.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = json!({
            "config": self.config,
            "topology": {
                "name": self.topology.name(),
                "n": self.topology.n(),
                "diameter": self.topology.diameter(),
            },
            "scheduler": self.scheduler,
            "initial_values": self.initial_values,
            "terminated": self.terminated,
            "abort": self.abort,
        });
        let _ = writeln!(out, "{header}");
        for e in &self.events {
            let (node, sender, seq, summary) = match e.kind {
                EventKind::Receive {
                    target,
                    sender,
                    seq,
                    instance,
                } => (
                    target,
                    Some(sender),
                    Some(seq),
                    Some(self.broadcasts[instance].payload.summary()),
                ),
                EventKind::Ack { sender, seq, instance } => (
                    sender,
                    Some(sender),
                    Some(seq),
                    Some(self.broadcasts[instance].payload.summary()),
                ),
                EventKind::Crash { node } => (node, None, None, None),
                EventKind::Decide { node, value } => (node, None, None, Some(value.to_string())),
            };
            let line = json!({
                "step": e.step,
                "time": e.time,
                "kind": e.kind.name(),
                "node": node,
                "sender": sender,
                "seq": seq,
                "payload_summary": summary,
            });
            let _ = writeln!(out, "{line}");
        }
        out
    }

    /// Hash of the JSON-lines export plus the state-digest sequence.
    pub fn digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.to_jsonl().hash(&mut h);
        self.state_hashes.hash(&mut h);
        h.finish()
    }

    /// Receive events grouped by instance index.
    pub fn receives_by_instance(&self) -> BTreeMap<usize, Vec<&SimEvent>> {
        let mut out: BTreeMap<usize, Vec<&SimEvent>> = BTreeMap::new();
        for e in &self.events {
            if let EventKind::Receive { instance, .. } = e.kind {
                out.entry(instance).or_default().push(e);
            }
        }
        out
    }
}
