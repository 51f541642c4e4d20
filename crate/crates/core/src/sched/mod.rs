//! Message schedulers.
//!
//! A [`Scheduler`] fixes, for every accepted broadcast, when each neighbour
//! receives it and when the sender gets its ack. The engine rejects plans
//! that break the F_ack contract. [`explore`] is the separate valid-step
//! explorer, which enumerates interleavings instead of timing them.

pub mod explore;
mod policies;
mod spec;

use crate::topology::Topology;
use crate::types::{NodeId, Time};

pub use policies::{BridgeScheduler, MaxDelayScheduler, RandomScheduler, SemiSyncScheduler, SyncScheduler};
pub use spec::{SchedulerSpec, SpecError};

/// A broadcast awaiting a delivery plan.
#[derive(Debug, Clone, Copy)]
pub struct BroadcastRequest<'a> {
    pub sender: NodeId,
    pub seq: u64,
    pub issue_time: Time,
    /// Neighbours of the sender that were alive at issue, in id order.
    pub receivers: &'a [NodeId],
}

/// Delivery timing chosen by a scheduler for one broadcast.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryPlan {
    /// Start of the F_ack window; later than the issue time only when the
    /// scheduler withholds the broadcast.
    pub release: Time,
    pub receives: Vec<(NodeId, Time)>,
    pub ack: Time,
}

impl DeliveryPlan {
    /// Everything delivered and acked at `time`.
    pub fn at(req: &BroadcastRequest<'_>, release: Time, time: Time) -> Self {
        DeliveryPlan {
            release,
            receives: req.receivers.iter().map(|&v| (v, time)).collect(),
            ack: time,
        }
    }
}

pub trait Scheduler: Send {
    fn name(&self) -> String;

    fn plan(&mut self, req: &BroadcastRequest<'_>, topology: &Topology, f_ack: Time) -> DeliveryPlan;
}

impl<S: Scheduler + ?Sized> Scheduler for Box<S> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn plan(&mut self, req: &BroadcastRequest<'_>, topology: &Topology, f_ack: Time) -> DeliveryPlan {
        (**self).plan(req, topology, f_ack)
    }
}
