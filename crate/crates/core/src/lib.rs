//! Deterministic discrete-event simulator for the abstract MAC layer, with
//! two consensus protocols, adversarial schedulers, the lower-bound network
//! families, and trace checkers.

pub mod checkers;
pub mod naive;
pub mod sched;
pub mod sim;
pub mod topology;
pub mod twophase;
pub mod types;
pub mod wpaxos;

pub use sched::{Scheduler, SchedulerSpec};
pub use sim::{run_simulation, ExecutionTrace, Protocol, SimConfig, SimError};
pub use topology::Topology;
pub use types::{NodeId, Time, Value};
