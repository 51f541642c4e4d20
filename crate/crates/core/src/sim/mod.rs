//! The abstract MAC layer engine: acknowledged local broadcast with
//! scheduler-chosen timing bounded by `f_ack`, plus crash injection.

mod config;
mod engine;
mod protocol;
mod trace;

use thiserror::Error;

pub use config::{CrashSpec, SimConfig, DEFAULT_ID_CAPACITY};
pub use engine::{run_simulation, Engine};
pub use protocol::{state_digest, NodeCtx, Protocol, WireMessage};
pub use trace::{BroadcastInstance, EventKind, ExecutionTrace, ProbeRecord, SimEvent, StateRecord};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// The scheduler proposed timing outside the model contract.
    #[error("scheduler contract violation: {0}")]
    ContractViolation(String),
    /// A message exceeded the id capacity; the run was aborted.
    #[error("message size violation: {0}")]
    MessageSize(String),
}
