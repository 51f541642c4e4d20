//! Leader-driven Paxos over an unreliable-latency broadcast network, with
//! acceptor responses aggregated along shortest-path trees to the leader.

mod node;
mod types;

pub use node::{ProposerPhase, WpaxosConfig, WpaxosFault, WpaxosNode, WpaxosProbe};
pub use types::{
    Accepted, AggregatedResponse, Bundle, ChangeStamp, Polarity, PropKind, ProposalNumber, ProposerMsg, Proposition,
    Search,
};
