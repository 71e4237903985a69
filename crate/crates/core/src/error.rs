use crate::domain::PdoId;
use crate::network::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("unknown arc {0}")]
    UnknownArc(usize),

    #[error("no path from {from} to {to}")]
    NoPath { from: NodeId, to: NodeId },

    /// A caller broke an operation's precondition (malformed route, link not on route, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// PDOs that no dedicated vehicle can deliver within their time window, even alone.
    #[error("undeliverable PDOs: {0:?}")]
    InfeasiblePdos(Vec<PdoId>),

    #[error("DV fleet limit {limit} exceeded: {needed} routes needed")]
    FleetLimit { limit: u32, needed: usize },

    #[error("problem too large for {solver}: {size} exceeds limit {limit}")]
    Capacity {
        solver: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
