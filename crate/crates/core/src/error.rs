use std::path::PathBuf;

use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {node} is out of range for a graph with {num_nodes} nodes")]
    NodeOutOfRange { node: NodeId, num_nodes: usize },

    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),

    #[error("weight {weight} on edge ({u}, {v}) is outside [0, 1]")]
    InvalidWeight { u: NodeId, v: NodeId, weight: f64 },

    /// An explanation refers to an edge the graph does not have. Usually
    /// means the explanation was computed against a different graph.
    #[error("edge ({0}, {1}) is not present in the graph (stale explanation?)")]
    MissingEdge(NodeId, NodeId),

    #[error("graph has no nodes")]
    EmptyGraph,

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("layer {layer} contains non-finite weights")]
    NonFiniteWeights { layer: usize },

    #[error("training diverged in epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("trajectory step ({0}, {1}) does not follow a graph edge")]
    BrokenTrajectory(NodeId, NodeId),

    #[error(
        "enumeration guard exceeded: at least {at_least} connected edge sets \
         (limit {limit}); lower max_edges or use a smaller graph"
    )]
    GuardExceeded { at_least: usize, limit: usize },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
