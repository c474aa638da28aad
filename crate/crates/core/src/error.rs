use thiserror::Error;

use crate::model::Partition;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid layer `{layer}`: {reason}")]
    InvalidLayer { layer: String, reason: String },

    #[error("unsupported partition {partition:?} for layer `{layer}`")]
    UnsupportedPartition { layer: String, partition: Partition },

    #[error("layer `{layer}`: WSP over {n} chiplets exceeds output height {h_out}")]
    InvalidSplit { layer: String, n: usize, h_out: usize },

    #[error("unknown network `{0}`")]
    UnknownNetwork(String),

    #[error("parse error in {source_name}: {message}")]
    Parse { source_name: String, message: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("region sizes sum to {got}, mesh has {expected} chiplets")]
    SizeMismatch { expected: usize, got: usize },

    #[error("{clusters} clusters cannot share {chiplets} chiplets")]
    TooManyClusters { clusters: usize, chiplets: usize },

    #[error(
        "weight buffer overflow: segment {segment}, chiplet ({row}, {col}) needs {needed} B of {capacity} B"
    )]
    InfeasibleSchedule {
        segment: usize,
        row: usize,
        col: usize,
        needed: u64,
        capacity: u64,
    },

    #[error("no feasible schedule: {0}")]
    NoFeasibleSchedule(String),

    #[error("design space of {size} candidates exceeds enumeration limit {limit}")]
    SpaceTooLarge { size: String, limit: u64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
