use std::io;

use thiserror::Error;

use crate::graph::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    Graph(Violation),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("bad header in {file}: expected `{expected}`, found `{found}`")]
    Header {
        file: &'static str,
        expected: String,
        found: String,
    },

    #[error("number of districts must be at least {min}, got {got}")]
    DistrictCount { min: u32, got: u32 },

    #[error("label {label} outside 1..={num_districts}")]
    LabelOutOfRange { label: u32, num_districts: u32 },

    #[error("district {0} has no units")]
    EmptyDistrict(u32),

    #[error("unit `{0}` has no district label")]
    UnlabeledVtd(String),

    #[error("unit `{0}` is not in the graph")]
    UnknownVtd(String),

    #[error("unit `{0}` labelled more than once")]
    DuplicateLabel(String),

    #[error("plan covers {plan} units but graph has {graph}")]
    PlanSize { plan: usize, graph: usize },

    #[error("flip would empty district {0}")]
    EmptiesDistrict(u32),

    #[error("flip target equals current label {0}")]
    NoOpFlip(u32),

    #[error("plan has no conflicted edges")]
    NoConflictedEdges,

    #[error("district {0} has zero area")]
    ZeroArea(u32),

    #[error("unit `{0}` has no bounding box")]
    MissingBbox(String),

    #[error("district {0} has zero total votes")]
    ZeroVotes(u32),

    #[error("no vote entry for unit `{0}`")]
    MissingVotes(String),

    #[error("negative vote count for unit `{0}`")]
    NegativeVotes(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate variance")]
    DegenerateVariance,

    #[error("graph has {size} units, enumeration is limited to {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("infeasible construction: {0}")]
    Infeasible(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
