use thiserror::Error;

use crate::graph::Violation;

/// Errors produced by the principal graph library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid graph structure: {}", format_violations(.0))]
    InvalidGraph(Vec<Violation>),

    #[error("elastic matrix inconsistent with graph: {0}")]
    InconsistentMatrix(String),

    #[error("dimension mismatch: expected {expected}, found {found} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("sum of point weights is zero")]
    DegenerateWeights,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("singular linear system; nodes without data or elastic coupling: {nodes:?}")]
    SingularSystem { nodes: Vec<usize> },

    #[error("every data point is trimmed by the current embedding")]
    AllPointsTrimmed,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grammar operation not applicable: {0}")]
    NotApplicable(String),

    #[error("no admissible candidate in growth phase {phase}")]
    NoAdmissibleCandidate { phase: usize },

    #[error("trimming radius estimate is zero (all sampled points coincide)")]
    ZeroRadius,

    #[error("graph is empty after filtering")]
    EmptyGraph,

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("no ensemble member has a branching node")]
    NoBranch,

    #[error("nodes {root} and {leaf} are not connected")]
    Disconnected { root: usize, leaf: usize },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
