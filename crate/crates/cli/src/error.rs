use std::fmt;

use principal_graph::Error as CoreError;

/// Failure category, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Data,
    Numeric,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Config => 2,
            Kind::Data => 3,
            Kind::Numeric => 4,
        }
    }
}

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub stage: &'static str,
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn config(stage: &'static str, message: impl Into<String>) -> Self {
        Self {
            stage,
            kind: Kind::Config,
            message: message.into(),
        }
    }

    pub fn data(stage: &'static str, message: impl Into<String>) -> Self {
        Self {
            stage,
            kind: Kind::Data,
            message: message.into(),
        }
    }

    pub fn numeric(stage: &'static str, message: impl Into<String>) -> Self {
        Self {
            stage,
            kind: Kind::Numeric,
            message: message.into(),
        }
    }

    /// Classifies a library error raised during `stage`.
    pub fn core(stage: &'static str, err: CoreError) -> Self {
        let kind = match err {
            CoreError::InvalidArgument(_) => Kind::Config,
            CoreError::InvalidGraph(_)
            | CoreError::InconsistentMatrix(_)
            | CoreError::DimensionMismatch { .. }
            | CoreError::InvalidCloud(_)
            | CoreError::DegenerateWeights
            | CoreError::DegenerateData(_)
            | CoreError::Disconnected { .. } => Kind::Data,
            CoreError::SingularSystem { .. }
            | CoreError::AllPointsTrimmed
            | CoreError::NotApplicable(_)
            | CoreError::NoAdmissibleCandidate { .. }
            | CoreError::ZeroRadius
            | CoreError::EmptyGraph
            | CoreError::EmptyEnsemble
            | CoreError::NoBranch => Kind::Numeric,
        };
        Self {
            stage,
            kind,
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error [{}]: {}", self.stage, self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches a stage to library results.
pub trait AtStage<T> {
    fn at(self, stage: &'static str) -> CliResult<T>;
}

impl<T> AtStage<T> for principal_graph::Result<T> {
    fn at(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|e| CliError::core(stage, e))
    }
}
