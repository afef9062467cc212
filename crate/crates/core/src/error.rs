use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, DemonError>;

#[derive(Debug, Error)]
pub enum DemonError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "no excitation possible: distribution has no support on levels that couple to the qubit"
    )]
    NoExcitationPossible,

    #[error("no local maximum of the nonlinear excitation probability below theta = pi/2 (scanned {scanned} points)")]
    NoLocalMaximum { scanned: usize },

    #[error(
        "truncation error: leaked probability {leak:e} exceeds budget {budget:e}; increase n_max"
    )]
    Truncation { leak: f64, budget: f64 },

    #[error("conditioning on an outcome with zero probability")]
    ZeroProbabilityOutcome,

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("round {round}: {source}")]
    InRound {
        round: usize,
        #[source]
        source: Box<DemonError>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<DemonError>,
    },

    #[error("{}:{line}:{column}: {message}", path.display())]
    ConfigParse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid config: {}", .0.join("; "))]
    ConfigInvalid(Vec<String>),

    #[error("invalid data in {}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("checksum mismatch for {}", .0.display())]
    Checksum(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DemonError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DemonError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_round(self, round: usize) -> Self {
        DemonError::InRound {
            round,
            source: Box::new(self),
        }
    }

    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        DemonError::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, with round/stage context stripped.
    pub fn root(&self) -> &DemonError {
        match self {
            DemonError::InRound { source, .. } | DemonError::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 1 validation, 2 numerical guard, 3 i/o.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            DemonError::Domain(_)
            | DemonError::Schedule(_)
            | DemonError::ConfigParse { .. }
            | DemonError::ConfigInvalid(_)
            | DemonError::Format { .. } => 1,
            DemonError::NoExcitationPossible
            | DemonError::NoLocalMaximum { .. }
            | DemonError::Truncation { .. }
            | DemonError::ZeroProbabilityOutcome => 2,
            DemonError::Io { .. } | DemonError::Checksum(_) => 3,
            DemonError::InRound { .. } | DemonError::Stage { .. } => unreachable!(),
        }
    }
}
