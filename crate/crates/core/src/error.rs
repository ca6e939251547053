use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error in {what}: {reason}")]
    Parse { what: &'static str, reason: String },

    #[error("bit at row {row}, col {col}, position {bit_pos} already holds the flip target")]
    NoOpFlip { row: usize, col: usize, bit_pos: u32 },

    #[error("conflicting observation at row {row}, col {col}")]
    ConflictingObservation { row: usize, col: usize },

    #[error("no (m, b) in the search range satisfies the {attack} attack condition")]
    Infeasible { attack: &'static str },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("missing artifact {path} (rerun `{stage}`)")]
    MissingArtifact { path: String, stage: &'static str },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Parse {
            what,
            reason: reason.into(),
        }
    }

    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
