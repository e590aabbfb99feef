use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::perturb::PerturbationKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate id `{id}` on lines {first} and {second}")]
    DuplicateId {
        id: String,
        first: usize,
        second: usize,
    },

    #[error("invalid {what}: {message}")]
    Invalid { what: &'static str, message: String },

    #[error("example `{id}` is not perturbable by {kind}: {reason}")]
    NotPerturbable {
        id: String,
        kind: PerturbationKind,
        reason: String,
    },

    #[error("paraphrase provider failed on `{id}`: {message}")]
    Provider { id: String, message: String },

    #[error("insufficient samples for {context}: need {needed}, have {available}")]
    InsufficientSamples {
        context: String,
        needed: usize,
        available: usize,
    },

    #[error("requested {k} items from a kernel of rank {rank}")]
    RankDeficient { k: usize, rank: usize },

    #[error("constraint infeasible: {0}")]
    ConstraintInfeasible(String),

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("length mismatch: {left} predictions vs {right} gold labels")]
    LengthMismatch { left: usize, right: usize },

    #[error("kind mismatch: {0}")]
    KindMismatch(String),

    #[error("cross-test grid is missing cell (train {train}, test {test})")]
    MissingCell {
        train: PerturbationKind,
        test: PerturbationKind,
    },

    #[error("cross-test grid has duplicate cell (train {train}, test {test})")]
    DuplicateCell {
        train: PerturbationKind,
        test: PerturbationKind,
    },

    #[error("backend: {0}")]
    Backend(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
