use std::path::PathBuf;

use crate::vb::TrainedModel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("variance must be strictly positive (index {index}, value {value:e})")]
    NonPositiveVariance { index: usize, value: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("non-finite loss ({0})")]
    NonFiniteLoss(&'static str),

    #[error("training diverged at epoch {epoch}; last finite checkpoint retained")]
    Diverged {
        epoch: usize,
        checkpoint: Box<TrainedModel>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("both inputs have zero variance")]
    ZeroVariance,

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("cannot split {rows} rows into {folds} folds")]
    DegenerateFolds { rows: usize, folds: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{file}: {detail}")]
    ShapeMismatchWithManifest { file: String, detail: String },

    #[error("{file}: non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { file: String, row: usize, col: usize },

    #[error("{file}: {detail}")]
    Parse { file: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(
        context: &'static str,
        expected: impl std::fmt::Display,
        found: impl std::fmt::Display,
    ) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
