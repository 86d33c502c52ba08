use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row} sums to zero; depth normalization is undefined")]
    ZeroRowSum { row: usize },

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("confounder {index} carries no signal in the remaining subspace")]
    DegenerateConfounder { index: usize },

    #[error("operator maps the start vector and its restart to zero")]
    ZeroOperator,

    #[error("loss became non-finite at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("confounder design matrix is rank deficient")]
    DegenerateDesign,

    #[error("confounding filter removed every training sample")]
    EmptyTrainingSet,

    #[error("label class {label} has no samples left after subsampling")]
    EmptyClass { label: bool },

    #[error("labels contain a single class")]
    SingleClass,

    #[error("too few samples for {folds} folds: {detail}")]
    TooFewSamples { folds: usize, detail: String },

    #[error("training cell (group {group}, label {label}) has mass but the test set has none")]
    EmptyCellRequired { group: &'static str, label: bool },

    // The source is part of the message rather than the error chain, so
    // chain-printing callers do not repeat it.
    #[error("i/o error on {path}: {cause}")]
    Io { path: String, cause: std::io::Error },

    #[error("csv error in {path}: {message}")]
    Csv { path: String, message: String },

    #[error("json error in {path}: {message}")]
    Json { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            cause: source,
        }
    }

    pub(crate) fn csv(path: impl AsRef<std::path::Path>, message: impl ToString) -> Self {
        Error::Csv {
            path: path.as_ref().display().to_string(),
            message: message.to_string(),
        }
    }
}
