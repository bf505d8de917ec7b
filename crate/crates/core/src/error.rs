use thiserror::Error;

/// Errors produced by the core toolkit.
#[derive(Error, Debug)]
pub enum CoreError {
    #[error("invalid composition space: {0}")]
    InvalidSpace(String),

    #[error("composition space too large: {count} compositions exceed the cap of {cap}")]
    SpaceTooLarge { count: u64, cap: u64 },

    #[error("composition id {id} out of range (|C| = {count})")]
    IdOutOfRange { id: u64, count: u64 },

    #[error("corpus error at line {line}: {message}")]
    CorpusLine { line: usize, message: String },

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("demonstration selection error: {0}")]
    Demonstration(String),

    #[error("label matrix error: {0}")]
    Matrix(String),

    #[error("gateway error: {0}")]
    Gateway(String),

    #[error("game error: {0}")]
    Game(String),

    #[error("predictor error: {0}")]
    Predictor(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
