use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid character {ch:?} at position {position}")]
    InvalidCharacter { position: usize, ch: char },
    #[error("alphabet needs at least two symbols, got {0}")]
    AlphabetTooSmall(usize),
    #[error("duplicate alphabet symbol {0:?}")]
    DuplicateSymbol(char),
    #[error("alphabet symbol {0:?} is not printable ASCII")]
    UnsupportedSymbol(char),
    #[error("sequence of length {len} cannot have {n_chars} characters perturbed")]
    SequenceTooShort { len: usize, n_chars: usize },
    #[error("dataset has {inputs} inputs but {targets} targets")]
    LengthMismatch { inputs: usize, targets: usize },
    #[error("spectrum orders differ: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("kernel order must be at least 1")]
    InvalidOrder,
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("Cholesky factorization failed (last jitter {jitter:e})")]
    CholeskyFailure { jitter: f64 },
    #[error("target {value} is outside the support of the {likelihood} likelihood")]
    UnsupportedTarget { likelihood: &'static str, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("requested {requested} points but only {available} distinct inputs are available")]
    TooFewPoints { requested: usize, available: usize },
    #[error("no positive labels")]
    NoPositives,
    #[error("every calibration bin is empty")]
    AllBinsEmpty,
    #[error("inducing strings have unequal lengths")]
    UnequalLengths,
    #[error("line {line}: malformed record: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: expected sequence length {expected}, found {found}")]
    UnexpectedLength {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {source}")]
    InvalidRecord {
        line: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("dataset file is empty")]
    EmptyDataset,
    #[error("invalid split: {0}")]
    InvalidSpec(String),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
