use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("edge set contains a directed cycle")]
    CycleDetected,
    #[error("invalid noise specification: {0}")]
    InvalidNoiseSpec(String),
    #[error("intervention touches the target variable {0}")]
    TargetIntervened(usize),
    #[error("index {index} out of range for {len} variables")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid edge: {0}")]
    InvalidEdge(String),
    #[error("invalid intervention: {0}")]
    InvalidIntervention(String),
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("head is the zero vector")]
    ZeroHead,
    #[error("mean head is the zero vector")]
    ZeroMeanHead,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("subset enumeration over {0} variables is not supported (limit 20)")]
    TooManyVariables(usize),
    #[error("bin {bin} received {rows} rows (need at least 2)")]
    EmptyBin { bin: usize, rows: usize },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Strips context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_validation(&self) -> bool {
        !matches!(self.root(), Error::Io(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
