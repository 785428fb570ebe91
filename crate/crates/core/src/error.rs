use thiserror::Error;

/// Errors produced by model construction, inference and data ingestion.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("degenerate prior: {0}")]
    DegeneratePrior(String),
    #[error("vacuous utterance: {0}")]
    VacuousUtterance(String),
    #[error("inconsistent prior: {0}")]
    InconsistentPrior(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Numerical(_)
            | Error::DegeneratePrior(_)
            | Error::VacuousUtterance(_)
            | Error::InconsistentPrior(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.kind() {
        csv::ErrorKind::Io(_) => Error::Input(err.to_string()),
        _ => Error::Parse {
            line,
            message: err.to_string(),
        },
    }
}
