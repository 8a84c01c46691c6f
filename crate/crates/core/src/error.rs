use thiserror::Error;

#[derive(Debug, Error)]
pub enum PscpError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid data: {0}")]
    Invalid(String),
    #[error("epsilon must lie strictly between 0 and 1, got {0}")]
    Epsilon(f64),
    #[error("generic mode needs a single-block scenario set, got {0} blocks")]
    GenericNeedsOneBlock(usize),
    #[error("{what} exceeds the oracle guard ({value} > {limit})")]
    Guard { what: &'static str, value: usize, limit: usize },
    #[error("LP engine failed: {0}")]
    Lp(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl PscpError {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        PscpError::Parse { line, msg: msg.into() }
    }
}

impl From<pscp_lp::LpError> for PscpError {
    fn from(e: pscp_lp::LpError) -> Self {
        PscpError::Lp(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, PscpError>;
