use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("universe size {d} is smaller than the required {required}")]
    UniverseTooSmall { d: usize, required: usize },

    #[error("block {rows}x{cols} has more rows than columns")]
    InfeasibleBlock { rows: usize, cols: usize },

    #[error("degenerate object {object}: {reason}")]
    DegenerateObject { object: usize, reason: String },

    #[error("auction did not terminate within {0} bidding rounds")]
    AuctionDiverged(usize),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("missing ground truth")]
    MissingGroundTruth,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Whether the failure happened while optimising rather than while
    /// validating or reading data.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::AuctionDiverged(_) | Error::Solver(_))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
