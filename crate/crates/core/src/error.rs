use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid local dimension q = {0} (need q >= 2)")]
    InvalidDimension(usize),
    #[error("incompatible operands: {0}")]
    Incompatible(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension {dim} is not a power of q = {q}")]
    NotPowerOfQ { dim: usize, q: usize },
    #[error("index {index} out of range for q = {q}")]
    IndexOutOfRange { index: usize, q: usize },
    #[error("register has {levels} levels but the measurement needs {needed}")]
    RegisterTooSmall { levels: usize, needed: usize },
    #[error("unknown register {0}")]
    UnknownRegister(usize),
    #[error("dilated dimension {dim} exceeds the memory budget of {budget} entries")]
    BudgetExceeded { dim: usize, budget: usize },
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),
    #[error("blocks do not partition the {0} cluster configurations")]
    NotAPartition(usize),
    #[error("incomplete outcome table: {0}")]
    IncompleteTable(String),
    #[error("control registers overlap the target cluster")]
    ControlOverlap,
    #[error("stinespring slices are not uniform")]
    NonUniformSlices,
    #[error("outcome assignment has zero probability")]
    ImpossibleOutcome,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config error:\n{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
