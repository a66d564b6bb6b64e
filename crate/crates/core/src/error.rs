use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate confidence: alpha = {alpha} leaves no buffer for variant {variant}")]
    DegenerateConfidence { variant: String, alpha: f64 },

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("invalid usage distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid workload spec: {0}")]
    InvalidWorkload(String),

    #[error("job {id} cannot fit on an empty machine of capacity {capacity}")]
    OversizedJob { id: u64, capacity: f64 },

    #[error("instance too large for exact oracle: {jobs} jobs exceeds cap {cap}")]
    InstanceTooLarge { jobs: usize, cap: usize },

    #[error("infeasible assignment: machine {machine} has effective load {load} > capacity {capacity}")]
    InfeasibleAssignment {
        machine: usize,
        load: f64,
        capacity: f64,
    },

    #[error("class {class} does not fit on an empty machine")]
    InfeasibleClass { class: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
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
        Error::Config(e.to_string())
    }
}
