use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed graph document: {0}")]
    MalformedGraph(String),
    #[error("in-vertex and out-vertex coincide")]
    InEqualsOut,
    #[error("graph has no IO-path")]
    NoPath,
    #[error("edge {0} lies on no simple IO-path")]
    DanglingEdge(usize),
    #[error("graph is a single IO-edge")]
    SingleEdge,
    #[error("enumeration guard exceeded: {what} = {value} > {limit}")]
    Guard {
        what: &'static str,
        value: u128,
        limit: u128,
    },
    #[error("unknown graph preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid factor law: {0}")]
    InvalidLaw(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("moment of order {alpha} is not computable for {law}")]
    MomentNotComputable { law: String, alpha: f64 },
    #[error("root finder failed to bracket a root in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("degenerate dynamics: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
