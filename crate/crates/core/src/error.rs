use thiserror::Error;

/// Errors raised by the GenSM toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid system configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid antenna-group combination: {0}")]
    InvalidCombination(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("power allocation entry {index} (1-based) is {value}, expected {expected}")]
    PowerAllocation {
        index: usize,
        value: f64,
        expected: &'static str,
    },

    #[error("analog precoder is outside the barrier interior: ||a||_p = {norm}, bound = {bound}")]
    InfeasibleAnalog { norm: f64, bound: f64 },

    #[error("covariance of AGC pair ({0}, {1}) is not positive definite")]
    NotPositiveDefinite(usize, usize),

    #[error("non-finite result: {0}")]
    NonFinite(String),

    #[error("Monte-Carlo sample count {got} is below the minimum of {min}")]
    TooFewSamples { got: usize, min: usize },

    #[error("no valid antenna partition for n_t = {n_t}, n_rf = {n_rf}")]
    NoPartition { n_t: usize, n_rf: usize },

    #[error("channel file parse error at line {line}: {msg}")]
    ChannelParse { line: usize, msg: String },

    #[error("config error at line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("result file parse error at line {line}: {msg}")]
    ResultParse { line: usize, msg: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit status for the experiment driver: 1 for configuration
    /// problems, 2 for numerical failures, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 3,
            Error::InvalidConfig(_)
            | Error::InvalidCombination(_)
            | Error::Dimension(_)
            | Error::TooFewSamples { .. }
            | Error::NoPartition { .. }
            | Error::ChannelParse { .. }
            | Error::ConfigParse { .. }
            | Error::ResultParse { .. } => 1,
            Error::PowerAllocation { .. }
            | Error::InfeasibleAnalog { .. }
            | Error::NotPositiveDefinite(..)
            | Error::NonFinite(_)
            | Error::Numerical(_) => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
