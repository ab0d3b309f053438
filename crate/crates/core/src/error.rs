use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("spectral field is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),
    #[error("non-finite value detected at t = {t}")]
    NonFinite { t: f64 },
    #[error("periodic wrap-around at t = {t}: support width {width} + 2t exceeds box length {length}")]
    WrapAround { t: f64, width: f64, length: f64 },
    #[error("fixed-point iteration did not converge in {iters} iterations (last residual {last:e})")]
    NotConverged { iters: usize, last: f64, history: Vec<f64> },
    #[error("iterate left the ball of radius {radius:e} (norm {norm:e}) at iteration {iter}")]
    BallEscape { iter: usize, norm: f64, radius: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("configuration errors:\n{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"))]
    Config(Vec<ConfigError>),
    #[error("i/o error: {0}")]
    Io(String),
}

/// One problem found while parsing a configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line number; 0 when the problem is not tied to one line.
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            write!(f, "{}", self.message)
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
