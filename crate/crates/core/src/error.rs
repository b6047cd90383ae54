use thiserror::Error;

/// Errors raised by the channel builders and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("coincident points: transmit antenna and receiver at distance {distance:e} m")]
    CoincidentPoints { distance: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is numerically singular: {0}")]
    Singular(String),

    #[error(
        "dual bisection could not bracket the power budget {power_budget:e} W (last mu {mu_hi:e}, power {power:e} W)"
    )]
    Bracketing { power_budget: f64, mu_hi: f64, power: f64 },

    #[error("retraction failed: step shrunk {0} times without leaving a zero entry")]
    Retraction(usize),

    #[error("curvature bound did not dominate the Hessian after {0} doublings")]
    CurvatureBound(usize),

    #[error("cannot pack {count} antennas with spacing {d_min} m into a {width} m square")]
    Packing { count: usize, d_min: f64, width: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("solve aborted after {} outer iterations: {source}", partial_trace.len())]
    Aborted { source: Box<Error>, partial_trace: Vec<f64> },

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// True for errors that stem from user-provided configuration rather than
    /// numerical breakdown.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Geometry(_) | Error::Packing { .. } | Error::Io { .. } => true,
            Error::Aborted { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
