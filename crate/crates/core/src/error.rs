use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("expansion guard exceeded: {atoms} atoms (limit {limit})")]
    ExpansionTooLarge { atoms: usize, limit: usize },

    #[error("step size underflow at t = {t:.6e} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("non-finite state at t = {t:.6e} (component {index})")]
    NonFinite { t: f64, index: usize },

    #[error("steady state not reached by t = {t:.6e} (scaled residual {residual:.3e})")]
    NotConverged {
        t: f64,
        residual: f64,
        last_state: Vec<f64>,
    },

    #[error("singular matrix: pivot {pivot:.3e} at column {column}")]
    Singular { column: usize, pivot: f64 },

    #[error("resolvent singular at omega = {omega:.6e}")]
    SingularResolvent { omega: f64 },

    #[error("spectrum is multimodal ({peaks} significant peaks)")]
    Multimodal { peaks: usize },

    #[error("no peak found in spectrum")]
    NoPeak,

    #[error("half-maximum crossing not found inside the frequency grid")]
    UnresolvedWidth,

    #[error("spectrum still multimodal at R_max = {r_max:.6e}")]
    AboveRange { r_max: f64 },

    #[error("steady state required but input is not converged")]
    NotSteady,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
