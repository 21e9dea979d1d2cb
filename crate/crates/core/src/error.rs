use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// ISI zero-forcing needs at least as many antennas as resolvable paths.
    #[error("ISI zero-forcing infeasible: M = {antennas} < L = {paths} (requires M >= L)")]
    ZeroForcingInfeasible { antennas: usize, paths: usize },

    #[error("sensing infeasible: required SNR {required:.6e} exceeds achievable {achievable:.6e}")]
    SensingInfeasible { required: f64, achievable: f64 },

    /// Round-trip delay beyond the guard interval leaks into the next block.
    #[error("target delay of {delay} symbols exceeds the guard length N_p = {guard}")]
    AmbiguousDelay { delay: usize, guard: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors that stem from an infeasible problem configuration
    /// rather than from bad input or I/O.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::ZeroForcingInfeasible { .. }
                | Error::SensingInfeasible { .. }
                | Error::AmbiguousDelay { .. }
        )
    }
}
