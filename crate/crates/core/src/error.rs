use thiserror::Error;

/// Errors raised by the simulation and verification routines.
///
/// Variants split into two families: input problems (bad configuration,
/// out-of-range requests) and numerical-contract violations detected while
/// running (unnormalized measures, step sizes above the stability bound).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("step size {dt} exceeds the stability bound {bound}")]
    StepSize { dt: f64, bound: f64 },

    #[error("support of {atoms} atoms exceeds the exact transport budget of {budget}; use the circle distance on v-marginals instead")]
    Budget { atoms: usize, budget: usize },

    #[error("requested time {requested} lies outside the available range [0, {horizon}]")]
    Range { requested: f64, horizon: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    /// True for errors caused by the numerical state rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Contract(_) | Error::StepSize { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
