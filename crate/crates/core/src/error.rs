//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular evaluation: {0}")]
    Singularity(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("integral does not converge: {0}")]
    NonConvergence(String),

    #[error("inadmissible exponent: {0}")]
    InadmissibleExponent(String),

    #[error("step size {dt} violates the explicit stability limit; need dt <= {required}")]
    StepSize { dt: f64, required: f64 },

    #[error("non-finite state at step {step} (t = {t})")]
    Divergence { step: usize, t: f64 },

    #[error("setup error: {0}")]
    Setup(String),

    #[error("under-resolved source: width {width} is below {required} (3 minimum spacings)")]
    Resolution { width: f64, required: f64 },

    #[error("query {0} lies outside the image of the flow")]
    Extrapolation(f64),

    #[error("insufficient samples: {retained} retained, need {required}")]
    InsufficientSamples { retained: usize, required: usize },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("invalid series: {0}")]
    Series(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
