use thiserror::Error;

/// Errors raised by the estimator pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain where an operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter or configuration value is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// A NaN reached an activation.
    #[error("non-finite activation input")]
    NonFinite,

    /// The greedy cover did not converge.
    #[error("atlas cover failed after {iterations} rounds: {uncovered} of {checked} points uncovered")]
    Cover {
        iterations: usize,
        uncovered: usize,
        checked: usize,
    },

    /// No chart contains the intersection of a cube with the manifold.
    #[error("no chart for cube {cube:?}: {reason}")]
    NoChart { cube: Vec<u32>, reason: String },

    /// The chart network fit did not reach its residual target.
    #[error("chart fit residual {achieved:.3e} exceeds target {target:.3e}")]
    FitResidual { achieved: f64, target: f64 },

    #[error("estimator build failed at m = {m}, trial {trial}: {source}")]
    Trial {
        m: usize,
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
