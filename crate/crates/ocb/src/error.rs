use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("fixed-point iteration for omega_z did not converge after {iterations} iterations (last relative change {last_change:.3e})")]
    NonConvergence { iterations: usize, last_change: f64 },

    #[error("paraxial validity violated: k*Z_R = {k_zr:.3} <= 10 for axis {axis}")]
    ParaxialViolation { axis: char, k_zr: f64 },

    #[error("unknown unit role: {0}")]
    UnknownUnit(String),

    #[error("quadrature failed to converge (error estimate {error:.3e} > tolerance {tol:.3e})")]
    QuadratureFailure { error: f64, tol: f64 },

    #[error("correction vector must have 6 components, got {0}")]
    BadCorrectionDimension(usize),

    #[error("grid too small: probability {mass:.3e} within 3 cells of the {axis} boundary exceeds 1e-8")]
    GridTooSmall { axis: char, mass: f64 },

    #[error("imaginary-time iteration did not converge within {0} steps")]
    GroundStateNonConvergence(usize),

    #[error("NaN detected during propagation at step {step}; dt may be too large or the grid aliased")]
    NanDetected { step: usize },

    #[error("wavefields live on mismatched grids")]
    GridMismatch,

    #[error("time step {dt_tauz:.4} tau_z exceeds the resolution floor tau_z/200")]
    TimeStepTooLarge { dt_tauz: f64 },

    #[error("sweep axis must be non-empty and strictly increasing")]
    BadSweepAxis,

    #[error("fidelity never reached {target} within the sweep range (censored)")]
    Censored { target: f64 },

    #[error("{context}: {source}")]
    WithContext {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
}

impl Error {
    /// Attach run context (used by the harness so solver failures identify the run).
    pub fn with_context(self, context: impl Into<String>) -> Error {
        Error::WithContext {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
