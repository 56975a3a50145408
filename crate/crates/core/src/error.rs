use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The inner nonlinear solve of one time step did not reach tolerance.
    #[error("nonlinear solve did not converge at t = {time}: {iterations} iterations, residual {residual:e}")]
    NonConvergence {
        time: f64,
        iterations: usize,
        residual: f64,
    },

    /// Discrete energy identity violated beyond tolerance after a converged step.
    #[error("energy identity violated at t = {time}: relative defect {defect:e}")]
    EnergyDefect { time: f64, defect: f64 },

    #[error("fixed-point iteration did not reach tolerance after {} iterations (last residual {:e})", .history.len(), .history.last().copied().unwrap_or(f64::NAN))]
    MaxIterExceeded { history: Vec<f64> },

    #[error("ODE step size underflow at t = {time} (step {step:e})")]
    StiffnessFailure { time: f64, step: f64 },

    #[error("comparison premise fails on [{t1}, {t2}] by {excess:e}")]
    PremiseFailed { t1: f64, t2: f64, excess: f64 },

    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),

    #[error("degenerate fit window: {samples} usable samples (need at least 8)")]
    DegenerateWindow { samples: usize },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
