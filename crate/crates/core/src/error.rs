use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("incompatible grid: {0}")]
    IncompatibleGrid(String),

    #[error("trace-class condition violated: need 2*gamma > dim, got gamma={gamma}, dim={dim}")]
    TraceCondition { gamma: f64, dim: usize },

    #[error("spectrum exhausted: requested {requested} eigenpairs, {available} available")]
    SpectrumExhausted { requested: usize, available: usize },

    #[error("kernel matrix is indefinite: eigenvalue {min_eigenvalue:e} below -1e-8 * trace ({trace:e})")]
    IndefiniteKernel { min_eigenvalue: f64, trace: f64 },

    #[error("forward Euler unstable: tau*dt/h^2 = {ratio:.4} exceeds 1/4")]
    Unstable { ratio: f64 },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("all training inputs are zero")]
    DegenerateInputs,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IndefiniteKernel { .. }
                | Error::Unstable { .. }
                | Error::NonConvergence { .. }
                | Error::DegenerateInputs
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
