use thiserror::Error;

/// Crate-wide error type.
///
/// The split matters for the CLI: `Config`/`Validation` map to exit code 2,
/// solver failures map to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent user input (config files, mismatched grids,
    /// out-of-range arguments).
    #[error("configuration error: {0}")]
    Config(String),

    /// A structural hypothesis on the exponents failed.
    #[error("hypothesis validation failed:\n{0}")]
    Validation(String),

    /// An iterate or evaluation point left the domain of the singular term.
    #[error("singular term undefined at node {node}: value {value:.6e} <= -1/n")]
    SingularDomain { node: usize, value: f64 },

    /// The per-step Newton solve did not reach the requested residual.
    #[error("Newton did not converge within {iterations} iterations (residual {residual:.3e}, tol {tol:.3e})")]
    Nonconvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    /// A committed step had a negative part too large to project away.
    #[error("solution at step {step} has negative part {magnitude:.3e} at node {node}; refusing to project")]
    NegativePart {
        step: usize,
        node: usize,
        magnitude: f64,
    },

    /// Time march aborted; `step` is the 1-based index of the failed step.
    #[error("time step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    /// Cholesky hit a nonpositive pivot; the step Hessian should make this
    /// impossible, so it indicates corrupted input.
    #[error("matrix not positive definite at pivot {pivot}")]
    NotPositiveDefinite { pivot: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit code the CLI should use for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Validation(_) | Error::Io(_) | Error::Json(_) => 2,
            _ => 3,
        }
    }
}
