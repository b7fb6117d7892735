use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("no sign change of kappa on (0, {cap}]; samples (lambda, kappa): {trace:?}")]
    Bracket { cap: f64, trace: Vec<(f64, f64)> },

    #[error("degenerate spectrum: second eigenvalue {0:e} is not separated from zero")]
    DegenerateSpectrum(f64),

    #[error("operation not defined for this case: {0}")]
    WrongCase(String),

    #[error("ambiguous no-flux case: integral of m e^(alpha m) is {0:e}")]
    AmbiguousCase(f64),

    #[error("inconsistent right-hand side: bordered multiplier {multiplier:e} exceeds {limit:e}")]
    Inconsistent { multiplier: f64, limit: f64 },

    #[error("{stage}: no convergence after {iterations} iterations, residual history {history:?}")]
    NonConvergence {
        stage: &'static str,
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("positivity violated: {0}")]
    Positivity(String),

    #[error("S_n is degenerate (|S_n| = {0:e})")]
    Degeneracy(f64),

    #[error("transversality violated: Re dmu/dtau = {0:e}")]
    Transversality(f64),

    #[error("frequency left the admissible regime: nu = {0:e}")]
    NonPositiveFrequency(f64),

    #[error("simulation blew up after t = {0}")]
    BlowUp(f64),

    #[error("field length {got} does not match {expected} unknowns")]
    GridMismatch { expected: usize, got: usize },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
