use thiserror::Error;

/// Hard failures surfaced by the library.
///
/// Soft conditions (a non-converged gradient-descent solve, a post-step
/// overlap slightly past tolerance) are reported through stats/logs instead,
/// so a long simulation is not killed by a recoverable step.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite velocity for particle {particle}")]
    NonFiniteVelocity { particle: usize },

    #[error("coincident sphere centers for particles {i} and {j}")]
    CoincidentCenters { i: usize, j: usize },

    #[error("spheres {i} and {j} overlap at physical radii (gap {gap:.3e})")]
    PhysicalOverlap { i: usize, j: usize, gap: f64 },

    #[error(
        "iterative solver did not converge: residual {residual:.3e} after {iterations} iterations"
    )]
    SolverDidNotConverge { residual: f64, iterations: usize },

    #[error("gradient contains NaN at descent step {step}")]
    NaNGradient { step: usize },

    #[error("no feasible active set found; operator is likely not positive definite")]
    NoFeasibleActiveSet,

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("scenario generation failed: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
