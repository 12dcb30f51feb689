use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("kernel evaluation failed at (t={t}, tau={tau}): {reason}")]
    KernelEvaluation { t: f64, tau: f64, reason: String },

    #[error("non-finite integrand at node {index} (t={t})")]
    NonFinite { index: usize, t: f64 },

    #[error("ill-conditioned solve: back-substitution residual {residual:.3e} exceeds {tolerance:.3e}")]
    IllConditioned { residual: f64, tolerance: f64 },

    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        last_iterate: Vec<f64>,
    },

    #[error("singular constraint Jacobian: {0}; try different variations or check that the constraint Lagrangian is not itself extremal")]
    SingularJacobian(String),
}

pub type Result<T> = std::result::Result<T, Error>;
