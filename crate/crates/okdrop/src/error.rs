//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OkError {
    /// Invalid model or solver parameter.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Kernel evaluated at its singular point.
    #[error("singular evaluation: {0}")]
    Singularity(String),

    /// Degenerate or inconsistent geometry.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Droplet placement could not satisfy the spacing constraints.
    #[error("construction error in cell {cell}: {msg}")]
    Construction { cell: usize, msg: String },

    /// Phase-field lifting preconditions violated.
    #[error("lifting error: {0}")]
    Lifting(String),

    /// Grid too coarse for the requested operation.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Gradient-flow step increased the energy.
    #[error("step-size error: energy increased, retry with dt <= {suggested_dt:.3e}")]
    StepSize { suggested_dt: f64 },

    /// Two redundant computation routes disagreed beyond tolerance.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    /// Relaxation could not keep the droplets disjoint.
    #[error("relaxation error: {0}")]
    Relaxation(String),

    /// Field constraint (mass / mean value) violated.
    #[error("constraint error: {0}")]
    Constraint(String),

    /// Quantity outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, OkError>;
