use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("evaluation produced a non-finite value: {0}")]
    Evaluation(String),

    #[error("structural error in layer {layer}: {message}")]
    Structural { layer: usize, message: String },

    #[error("integration diverged at step {step}: {message}")]
    Divergence { step: usize, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("CFL condition violated at t = {time}: dt = {dt} exceeds the stable step; use dt <= {suggested_dt}")]
    Cfl { time: f64, dt: f64, suggested_dt: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
