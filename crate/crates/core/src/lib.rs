#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Neural networks studied as dynamical systems.
//!
//! The numerical kernels and the network, Morse and training modules are
//! generic over [`Scalar`] (`f32` or `f64`); the particle and spin simulators
//! work in `f64`. Concrete aliases for both precisions live at the crate root.

pub mod discrete_ips;
pub mod error;
pub mod meanfield;
pub mod morse;
pub mod networks;
pub mod numerics;
pub mod table;
pub mod training;

pub use error::{Error, Result};

/// Version of this library, echoed in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use numerics::{Matrix, MeasureAtoms, Scalar, SeededRng};

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type MeasureAtoms64 = MeasureAtoms<f64>;
pub type MlpSpec64 = networks::MlpSpec<f64>;
pub type MlpSpec32 = networks::MlpSpec<f32>;
pub type NeuralOdeSpec64 = networks::NeuralOdeSpec<f64>;
pub type NeuralDdeSpec64 = networks::NeuralDdeSpec<f64>;
