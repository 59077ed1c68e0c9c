//! Shared numerical kernels: dense matrices, eigen-analysis, finite
//! differences, seeded randomness, quadrature and measure distances.

pub mod diff;
pub mod eigen;
pub mod matrix;
pub mod measure;
pub mod quadrature;
pub mod rng;
pub mod scalar;

pub use diff::{default_step, finite_diff_gradient, finite_diff_jacobian};
pub use eigen::{
    condition_number, eigenvalues, qr_frame, real_eigenvectors, singular_values, solve, spectral_radius, sym_eigen, Eigenvalue,
    SymEigen,
};
pub use matrix::Matrix;
pub use measure::{kl_divergence, wasserstein1, Geometry, MeasureAtoms};
pub use rng::SeededRng;
pub use scalar::{all_finite, axpy, dot, norm2, norm_inf, Scalar};
