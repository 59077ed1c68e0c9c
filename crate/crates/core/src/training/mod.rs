//! Training as a dynamical system: losses over parameter maps, gradient and
//! stochastic gradient descent, the geometry of the interpolation manifold,
//! spectral and Lyapunov stability, and variational propagation.

mod descent;
mod lyapunov;
mod model;
mod stability;
mod variational;

pub use descent::{
    edge_of_stability_trace, find_minimum, gd_run, milnor_probe, sgd_run, sharpness, EdgeRow, EdgeTrace, GdConfig,
    MilnorReport, MinimizeSchedule, MinimumReport, ProbeTarget, RunVerdict, Trajectory, TrajectoryPoint,
    DIVERGENCE_GUARD, ON_MANIFOLD_TOL,
};
pub use lyapunov::{lyapunov_exponent, FiniteMatrixLaw, LyapunovCheckpoint, LyapunovEstimate, MatrixSampler};
pub use model::{
    batch_loss, grad_loss, hessian, loss, Dataset, LinearModel, LossKind, LossModel, MlpModel, ParamModel, Prod2, Regime,
};
pub use stability::{
    batch_normal_jacobians, regularity_check, spectral_stability, tangent_normal_split, BatchJacobians, ManifoldSplit,
    RegularityReport, SpectralReport, StabilityVerdict, CONDITION_LIMIT, DEFAULT_RANK_TOL, EDGE_BAND,
    MAX_ENUMERATED_BATCHES,
};
pub use variational::{
    ode_stages, vanishing_gradient_demo, variational_propagate, FnStage, Propagation, PropagationResult, Rk4Stage, Stage,
    VanishingTrace,
};
