//! Forward architectures: MLP, ResNet, DenseResNet, neural ODE and neural
//! DDE, with architecture classification and the memory-capacity report.

pub mod activation;
pub mod classify;
pub mod dde;
pub mod json;
pub mod memory;
pub mod mlp;
pub mod ode;

pub use activation::Activation;
pub use classify::{classify_fnn, classify_ode_arch, has_bottleneck, is_augmented, is_non_augmented, is_rank_deficient, ArchClass, RANK_TOL};
pub use dde::{ndde_forward, ndde_trajectory, Delayed, DelayVectorField, FnDelayField, History, Instantaneous, NeuralDdeSpec};
pub use json::{NetworkJson, NetworkSpec};
pub use memory::{estimate_lipschitz_lower_bound, memory_report, EmbedTarget, MemoryReport};
pub use mlp::{
    dense_resnet_forward, mlp_forward, resnet_forward, DenseLayer, DenseResNetSpec, MlpLayer, MlpSpec, MlpTrace, ResNetSpec,
};
pub use ode::{
    euler_resnet_of_node, node_forward, rk4_trajectory, BuiltinField, EulerResNet, FnField, NeuralOdeSpec, VectorField,
    FIELD_IDS,
};
pub(crate) use ode::rk4_step;
