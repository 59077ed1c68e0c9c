//! Boltzmann machines and Hopfield networks on `{0,1}^M`: energies,
//! single-site stochastic and deterministic updates, and exact stationary
//! analysis for small networks.

mod dynamics;
mod network;
mod stationary;

pub use dynamics::{boltzmann_step, hopfield_run, hopfield_step, HopfieldRule, HopfieldRun, UpdateOrder};
pub use network::{energy, index_of_state, state_of_index, SignConvention, SpinNetwork, MAX_EXACT_SITES};
pub use stationary::{
    boltzmann_exact_distribution, detailed_balance_defect, distribution_table, gibbs_stationary_check, kl_objective,
    visible_marginal, GibbsReport, MAX_BALANCE_SITES, MAX_GIBBS_SITES,
};
