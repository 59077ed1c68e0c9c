//! Experiment registry: each entry declares its config keys and a runner.

mod networks;
mod particles;
mod spins;
mod training;

use crate::config::{Config, Key, COMMON_KEYS};
use crate::error::CliError;
use crate::output::Outcome;

pub struct Experiment {
    pub id: &'static str,
    pub description: &'static str,
    keys: fn() -> Vec<Key>,
    run: fn(&Config) -> Result<Outcome, CliError>,
}

impl Experiment {
    /// Common keys followed by the experiment's own.
    pub fn schema(&self) -> Vec<Key> {
        COMMON_KEYS.iter().copied().chain((self.keys)()).collect()
    }

    pub fn run(&self, cfg: &Config) -> Result<Outcome, CliError> {
        (self.run)(cfg)
    }
}

const fn exp(
    id: &'static str,
    description: &'static str,
    keys: fn() -> Vec<Key>,
    run: fn(&Config) -> Result<Outcome, CliError>,
) -> Experiment {
    Experiment { id, description, keys, run }
}

/// Sorted by id.
pub const EXPERIMENTS: [Experiment; 15] = [
    exp("boltzmann-stationary", "Glauber chain vs the exact Boltzmann law", spins::stationary_keys, spins::stationary),
    exp("dobrushin", "W1 stability of two Vlasov solutions against e^{2Lt}", particles::dobrushin_keys, particles::dobrushin),
    exp("edge-of-stability", "gradient descent with sharpness tracking", training::edge_keys, training::edge_of_stability),
    exp("ips-simulate", "interacting particle system on a graph", particles::ips_keys, particles::ips_simulate),
    exp("kl-objective", "KL divergence of a visible law from the model marginal", spins::kl_keys, spins::kl_objective),
    exp("lyapunov", "top Lyapunov exponent of random batch Jacobians", training::lyapunov_keys, training::lyapunov),
    exp("meanfield-converge", "sup-t W1 between particles and the Vlasov density", particles::converge_keys, particles::meanfield_converge),
    exp("memory-report", "memory capacity K*tau of a neural DDE", networks::memory_keys, networks::memory_report),
    exp("milnor-probe", "fraction of nearby starts that (S)GD returns to a minimum", training::milnor_keys, training::milnor_probe),
    exp("morse-classify", "critical points and C1/C2/C3 class of a scalar field", networks::morse_keys, networks::morse_classify),
    exp("ndde-forward", "neural DDE forward pass by the method of steps", networks::ndde_keys, networks::ndde_forward),
    exp("node-forward", "neural ODE forward pass with RK4", networks::node_keys, networks::node_forward),
    exp("vanishing-gradient", "gradient flow of a badly conditioned quadratic", training::vanishing_keys, training::vanishing_gradient),
    exp("variational-check", "forward and reverse derivatives through RK4 vs differences", training::variational_keys, training::variational_check),
    exp("vlasov", "Kuramoto Vlasov equation by upwind finite volumes", particles::vlasov_keys, particles::vlasov),
];

pub fn find(id: &str) -> Option<&'static Experiment> {
    EXPERIMENTS.iter().find(|e| e.id == id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_sorted_and_schemas_are_unique() {
        assert!(EXPERIMENTS.windows(2).all(|w| w[0].id < w[1].id));
        for e in &EXPERIMENTS {
            let s = e.schema();
            let mut names: Vec<_> = s.iter().map(|k| k.name).collect();
            names.sort_unstable();
            let n = names.len();
            names.dedup();
            assert_eq!(names.len(), n, "{} declares a key twice", e.id);
        }
    }
}
