//! Interacting particle systems on weighted graphs, their mean-field limit
//! for Kuramoto oscillators, and the distances used to compare the two.

mod graph;
mod model;
mod simulate;
mod study;
mod vlasov;

pub use graph::{
    bounded_lipschitz_distance, dgm_distance, digraph_measure_of, graphon_cell_averages, DigraphMeasure, GraphSpec, Graphon,
    Normalization, DEFAULT_QUADRATURE_ORDER,
};
pub use model::{
    cucker_smale, desai_zwanzig, double_well_derivative, hegselmann_krause, hopfield_cts, kuramoto, transformer_ode, wrap_angle,
    Interaction, Intrinsic, IpsModel, Pairwise, PhaseSpace,
};
pub use simulate::{order_parameter, simulate_ips, simulate_sde_ips, IpsTrajectory, Scheme, SimParams};
pub use study::{
    dobrushin_check, empirical_measure, meanfield_convergence_study, ConvergenceReport, ConvergenceRow, ConvergenceStudy,
    DobrushinReport, DobrushinRow, DEGENERATE_W1, DOBRUSHIN_SLACK,
};
pub use vlasov::{vlasov_kuramoto_solve, w1_density_atoms, w1_densities, DensityGrid, VlasovParams, VlasovRun, CFL_NUMBER};

/// Attention weights row `i` would use; exposed for invariant checks.
pub fn attention_weights(model: &IpsModel, state: &[f64], i: usize) -> crate::Result<Vec<f64>> {
    let Interaction::Attention { m1, m2, .. } = &model.interaction else {
        return Err(crate::Error::Unsupported(format!("{} has no attention weights", model.name)));
    };
    let d = model.dim();
    model.particle_count(state)?;
    let keys: Vec<Vec<f64>> = state.chunks(d).map(|x| m2.matvec(x)).collect::<crate::Result<_>>()?;
    let q = m1.matvec(&state[i * d..(i + 1) * d])?;
    Ok(model::softmax_row(&q, &keys))
}
