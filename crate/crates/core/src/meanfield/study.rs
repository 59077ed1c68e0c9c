use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::GraphSpec;
use super::model::{kuramoto, wrap_angle, PhaseSpace};
use super::simulate::{simulate_ips, SimParams};
use super::vlasov::{vlasov_kuramoto_solve, w1_density_atoms, w1_densities, DensityGrid, VlasovParams, VlasovRun, CFL_NUMBER};
use crate::numerics::{MeasureAtoms, SeededRng};
use crate::table::{Cell, Table};
use crate::{Error, Result};

/// `δ_M = (1/M) Σ δ_{x_j}` for a flat state array; circle phases are wrapped.
pub fn empirical_measure(state: &[f64], phase_space: PhaseSpace) -> Result<MeasureAtoms<f64>> {
    let d = phase_space.dim();
    if state.is_empty() || !state.len().is_multiple_of(d) {
        return Err(Error::Dimension(format!("state length {} is not a positive multiple of {d}", state.len())));
    }
    let m = state.len() / d;
    let positions = state
        .chunks(d)
        .map(|x| match phase_space {
            PhaseSpace::Circle => vec![wrap_angle(x[0])],
            PhaseSpace::Euclidean(_) => x.to_vec(),
        })
        .collect();
    MeasureAtoms::new(positions, vec![1.0 / m as f64; m])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub ms: Vec<usize>,
    pub seeds: usize,
    pub k: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Compare every this many particle steps.
    pub sample_every: usize,
    pub initial: DensityGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub m: usize,
    /// Mean over seeds of `sup_t W1(δ_M(t), μ_t)`.
    pub sup_w1: f64,
    pub per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub sample_times: Vec<f64>,
    pub vlasov_dt: f64,
}

impl ConvergenceReport {
    /// Columns `M,sup_w1`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["M", "sup_w1"]);
        for r in &self.rows {
            t.push(vec![Cell::from(r.m), Cell::from(r.sup_w1)]).expect("two columns");
        }
        t
    }

    pub fn inversions(&self) -> usize {
        self.rows.windows(2).filter(|w| w[1].sup_w1 > w[0].sup_w1).count()
    }

    /// Non-increasing in `M` up to one inversion.
    pub fn trend_ok(&self) -> bool {
        self.inversions() <= 1
    }
}

/// Particle Kuramoto systems against the Vlasov solution from the same
/// initial density. Seed `s` draws the phases of every `M` from
/// `rng.child(s).child(M)`.
///
/// The Vlasov solver runs with the particle step divided into enough
/// substeps to respect the Courant limit, and is compared at the same times.
pub fn meanfield_convergence_study(study: &ConvergenceStudy, rng: &SeededRng) -> Result<ConvergenceReport> {
    if study.ms.is_empty() || study.seeds == 0 || study.ms.contains(&0) {
        return Err(Error::Input("need at least one positive M and one seed".into()));
    }
    let (steps, h) = SimParams::new(study.dt, study.t_end).with_record_every(study.sample_every.max(1)).grid()?;
    let vmax = study.initial.frequencies().iter().map(|f| f.0.abs()).fold(0.0, f64::max) + study.k.abs();
    let sub = ((h * vmax) / (CFL_NUMBER * study.initial.dx()) * (1.0 + 1e-9)).ceil().max(1.0) as usize;
    let every = study.sample_every.max(1);
    let run = vlasov_kuramoto_solve(
        &study.initial,
        &VlasovParams { k: study.k, t_end: study.t_end, dt: h / sub as f64, record_every: every * sub },
    )?;
    if run.steps != steps * sub {
        return Err(Error::Evaluation("particle and density time grids disagree".into()));
    }
    let jobs: Vec<(usize, usize)> = study.ms.iter().flat_map(|&m| (0..study.seeds).map(move |s| (m, s))).collect();
    let results: Vec<f64> = jobs
        .par_iter()
        .map(|&(m, s)| {
            let mut r = rng.child(s as u64).child(m as u64);
            let (phases, omegas) = study.initial.sample(m, &mut r);
            sup_w1_for(study, &run, &phases, omegas, h)
        })
        .collect::<Result<_>>()?;
    let rows = study
        .ms
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let per_seed = results[i * study.seeds..(i + 1) * study.seeds].to_vec();
            ConvergenceRow { m, sup_w1: per_seed.iter().sum::<f64>() / per_seed.len() as f64, per_seed }
        })
        .collect();
    Ok(ConvergenceReport { rows, sample_times: run.times.clone(), vlasov_dt: run.dt })
}

fn sup_w1_for(study: &ConvergenceStudy, run: &VlasovRun, phases: &[f64], omegas: Vec<f64>, h: f64) -> Result<f64> {
    let m = phases.len();
    let model = if study.initial.frequencies().len() == 1 { kuramoto(study.k, vec![omegas[0]])? } else { kuramoto(study.k, omegas)? };
    let tr = simulate_ips(&model, &GraphSpec::AllToAll(1.0), phases, &SimParams::new(h, study.t_end).with_record_every(study.sample_every.max(1)))?;
    if tr.times.len() != run.times.len() {
        return Err(Error::Evaluation("particle and density samples disagree".into()));
    }
    let w = 1.0 / m as f64;
    let mut sup: f64 = 0.0;
    for (x, dens) in tr.lifted.iter().zip(&run.densities) {
        let atoms: Vec<(f64, f64)> = x.iter().map(|&p| (p, w)).collect();
        sup = sup.max(w1_density_atoms(dens, &atoms)?);
    }
    Ok(sup)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DobrushinRow {
    pub t: f64,
    pub w1: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DobrushinReport {
    pub rows: Vec<DobrushinRow>,
    pub w1_initial: f64,
    /// The initial distance vanished; only `W1(t) ≤ tolerance` is checked.
    pub degenerate: bool,
    pub holds: bool,
    pub worst_ratio: f64,
}

impl DobrushinReport {
    /// Columns `t,w1,bound`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["t", "w1", "bound"]);
        for r in &self.rows {
            t.push(vec![Cell::from(r.t), Cell::from(r.w1), Cell::from(r.bound)]).expect("three columns");
        }
        t
    }
}

/// Slack on the exponential bound that absorbs scheme diffusion.
pub const DOBRUSHIN_SLACK: f64 = 0.05;
/// Distance treated as zero for identical initial data.
pub const DEGENERATE_W1: f64 = 1e-9;

/// Evolves two densities and compares `W1(μ₁(t), μ₂(t))` against
/// `e^{2Lt} W1(μ₁(0), μ₂(0))`.
pub fn dobrushin_check(a: &DensityGrid, b: &DensityGrid, params: &VlasovParams, lipschitz: f64) -> Result<DobrushinReport> {
    if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
        return Err(Error::Input(format!("Lipschitz constant must be nonnegative, got {lipschitz}")));
    }
    let ra = vlasov_kuramoto_solve(a, params)?;
    let rb = vlasov_kuramoto_solve(b, params)?;
    let w0 = w1_densities(a, b)?;
    let degenerate = w0 <= DEGENERATE_W1;
    let mut rows = Vec::with_capacity(ra.times.len());
    let mut holds = true;
    let mut worst_ratio: f64 = 0.0;
    for ((t, da), db) in ra.times.iter().zip(&ra.densities).zip(&rb.densities) {
        let w1 = w1_densities(da, db)?;
        let bound = (2.0 * lipschitz * t).exp() * w0;
        if degenerate {
            holds &= w1 <= DEGENERATE_W1;
        } else {
            let ratio = w1 / bound;
            worst_ratio = worst_ratio.max(ratio);
            holds &= ratio <= 1.0 + DOBRUSHIN_SLACK;
        }
        rows.push(DobrushinRow { t: *t, w1, bound });
    }
    Ok(DobrushinReport { rows, w1_initial: w0, degenerate, holds, worst_ratio })
}
