use serde::{Deserialize, Serialize};

use super::dynamics::glauber_update;
use super::network::{energy, index_of_state, state_of_index, SignConvention, SpinNetwork, MAX_EXACT_SITES};
use crate::numerics::{kl_divergence, SeededRng};
use crate::table::{Cell, Table};
use crate::{Error, Result};

/// Largest network compared against the exact distribution by simulation.
pub const MAX_GIBBS_SITES: usize = 12;
/// Largest network for the pairwise detailed-balance enumeration.
pub const MAX_BALANCE_SITES: usize = 12;

/// `exp(−H(v))/Z` over `{0,1}^M` in lexicographic order.
pub fn boltzmann_exact_distribution(net: &SpinNetwork) -> Result<Vec<f64>> {
    let m = net.m();
    if m > MAX_EXACT_SITES {
        return Err(Error::Capacity(format!("exact enumeration is limited to {MAX_EXACT_SITES} sites, got {m}")));
    }
    net.require_energy()?;
    let energies: Vec<f64> = (0..1usize << m).map(|k| energy(net, &state_of_index(k, m))).collect::<Result<_>>()?;
    let lowest = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = energies.iter().map(|e| (lowest - e).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / z).collect())
}

/// Columns `state_index,probability`.
pub fn distribution_table(p: &[f64]) -> Table {
    let mut t = Table::new(["state_index", "probability"]);
    for (k, v) in p.iter().enumerate() {
        t.push(vec![Cell::from(k), Cell::from(*v)]).expect("two columns");
    }
    t
}

/// Largest `|p(v)P(v→w) − p(w)P(w→v)|` over states differing in one site,
/// for the single-site chain with uniform site choice.
pub fn detailed_balance_defect(net: &SpinNetwork, convention: SignConvention) -> Result<f64> {
    let m = net.m();
    if m > MAX_BALANCE_SITES {
        return Err(Error::Capacity(format!("detailed-balance enumeration is limited to {MAX_BALANCE_SITES} sites")));
    }
    let p = boltzmann_exact_distribution(net)?;
    let transition = |v: &[u8], i: usize, to: u8| {
        let on = net.on_probability(i, v, convention);
        (if to == 1 { on } else { 1.0 - on }) / m as f64
    };
    let mut worst: f64 = 0.0;
    for k in 0..p.len() {
        let v = state_of_index(k, m);
        for i in 0..m {
            if v[i] == 1 {
                continue;
            }
            let mut w = v.clone();
            w[i] = 1;
            let forward = p[k] * transition(&v, i, 1);
            let backward = p[index_of_state(&w)] * transition(&w, i, 0);
            worst = worst.max((forward - backward).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsReport {
    /// Total-variation distance between occupation frequencies and `exp(−H)/Z`.
    pub tv: f64,
    /// Monte Carlo error scale of `tv`, from batch means of the frequencies.
    pub stderr: f64,
    pub samples: usize,
    pub low_confidence: bool,
    /// `(steps after burn-in, tv)` at powers of ten and at the end.
    pub trace: Vec<(usize, f64)>,
}

impl GibbsReport {
    /// Columns `steps,tv_distance`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["steps", "tv_distance"]);
        for (n, tv) in &self.trace {
            t.push(vec![Cell::from(*n), Cell::from(*tv)]).expect("two columns");
        }
        t
    }
}

fn tv(counts: &[u64], n: u64, p: &[f64]) -> f64 {
    0.5 * counts.iter().zip(p).map(|(&c, &q)| (c as f64 / n as f64 - q).abs()).sum::<f64>()
}

const BATCHES: usize = 20;

/// Runs the single-site chain from a random state for `burn_in + steps`
/// updates and compares the occupation after burn-in with the exact law.
pub fn gibbs_stationary_check(
    net: &SpinNetwork,
    steps: usize,
    burn_in: usize,
    rng: &mut SeededRng,
    convention: SignConvention,
) -> Result<GibbsReport> {
    let m = net.m();
    if m > MAX_GIBBS_SITES {
        return Err(Error::Capacity(format!("stationarity check is limited to {MAX_GIBBS_SITES} sites, got {m}")));
    }
    let p = boltzmann_exact_distribution(net)?;
    let mut v: Vec<u8> = (0..m).map(|_| u8::from(rng.uniform() < 0.5)).collect();
    for _ in 0..burn_in {
        glauber_update(net, &mut v, rng, convention);
    }
    if steps == 0 {
        let k = index_of_state(&v);
        let tv = 1.0 - p[k];
        return Ok(GibbsReport { tv, stderr: f64::NAN, samples: 1, low_confidence: true, trace: vec![(0, tv)] });
    }
    let mut counts = vec![0u64; p.len()];
    let batch_len = (steps / BATCHES).max(1);
    let mut batch_counts = vec![0u64; p.len()];
    let mut batch_freqs: Vec<Vec<f64>> = Vec::new();
    let mut trace = Vec::new();
    let mut next_cp = 10usize;
    for n in 1..=steps {
        glauber_update(net, &mut v, rng, convention);
        let k = index_of_state(&v);
        counts[k] += 1;
        batch_counts[k] += 1;
        if n % batch_len == 0 {
            batch_freqs.push(batch_counts.iter().map(|&c| c as f64 / batch_len as f64).collect());
            batch_counts.iter_mut().for_each(|c| *c = 0);
        }
        if n == next_cp && n < steps {
            trace.push((n, tv(&counts, n as u64, &p)));
            next_cp = next_cp.saturating_mul(10);
        }
    }
    let total = tv(&counts, steps as u64, &p);
    trace.push((steps, total));
    let b = batch_freqs.len();
    let stderr = if b >= 2 {
        let var_sum: f64 = (0..p.len())
            .map(|s| {
                let mean = batch_freqs.iter().map(|f| f[s]).sum::<f64>() / b as f64;
                batch_freqs.iter().map(|f| (f[s] - mean).powi(2)).sum::<f64>() / ((b - 1) * b) as f64
            })
            .sum();
        0.5 * var_sum.sqrt()
    } else {
        f64::NAN
    };
    let low_confidence = b < BATCHES || steps < 100 * p.len();
    Ok(GibbsReport { tv: total, stderr, samples: steps, low_confidence, trace })
}

/// `Σ_V P⁺(V) ln(P⁺(V)/P⁻(V))` with `P⁻` the model's marginal on the first
/// `visible` sites, summed exactly over the hidden ones. `p_plus` is indexed
/// lexicographically over `{0,1}^visible`.
pub fn kl_objective(p_plus: &[f64], net: &SpinNetwork, visible: usize) -> Result<f64> {
    let m = net.m();
    if visible == 0 || visible > m {
        return Err(Error::Input(format!("visible count must lie in 1..={m}, got {visible}")));
    }
    if p_plus.len() != 1 << visible {
        return Err(Error::Dimension(format!("P⁺ needs {} entries, got {}", 1usize << visible, p_plus.len())));
    }
    let total: f64 = p_plus.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Input(format!("P⁺ sums to {total}, not 1")));
    }
    let p = boltzmann_exact_distribution(net)?;
    let block = 1usize << (m - visible);
    let p_minus: Vec<f64> = p.chunks(block).map(|c| c.iter().sum()).collect();
    assert!(p_minus.iter().all(|&q| q > 0.0), "Boltzmann marginals are strictly positive");
    kl_divergence(p_plus, &p_minus)
}

/// Marginal of the model on the first `visible` sites.
pub fn visible_marginal(net: &SpinNetwork, visible: usize) -> Result<Vec<f64>> {
    if visible == 0 || visible > net.m() {
        return Err(Error::Input(format!("visible count must lie in 1..={}, got {visible}", net.m())));
    }
    let p = boltzmann_exact_distribution(net)?;
    Ok(p.chunks(1 << (net.m() - visible)).map(|c| c.iter().sum()).collect())
}
