use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numerics::{qr_frame, Matrix, Scalar, SeededRng};
use crate::table::{Cell, Table};
use crate::{Error, Result};

/// Source of i.i.d. random square matrices.
pub trait MatrixSampler<T: Scalar>: Sync {
    fn dim(&self) -> usize;
    fn sample(&self, rng: &mut SeededRng) -> Matrix<T>;
}

/// Finitely many matrices with given probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMatrixLaw<T: Scalar> {
    matrices: Vec<Matrix<T>>,
    cumulative: Vec<f64>,
}

impl<T: Scalar> FiniteMatrixLaw<T> {
    pub fn new(matrices: Vec<Matrix<T>>, probabilities: Vec<f64>) -> Result<Self> {
        let Some(first) = matrices.first() else { return Err(Error::Input("need at least one matrix".into())) };
        let n = first.rows();
        if matrices.iter().any(|m| m.rows() != n || m.cols() != n) {
            return Err(Error::Dimension("matrices must be square of equal size".into()));
        }
        if probabilities.len() != matrices.len() || probabilities.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Input("need one nonnegative probability per matrix".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!("probabilities sum to {total}, not 1")));
        }
        let cumulative = probabilities
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p / total;
                Some(*acc)
            })
            .collect();
        Ok(Self { matrices, cumulative })
    }

    pub fn uniform(matrices: Vec<Matrix<T>>) -> Result<Self> {
        let k = matrices.len().max(1);
        Self::new(matrices, vec![1.0 / k as f64; k])
    }

    /// A single matrix applied at every step.
    pub fn deterministic(m: Matrix<T>) -> Result<Self> {
        Self::new(vec![m], vec![1.0])
    }

    /// Equiprobable scalars.
    pub fn scalars(values: &[f64]) -> Result<Self> {
        Self::uniform(values.iter().map(|&v| Matrix::from_diag(&[T::lit(v)])).collect())
    }
}

impl<T: Scalar> MatrixSampler<T> for FiniteMatrixLaw<T> {
    fn dim(&self) -> usize {
        self.matrices[0].rows()
    }

    fn sample(&self, rng: &mut SeededRng) -> Matrix<T> {
        if self.matrices.len() == 1 {
            return self.matrices[0].clone();
        }
        let u = rng.uniform();
        let k = self.cumulative.iter().position(|&c| u < c).unwrap_or(self.matrices.len() - 1);
        self.matrices[k].clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCheckpoint {
    pub n: usize,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub estimate: f64,
    /// Standard error: replicate spread, a rounding floor, and a
    /// finite-horizon term when the half-horizon estimates differ
    /// significantly from the full ones.
    ///
    /// Each replicate averages the log growth over a window that skips a
    /// short burn-in.
    pub stderr: f64,
    pub replicate_estimates: Vec<f64>,
    pub checkpoints: Vec<LyapunovCheckpoint>,
}

impl LyapunovEstimate {
    /// `λ < 0` and the estimate is more than 3 standard errors below zero.
    pub fn clearly_negative(&self) -> bool {
        self.estimate + 3.0 * self.stderr < 0.0
    }

    /// Columns `n,lambda_estimate,stderr`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["n", "lambda_estimate", "stderr"]);
        for c in &self.checkpoints {
            t.push(vec![Cell::from(c.n), Cell::from(c.estimate), Cell::from(c.stderr)]).expect("three columns");
        }
        t
    }
}

/// Compensated summation.
#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Averaging window of a replicate: log growth is taken over
/// `(begin, end]`. Both ends are drawn at random within a tenth of the
/// horizon so that the phase of a rotating dominant pair, which would
/// otherwise bias every replicate the same way, is spread out.
fn window(n: usize, rng: &mut SeededRng) -> (usize, usize) {
    let w = n / 20;
    if w == 0 {
        return (0, n);
    }
    (w + rng.below(w), n - rng.below(2 * w))
}

fn checkpoint_steps(n: usize) -> Vec<usize> {
    let mut cps: Vec<usize> = std::iter::successors(Some(10usize), |&p| p.checked_mul(10)).take_while(|&p| p < n).collect();
    if n >= 2 {
        cps.push(n / 2);
    }
    cps.push(n);
    cps.sort_unstable();
    cps.dedup();
    cps
}

struct Replicate {
    /// Log growth over `(begin, k]` (or `(0, k]` for `k ≤ begin`) at each checkpoint.
    rates: Vec<f64>,
    /// Log growth rate over the replicate's window.
    rate: f64,
    abs_log_total: f64,
    steps: usize,
}

fn run_replicate<T: Scalar>(sampler: &dyn MatrixSampler<T>, cps: &[usize], mut rng: SeededRng) -> Replicate {
    let k = sampler.dim();
    let n = *cps.last().expect("at least one checkpoint");
    let (begin, end) = window(n, &mut rng);
    let start = Matrix::new(k, k, (0..k * k).map(|_| T::lit(rng.normal())).collect()).expect("square frame");
    let (mut q, _) = qr_frame(&start);
    let mut acc = Neumaier::default();
    let mut abs_log = 0.0;
    let mut at_begin = 0.0;
    let mut rate = f64::NAN;
    let mut rates = Vec::with_capacity(cps.len());
    let mut next = 0;
    let mut dead = false;
    let growth = |s: f64, from: f64, steps: usize| if dead_value(s) { s } else { (s - from) / steps as f64 };
    for step in 1..=n {
        if !dead {
            let a = sampler.sample(&mut rng);
            let (nq, diag) = qr_frame(&a.matmul(&q).expect("square shapes"));
            let r = diag[0].as_f64();
            if r == 0.0 || !r.is_finite() {
                dead = true;
            } else {
                let l = r.ln();
                acc.add(l);
                abs_log += l.abs();
                q = nq;
            }
        }
        let s = if dead { f64::NEG_INFINITY } else { acc.value() };
        if step == begin {
            at_begin = s;
        }
        if step == end {
            rate = growth(s, at_begin, end - begin);
        }
        if step == cps[next] {
            rates.push(if step > begin { growth(s, at_begin, step - begin) } else { growth(s, 0.0, step) });
            next += 1;
        }
    }
    Replicate { rates, rate, abs_log_total: abs_log, steps: n }
}

fn dead_value(s: f64) -> bool {
    s == f64::NEG_INFINITY
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    if xs.len() < 2 || !mean.is_finite() {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

/// Top Lyapunov exponent of an i.i.d. matrix product, from `replicates`
/// independent runs of `n_steps` steps. Replicate `r` uses `rng.child(r)`.
///
/// A run that meets a product with vanishing leading direction reports
/// `−∞`.
pub fn lyapunov_exponent<T: Scalar>(
    sampler: &dyn MatrixSampler<T>,
    n_steps: usize,
    replicates: usize,
    rng: &SeededRng,
) -> Result<LyapunovEstimate> {
    if n_steps == 0 || replicates == 0 {
        return Err(Error::Input("need at least one step and one replicate".into()));
    }
    let cps = checkpoint_steps(n_steps);
    let reps: Vec<Replicate> =
        (0..replicates).into_par_iter().map(|r| run_replicate(sampler, &cps, rng.child(r as u64))).collect();
    let mean_abs_log = reps.iter().map(|r| r.abs_log_total / r.steps as f64).sum::<f64>() / replicates as f64;
    // per-step rounding of the k×k product and re-orthonormalisation
    let k = sampler.dim() as f64;
    let floor = 4.0 * f64::EPSILON * (mean_abs_log + k * k);
    let checkpoints: Vec<LyapunovCheckpoint> = cps
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let per: Vec<f64> = reps.iter().map(|r| r.rates[j]).collect();
            let (estimate, se) = mean_se(&per);
            LyapunovCheckpoint { n, estimate, stderr: se.hypot(floor) }
        })
        .collect();
    let replicate_estimates: Vec<f64> = reps.iter().map(|r| r.rate).collect();
    let (estimate, stat) = mean_se(&replicate_estimates);
    let mut stderr = stat.hypot(floor);
    if n_steps >= 4 && estimate.is_finite() {
        let half = cps.iter().position(|&c| c == n_steps / 2).expect("half horizon is a checkpoint");
        let deltas: Vec<f64> = reps.iter().map(|r| r.rates[half] - r.rate).collect();
        let (md, sd) = mean_se(&deltas);
        let bias = (md.abs() - 2.0 * sd).max(0.0);
        stderr = stderr.hypot(bias);
    }
    if !estimate.is_finite() {
        stderr = 0.0;
    }
    Ok(LyapunovEstimate { estimate, stderr, replicate_estimates, checkpoints })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix_gives_log_of_largest_entry() {
        let law = FiniteMatrixLaw::deterministic(Matrix::from_diag(&[2.0f64, 0.5])).unwrap();
        let e = lyapunov_exponent(&law, 2000, 8, &SeededRng::new(1)).unwrap();
        assert!((e.estimate - 2f64.ln()).abs() <= 3.0 * e.stderr.max(1e-12), "{e:?}");
    }

    #[test]
    fn scalar_products_closed_form() {
        let law = FiniteMatrixLaw::<f64>::scalars(&[0.6, -0.6]).unwrap();
        let e = lyapunov_exponent(&law, 1000, 4, &SeededRng::new(2)).unwrap();
        assert!((e.estimate - 0.6f64.ln()).abs() <= 3.0 * e.stderr);
    }

    #[test]
    fn zero_matrix_is_minus_infinity() {
        let law = FiniteMatrixLaw::<f64>::scalars(&[0.0, 2.0]).unwrap();
        let e = lyapunov_exponent(&law, 200, 3, &SeededRng::new(0)).unwrap();
        assert_eq!(e.estimate, f64::NEG_INFINITY);
    }

    #[test]
    fn checkpoints_cover_horizon() {
        assert_eq!(checkpoint_steps(1000), vec![10, 100, 500, 1000]);
        let mut rng = SeededRng::new(0);
        for _ in 0..100 {
            let (b, e) = window(1000, &mut rng);
            assert!((50..100).contains(&b) && (901..=1000).contains(&e));
        }
        assert_eq!(checkpoint_steps(1), vec![1]);
    }
}
