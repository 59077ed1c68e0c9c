use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{grad_loss, hessian, loss, LossModel};
use crate::numerics::{norm2, sym_eigen, Scalar, SeededRng};
use crate::table::{Cell, Table};
use crate::{Error, Result};

/// Iterates whose norm exceeds this are declared divergent.
pub const DIVERGENCE_GUARD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub eta: f64,
    pub max_steps: usize,
    pub stop_grad_tol: f64,
    /// Mini-batch size for SGD; `None` for full-batch descent.
    pub batch: Option<usize>,
    /// Keep every `stride`-th iterate (the first and last are always kept).
    pub stride: usize,
}

impl GdConfig {
    pub fn new(eta: f64, max_steps: usize) -> Self {
        Self { eta, max_steps, stop_grad_tol: 0.0, batch: None, stride: 1 }
    }

    pub fn with_batch(mut self, b: usize) -> Self {
        self.batch = Some(b);
        self
    }

    pub fn with_stop_grad_tol(mut self, tol: f64) -> Self {
        self.stop_grad_tol = tol;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.eta)));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunVerdict {
    /// Gradient norm fell to `stop_grad_tol`.
    Converged,
    MaxSteps,
    /// The iterate left the guard ball or became non-finite at this step.
    Diverged { step: usize },
}

/// One recorded iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint<T> {
    pub step: usize,
    pub theta: Vec<T>,
    pub loss: T,
    pub grad_norm: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub points: Vec<TrajectoryPoint<T>>,
    pub verdict: RunVerdict,
    /// Steps actually taken.
    pub steps: usize,
    /// Mini-batches in order, for replay (empty for full-batch descent).
    pub batches: Vec<Vec<usize>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn last(&self) -> &TrajectoryPoint<T> {
        self.points.last().expect("trajectory keeps its start")
    }

    pub fn final_theta(&self) -> &[T] {
        &self.last().theta
    }

    pub fn diverged(&self) -> bool {
        matches!(self.verdict, RunVerdict::Diverged { .. })
    }
}

fn run<T: Scalar>(
    model: &LossModel<T>,
    theta0: &[T],
    config: &GdConfig,
    mut rng: Option<&mut SeededRng>,
) -> Result<Trajectory<T>> {
    config.validate()?;
    let eta = T::lit(config.eta);
    let guard = T::lit(DIVERGENCE_GUARD);
    let full = model.full_batch();
    let mut theta = theta0.to_vec();
    let mut g = grad_loss(model, &theta)?;
    let mut points = vec![TrajectoryPoint { step: 0, theta: theta.clone(), loss: loss(model, &theta)?, grad_norm: norm2(&g) }];
    let mut batches = Vec::new();
    let mut verdict = RunVerdict::MaxSteps;
    let mut steps = 0;
    let mut last_kept = true;
    for n in 1..=config.max_steps {
        if norm2(&g).as_f64() <= config.stop_grad_tol {
            verdict = RunVerdict::Converged;
            break;
        }
        let step_grad = match rng.as_deref_mut() {
            Some(r) => {
                let b = r.subset(full.len(), config.batch.expect("SGD has a batch size"));
                let bg = model.batch_grad(&theta, &b);
                batches.push(b);
                bg
            }
            None => Ok(g.clone()),
        };
        let step_grad = match step_grad {
            Ok(v) => v,
            Err(Error::Evaluation(_)) => {
                verdict = RunVerdict::Diverged { step: n };
                break;
            }
            Err(e) => return Err(e),
        };
        for (t, gi) in theta.iter_mut().zip(&step_grad) {
            *t = *t - eta * *gi;
        }
        steps = n;
        let norm = norm2(&theta);
        let (l, next_g) = match (loss(model, &theta), grad_loss(model, &theta)) {
            (Ok(l), Ok(ng)) if norm.is_finite() && norm <= guard => (l, ng),
            (Err(e), _) | (_, Err(e)) if !matches!(e, Error::Evaluation(_)) => return Err(e),
            _ => {
                verdict = RunVerdict::Diverged { step: n };
                break;
            }
        };
        g = next_g;
        last_kept = n % config.stride == 0;
        if last_kept {
            points.push(TrajectoryPoint { step: n, theta: theta.clone(), loss: l, grad_norm: norm2(&g) });
        } else if n == config.max_steps || norm2(&g).as_f64() <= config.stop_grad_tol {
            points.push(TrajectoryPoint { step: n, theta: theta.clone(), loss: l, grad_norm: norm2(&g) });
            last_kept = true;
        }
    }
    if verdict == RunVerdict::MaxSteps && norm2(&g).as_f64() <= config.stop_grad_tol {
        verdict = RunVerdict::Converged;
    }
    if !last_kept && !matches!(verdict, RunVerdict::Diverged { .. }) {
        let l = loss(model, &theta)?;
        points.push(TrajectoryPoint { step: steps, theta, loss: l, grad_norm: norm2(&g) });
    }
    Ok(Trajectory { points, verdict, steps, batches })
}

/// Full-batch gradient descent `θ ← θ − η ∇L(θ)`.
pub fn gd_run<T: Scalar>(model: &LossModel<T>, theta0: &[T], config: &GdConfig) -> Result<Trajectory<T>> {
    if config.batch.is_some() {
        return Err(Error::Config("gradient descent takes no batch size; use sgd_run".into()));
    }
    run(model, theta0, config, None)
}

/// Mini-batch SGD; each step draws a fresh uniform `B`-subset from `rng`.
pub fn sgd_run<T: Scalar>(model: &LossModel<T>, theta0: &[T], config: &GdConfig, rng: &mut SeededRng) -> Result<Trajectory<T>> {
    let n = model.data().len();
    match config.batch {
        Some(b) if b >= 1 && b < n => run(model, theta0, config, Some(rng)),
        Some(b) => Err(Error::Config(format!("batch size must satisfy 1 ≤ B < N = {n}, got {b}"))),
        None => Err(Error::Config("SGD needs a batch size".into())),
    }
}

/// Step-size schedule for [`find_minimum`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeSchedule {
    pub eta0: f64,
    pub shrink: f64,
    pub rounds: usize,
    pub steps_per_round: usize,
    /// Stop once the interpolation residual is this small.
    pub target_residual: f64,
}

impl Default for MinimizeSchedule {
    fn default() -> Self {
        Self { eta0: 0.1, shrink: 0.5, rounds: 60, steps_per_round: 2000, target_residual: 1e-13 }
    }
}

/// Residual below which a point counts as interpolating.
pub const ON_MANIFOLD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimumReport<T> {
    pub theta: Vec<T>,
    pub loss: T,
    /// `max_i ‖Φ(θ, x_i) − y_i‖`
    pub residual: T,
    pub on_manifold: bool,
    pub eta_final: f64,
}

/// Gradient descent with the step size cut whenever a round fails to lower
/// the loss.
pub fn find_minimum<T: Scalar>(model: &LossModel<T>, theta0: &[T], schedule: &MinimizeSchedule) -> Result<MinimumReport<T>> {
    let mut theta = theta0.to_vec();
    let mut eta = schedule.eta0;
    let mut residual = model.interpolation_residual(&theta)?;
    if residual.as_f64() > ON_MANIFOLD_TOL {
        let mut current = loss(model, &theta)?;
        for _ in 0..schedule.rounds {
            if residual.as_f64() <= schedule.target_residual {
                break;
            }
            let cfg = GdConfig::new(eta, schedule.steps_per_round).with_stride(schedule.steps_per_round);
            let traj = gd_run(model, &theta, &cfg)?;
            let end = traj.last();
            if traj.diverged() || !(end.loss <= current) {
                eta *= schedule.shrink;
                continue;
            }
            let stalled = end.loss == current;
            theta = end.theta.clone();
            current = end.loss;
            residual = model.interpolation_residual(&theta)?;
            if stalled || end.grad_norm == T::zero() {
                break;
            }
        }
    }
    Ok(MinimumReport {
        loss: loss(model, &theta)?,
        on_manifold: residual.as_f64() <= ON_MANIFOLD_TOL,
        residual,
        theta,
        eta_final: eta,
    })
}

/// Largest Hessian eigenvalue.
pub fn sharpness<T: Scalar>(model: &LossModel<T>, theta: &[T]) -> Result<T> {
    let h = hessian(model, theta)?;
    let e = sym_eigen(&h)?;
    Ok(*e.values.last().expect("nonempty spectrum"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow<T> {
    pub step: usize,
    pub loss: T,
    pub grad_norm: T,
    pub sharpness: T,
    pub threshold: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTrace<T> {
    pub rows: Vec<EdgeRow<T>>,
    pub trajectory: Trajectory<T>,
}

impl<T: Scalar> EdgeTrace<T> {
    pub fn terminal_sharpness(&self) -> T {
        self.rows.last().expect("trace keeps its start").sharpness
    }

    /// Columns `step,loss,grad_norm,sharpness,threshold`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["step", "loss", "grad_norm", "sharpness", "threshold"]);
        for r in &self.rows {
            t.push(vec![
                Cell::from(r.step),
                Cell::from(r.loss.as_f64()),
                Cell::from(r.grad_norm.as_f64()),
                Cell::from(r.sharpness.as_f64()),
                Cell::from(r.threshold.as_f64()),
            ])
            .expect("five columns");
        }
        t
    }
}

/// Gradient descent with the sharpness evaluated every `stride` steps.
pub fn edge_of_stability_trace<T: Scalar>(
    model: &LossModel<T>,
    theta0: &[T],
    config: &GdConfig,
    stride: usize,
) -> Result<EdgeTrace<T>> {
    let cfg = GdConfig { stride, ..*config };
    let trajectory = gd_run(model, theta0, &cfg)?;
    let threshold = T::lit(2.0 / config.eta);
    let rows = trajectory
        .points
        .iter()
        .map(|p| {
            Ok(EdgeRow { step: p.step, loss: p.loss, grad_norm: p.grad_norm, sharpness: sharpness(model, &p.theta)?, threshold })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EdgeTrace { rows, trajectory })
}

/// What counts as convergence in a Milnor probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProbeTarget {
    /// End within `tol` of `θ*`.
    Isolated { tol: f64 },
    /// End with residual at most `tol` within distance `neighborhood` of `θ*`.
    Manifold { tol: f64, neighborhood: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilnorReport {
    pub converged: Vec<bool>,
    pub fraction: f64,
}

impl MilnorReport {
    /// Columns `sample,converged`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["sample", "converged"]);
        for (i, &c) in self.converged.iter().enumerate() {
            t.push(vec![Cell::from(i), Cell::from(c)]).expect("two columns");
        }
        t
    }
}

fn ball_sample(center: &[f64], radius: f64, rng: &mut SeededRng) -> Vec<f64> {
    let d = center.len();
    let dir: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let n = norm2(&dir).max(f64::MIN_POSITIVE);
    let r = radius * rng.uniform().powf(1.0 / d as f64);
    center.iter().zip(&dir).map(|(c, v)| c + r * v / n).collect()
}

/// Fraction of uniform starts in the `radius`-ball around `θ*` whose
/// (stochastic) descent run of `config.max_steps` steps ends at the target.
/// Sample `i` draws its start and batches from `rng.child(i)`.
pub fn milnor_probe<T: Scalar>(
    model: &LossModel<T>,
    theta_star: &[T],
    radius: f64,
    samples: usize,
    config: &GdConfig,
    target: ProbeTarget,
    rng: &SeededRng,
) -> Result<MilnorReport> {
    if samples == 0 {
        return Err(Error::Input("need at least one sample".into()));
    }
    let center: Vec<f64> = theta_star.iter().map(|v| v.as_f64()).collect();
    let converged = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.child(i as u64);
            let start: Vec<T> = ball_sample(&center, radius, &mut r).into_iter().map(T::lit).collect();
            let traj = match config.batch {
                Some(_) => sgd_run(model, &start, config, &mut r)?,
                None => gd_run(model, &start, config)?,
            };
            if traj.diverged() {
                return Ok(false);
            }
            let end = traj.final_theta();
            let dist = end.iter().zip(&center).map(|(a, c)| (a.as_f64() - c).powi(2)).sum::<f64>().sqrt();
            Ok(match target {
                ProbeTarget::Isolated { tol } => dist <= tol,
                ProbeTarget::Manifold { tol, neighborhood } => {
                    dist <= neighborhood && model.interpolation_residual(end)?.as_f64() <= tol
                }
            })
        })
        .collect::<Result<Vec<bool>>>()?;
    let fraction = converged.iter().filter(|&&c| c).count() as f64 / samples as f64;
    Ok(MilnorReport { converged, fraction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::model::LossKind;
    use crate::Matrix;

    fn quad(c: f64) -> LossModel<f64> {
        LossModel::quadratic(&Matrix::from_diag(&[c])).unwrap()
    }

    #[test]
    fn quadratic_closed_form() {
        let m = quad(4.0);
        let t = gd_run(&m, &[1.0], &GdConfig::new(0.2, 10)).unwrap();
        for p in &t.points {
            assert!((p.theta[0] - 0.2f64.powi(p.step as i32)).abs() < 1e-15);
        }
        let t = gd_run(&m, &[1.0], &GdConfig::new(2.1 / 4.0, 1000)).unwrap();
        assert!(t.diverged());
        assert!(t.points.iter().all(|p| p.theta[0].abs() <= DIVERGENCE_GUARD));
    }

    #[test]
    fn fixed_point_is_constant() {
        let m = LossModel::<f64>::prod2(LossKind::Squared);
        let t = gd_run(&m, &[2.0, 0.5], &GdConfig::new(0.3, 20)).unwrap();
        assert!(t.points.iter().all(|p| p.theta == vec![2.0, 0.5]));
    }

    #[test]
    fn sgd_preconditions() {
        let single = LossModel::<f64>::scalar_linear(&[(1.0, 0.0)], LossKind::HalfSquared).unwrap();
        let cfg = GdConfig::new(0.1, 5).with_batch(1);
        assert!(matches!(sgd_run(&single, &[1.0], &cfg, &mut SeededRng::new(0)), Err(Error::Config(_))));
        assert!(gd_run(&single, &[1.0], &cfg).is_err());
    }

    #[test]
    fn find_minimum_cases() {
        let m = LossModel::<f64>::prod2(LossKind::Squared);
        let r = find_minimum(&m, &[2.5, 0.41], &MinimizeSchedule::default()).unwrap();
        assert!(r.on_manifold);
        assert!((r.theta[0] * r.theta[1] - 1.0).abs() <= 1e-9);
        let r = find_minimum(&m, &[2.0, 0.5], &MinimizeSchedule::default()).unwrap();
        assert_eq!(r.theta, vec![2.0, 0.5]);
        let bad = LossModel::<f64>::scalar_linear(&[(1.0, 1.0), (1.0, 2.0)], LossKind::HalfSquared).unwrap();
        let r = find_minimum(&bad, &[0.0], &MinimizeSchedule::default()).unwrap();
        assert!(!r.on_manifold);
        assert!((r.theta[0] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn milnor_probe_trivial_cases() {
        let m = quad(1.0);
        let probe = |eta| {
            milnor_probe(&m, &[0.0], 0.5, 20, &GdConfig::new(eta, 100), ProbeTarget::Isolated { tol: 1e-6 }, &SeededRng::new(1))
                .unwrap()
                .fraction
        };
        assert_eq!(probe(1.0), 1.0);
        assert_eq!(probe(2.5), 0.0);
    }
}
