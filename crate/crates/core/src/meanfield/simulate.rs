use rayon::prelude::*;

use super::graph::{GraphSpec, Normalization};
use super::model::{softmax_row, wrap_angle, Interaction, IpsModel, PhaseSpace};
use crate::networks::rk4_step;
use crate::numerics::{Matrix, SeededRng};
use crate::table::{Cell, Table};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    /// Requested step; shrunk so that a whole number of steps reaches `t_end`.
    pub dt: f64,
    pub t_end: f64,
    /// Record the state every this many steps (the final state is always recorded).
    pub record_every: usize,
    pub scheme: Scheme,
}

impl SimParams {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self { dt, t_end, record_every: 1, scheme: Scheme::Rk4 }
    }

    pub fn with_record_every(mut self, n: usize) -> Self {
        self.record_every = n;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Step count and effective step.
    pub fn grid(&self) -> Result<(usize, f64)> {
        if !(self.dt > 0.0) || !(self.t_end >= 0.0) || !self.dt.is_finite() || !self.t_end.is_finite() {
            return Err(Error::Input(format!("need dt > 0 and T ≥ 0, got dt = {}, T = {}", self.dt, self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::Input("record_every must be at least 1".into()));
        }
        let n = (self.t_end / self.dt * (1.0 - 1e-12)).ceil() as usize;
        Ok(if n == 0 { (0, self.dt) } else { (n, self.t_end / n as f64) })
    }
}

/// Recorded states of a particle simulation. States are flat arrays of
/// `M·dim` entries; circle phases are stored in lifted coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct IpsTrajectory {
    pub phase_space: PhaseSpace,
    pub times: Vec<f64>,
    pub lifted: Vec<Vec<f64>>,
}

impl IpsTrajectory {
    pub fn particles(&self) -> usize {
        self.lifted[0].len() / self.phase_space.dim()
    }

    /// State `k` as reported: circle phases wrapped into `[0, 2π)`.
    pub fn state(&self, k: usize) -> Vec<f64> {
        match self.phase_space {
            PhaseSpace::Circle => self.lifted[k].iter().map(|&x| wrap_angle(x)).collect(),
            PhaseSpace::Euclidean(_) => self.lifted[k].clone(),
        }
    }

    pub fn final_state(&self) -> Vec<f64> {
        self.state(self.times.len() - 1)
    }

    /// Columns `t,order_parameter`; circle phase spaces only.
    pub fn order_parameter_table(&self) -> Result<Table> {
        if self.phase_space != PhaseSpace::Circle {
            return Err(Error::Unsupported("order parameter needs a circular phase space".into()));
        }
        let mut t = Table::new(["t", "order_parameter"]);
        for (s, x) in self.times.iter().zip(&self.lifted) {
            t.push(vec![Cell::from(*s), Cell::from(order_parameter(x))])?;
        }
        Ok(t)
    }

    /// Long format `t,particle,x1,…,xd`.
    pub fn state_table(&self) -> Result<Table> {
        let d = self.phase_space.dim();
        let mut t = Table::new(["t".to_string(), "particle".to_string()].into_iter().chain((1..=d).map(|k| format!("x{k}"))));
        for k in 0..self.times.len() {
            let s = self.state(k);
            for (i, x) in s.chunks(d).enumerate() {
                let mut row = vec![Cell::from(self.times[k]), Cell::from(i)];
                row.extend(x.iter().map(|&v| Cell::from(v)));
                t.push(row)?;
            }
        }
        Ok(t)
    }
}

/// `|(1/M) Σ e^{i x_j}|`.
pub fn order_parameter(phases: &[f64]) -> f64 {
    if phases.is_empty() {
        return 0.0;
    }
    let (s, c) = phases.iter().fold((0.0, 0.0), |(s, c), &x| (s + x.sin(), c + x.cos()));
    (s.hypot(c) / phases.len() as f64).min(1.0)
}

/// Interaction weights in a form the drift can use.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Weights {
    Uniform(f64),
    Dense(Matrix<f64>),
}

impl Weights {
    /// Weights entering `Σ_j w_ij g` under `normalization`, then multiplied by `factor`.
    pub(crate) fn build(graph: &GraphSpec, m: usize, normalization: Normalization, factor: f64) -> Result<Self> {
        Ok(match graph {
            GraphSpec::AllToAll(c) => {
                if !c.is_finite() {
                    return Err(Error::Config("all-to-all weight must be finite".into()));
                }
                let w = match normalization {
                    Normalization::Summed => c / m as f64,
                    Normalization::Averaged => *c,
                };
                Weights::Uniform(w * factor)
            }
            _ => {
                let a = graph.weights(m, normalization)?;
                Weights::Dense(if factor == 1.0 { a } else { a.scale(factor) })
            }
        })
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Weights::Uniform(w) => *w,
            Weights::Dense(a) => a[(i, j)],
        }
    }
}

/// `Σ_j w_ij p(x_i, x_j)` into `out`, summing `j` in order.
type PairFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

fn pair_sum(p: &PairFn, w: &Weights, i: usize, x: &[f64], d: usize, out: &mut [f64]) {
    let xi = &x[i * d..(i + 1) * d];
    let mut buf = vec![0.0; d];
    for (j, xj) in x.chunks(d).enumerate() {
        let a = w.get(i, j);
        if a == 0.0 {
            continue;
        }
        p(xi, xj, &mut buf);
        for (o, b) in out.iter_mut().zip(&buf) {
            *o += a * b;
        }
    }
}

/// Full drift `f_i(t, x_i) + Σ_j w_ij g(x_i, x_j)` for all particles.
pub(crate) fn drift(model: &IpsModel, w: &Weights, t: f64, x: &[f64]) -> Vec<f64> {
    let d = model.dim();
    let m = x.len() / d;
    let mut out = vec![0.0; x.len()];
    match &model.interaction {
        Interaction::Pairwise(g) => {
            out.par_chunks_mut(d).enumerate().for_each(|(i, o)| pair_sum(g.as_ref(), w, i, x, d, o));
        }
        Interaction::Sine { k } => match w {
            Weights::Uniform(a) => {
                // Σ_j sin(x_j − x_i) = cos x_i Σ sin x_j − sin x_i Σ cos x_j
                let (s, c) = x.iter().fold((0.0, 0.0), |(s, c), &v| (s + v.sin(), c + v.cos()));
                out.par_iter_mut().zip(x.par_iter()).for_each(|(o, &xi)| *o = k * a * (xi.cos() * s - xi.sin() * c));
            }
            Weights::Dense(a) => {
                out.par_iter_mut().enumerate().for_each(|(i, o)| {
                    let xi = x[i];
                    *o = k * x.iter().enumerate().map(|(j, &xj)| a[(i, j)] * (xj - xi).sin()).sum::<f64>();
                });
            }
        },
        Interaction::Attention { m1, m2, m3 } => {
            let apply = |mat: &Matrix<f64>| -> Vec<Vec<f64>> {
                x.chunks(d).map(|xi| mat.matvec(xi).expect("shapes checked at construction")).collect()
            };
            let (q, keys, vals) = (apply(m1), apply(m2), apply(m3));
            out.par_chunks_mut(d).enumerate().for_each(|(i, o)| {
                for (wj, v) in softmax_row(&q[i], &keys).iter().zip(&vals) {
                    for (ok, vk) in o.iter_mut().zip(v) {
                        *ok += wj * vk;
                    }
                }
            });
        }
    }
    for i in 0..m {
        let f = (model.intrinsic)(i, t, &x[i * d..(i + 1) * d]);
        for (o, fk) in out[i * d..(i + 1) * d].iter_mut().zip(f) {
            *o += fk;
        }
    }
    out
}

fn check_state(x: &[f64], step: usize, t: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { step, message: format!("non-finite particle state at t = {t}") })
    }
}

struct Recorder {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    every: usize,
    last: usize,
}

impl Recorder {
    fn new(x0: &[f64], every: usize) -> Self {
        Self { times: vec![0.0], states: vec![x0.to_vec()], every, last: 0 }
    }

    fn offer(&mut self, step: usize, total: usize, t: f64, x: &[f64]) {
        if (step.is_multiple_of(self.every) || step == total)
            && self.last != step {
                self.times.push(t);
                self.states.push(x.to_vec());
                self.last = step;
            }
    }
}

/// Deterministic coupled system `x_i' = f_i(x_i) + Σ_j a_ij g(x_i, x_j)`
/// with the graph in the summed convention (all-to-all weight `c/M`).
pub fn simulate_ips(model: &IpsModel, graph: &GraphSpec, x0: &[f64], params: &SimParams) -> Result<IpsTrajectory> {
    let m = model.particle_count(x0)?;
    let (steps, h) = params.grid()?;
    let w = Weights::build(graph, m, Normalization::Summed, 1.0)?;
    check_state(x0, 0, 0.0)?;
    let mut rec = Recorder::new(x0, params.record_every);
    let mut x = x0.to_vec();
    for n in 0..steps {
        let t = n as f64 * h;
        x = match params.scheme {
            Scheme::Rk4 => rk4_step(t, &x, h, |s, y| drift(model, &w, s, y)).0,
            Scheme::Euler => {
                let f = drift(model, &w, t, &x);
                x.iter().zip(&f).map(|(a, b)| a + h * b).collect()
            }
        };
        let t1 = (n + 1) as f64 * h;
        check_state(&x, n + 1, t1)?;
        rec.offer(n + 1, steps, t1, &x);
    }
    Ok(IpsTrajectory { phase_space: model.phase_space, times: rec.times, lifted: rec.states })
}

/// Euler–Maruyama for
/// `dx_i = f(x_i) dt + (1/M) Σ_j a_ij g(x_i, x_j) dt + (1/M) Σ_j â_ij h(x_i, x_j) dW^i`
/// with graphs in the averaged convention (all-to-all weight `c`).
///
/// Particle `i` draws its Brownian increments from `rng.child(i)`, so the
/// result does not depend on the thread count.
pub fn simulate_sde_ips(
    model: &IpsModel,
    drift_graph: &GraphSpec,
    noise_graph: &GraphSpec,
    x0: &[f64],
    params: &SimParams,
    rng: &SeededRng,
) -> Result<IpsTrajectory> {
    let Some(h_map) = model.noise.clone() else {
        return Err(Error::Config(format!("{} has no noise coupling h", model.name)));
    };
    let m = model.particle_count(x0)?;
    let d = model.dim();
    let (steps, dt) = params.grid()?;
    let inv_m = 1.0 / m as f64;
    let w = Weights::build(drift_graph, m, Normalization::Averaged, inv_m)?;
    let wn = Weights::build(noise_graph, m, Normalization::Averaged, inv_m)?;
    check_state(x0, 0, 0.0)?;
    let mut streams: Vec<SeededRng> = (0..m).map(|i| rng.child(i as u64)).collect();
    let sq = dt.sqrt();
    let mut rec = Recorder::new(x0, params.record_every);
    let mut x = x0.to_vec();
    for n in 0..steps {
        let t = n as f64 * dt;
        let f = drift(model, &w, t, &x);
        let mut next = vec![0.0; x.len()];
        next.par_chunks_mut(d).zip(streams.par_iter_mut()).enumerate().for_each(|(i, (o, s))| {
            let mut noise = vec![0.0; d];
            pair_sum(h_map.as_ref(), &wn, i, &x, d, &mut noise);
            for k in 0..d {
                let dw = sq * s.normal();
                o[k] = x[i * d + k] + dt * f[i * d + k] + noise[k] * dw;
            }
        });
        x = next;
        let t1 = (n + 1) as f64 * dt;
        check_state(&x, n + 1, t1)?;
        rec.offer(n + 1, steps, t1, &x);
    }
    Ok(IpsTrajectory { phase_space: model.phase_space, times: rec.times, lifted: rec.states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::model::kuramoto;

    #[test]
    fn grid_hits_horizon() {
        let (n, h) = SimParams::new(0.1, 1.0).grid().unwrap();
        assert_eq!(n, 10);
        assert!((h - 0.1).abs() < 1e-16);
        let (n, h) = SimParams::new(0.3, 1.0).grid().unwrap();
        assert_eq!(n, 4);
        assert_eq!(h, 0.25);
        assert_eq!(SimParams::new(0.1, 0.0).grid().unwrap().0, 0);
    }

    #[test]
    fn order_parameter_examples() {
        assert!((order_parameter(&[0.7; 5]) - 1.0).abs() < 1e-15);
        let roots: Vec<f64> = (0..7).map(|k| k as f64 * std::f64::consts::TAU / 7.0).collect();
        assert!(order_parameter(&roots) < 1e-12);
        assert!(order_parameter(&[0.0, std::f64::consts::PI]) < 1e-15);
    }

    #[test]
    fn dense_and_uniform_sine_agree() {
        let m = kuramoto(1.3, vec![0.0]).unwrap();
        let x = [0.1, 2.0, -1.0, 4.0];
        let u = drift(&m, &Weights::Uniform(0.25), 0.0, &x);
        let d = drift(&m, &Weights::Dense(Matrix::new(4, 4, vec![0.25; 16]).unwrap()), 0.0, &x);
        for (a, b) in u.iter().zip(&d) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn records_final_state_once() {
        let m = kuramoto(0.0, vec![1.0]).unwrap();
        let tr = simulate_ips(&m, &GraphSpec::AllToAll(1.0), &[0.0], &SimParams::new(0.1, 1.0).with_record_every(3)).unwrap();
        assert_eq!(tr.times.len(), 5);
        assert!((tr.lifted[4][0] - 1.0).abs() < 1e-14);
    }
}
