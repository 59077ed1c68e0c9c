use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use crate::numerics::{Geometry, Matrix, SeededRng};
use crate::{Error, Result};

/// State space of a single particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseSpace {
    Euclidean(usize),
    /// `ℝ / 2πℤ`, integrated in lifted coordinates.
    Circle,
}

impl PhaseSpace {
    pub fn dim(&self) -> usize {
        match self {
            PhaseSpace::Euclidean(d) => *d,
            PhaseSpace::Circle => 1,
        }
    }

    pub fn geometry(&self) -> Geometry<f64> {
        match self {
            PhaseSpace::Euclidean(_) => Geometry::Line,
            PhaseSpace::Circle => Geometry::Circle(TAU),
        }
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Intrinsic drift `f_i(t, x_i)` of particle `i`.
pub type Intrinsic = Arc<dyn Fn(usize, f64, &[f64]) -> Vec<f64> + Send + Sync>;
/// Pairwise map `(x_i, x_j) ↦` tangent vector at `x_i`, written into the
/// output slice.
pub type Pairwise = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub enum Interaction {
    /// `Σ_j a_ij g(x_i, x_j)`.
    Pairwise(Pairwise),
    /// `K·Σ_j a_ij sin(x_j − x_i)`; kept separate so all-to-all sums can use
    /// the first circular moments.
    Sine { k: f64 },
    /// Softmax attention `Σ_j softmax_j(M₁x_i · M₂x_j) M₃x_j`; ignores the graph.
    Attention { m1: Matrix<f64>, m2: Matrix<f64>, m3: Matrix<f64> },
}

/// Interacting particle system `x_i' = f_i(x_i) + Σ_j a_ij g(x_i, x_j)`.
///
/// Coupling strengths given to the constructors live in `g`; the graph
/// supplies only the weights `a_ij`.
#[derive(Clone)]
pub struct IpsModel {
    pub name: String,
    pub phase_space: PhaseSpace,
    pub intrinsic: Intrinsic,
    pub interaction: Interaction,
    /// Noise coupling `h(x_i, x_j)` for the stochastic variant.
    pub noise: Option<Pairwise>,
    /// Per-particle parameter count, if `f_i` depends on `i` (frequencies, inputs).
    pub particles: Option<usize>,
}

impl fmt::Debug for IpsModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IpsModel").field("name", &self.name).field("phase_space", &self.phase_space).finish_non_exhaustive()
    }
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite")))
    }
}

impl IpsModel {
    pub fn new(name: impl Into<String>, phase_space: PhaseSpace, intrinsic: Intrinsic, coupling: Pairwise) -> Self {
        Self { name: name.into(), phase_space, intrinsic, interaction: Interaction::Pairwise(coupling), noise: None, particles: None }
    }

    pub fn with_noise(mut self, h: Pairwise) -> Self {
        self.noise = Some(h);
        self
    }

    pub fn dim(&self) -> usize {
        self.phase_space.dim()
    }

    /// Checks that a flat state array fits the model and returns `M`.
    pub fn particle_count(&self, state: &[f64]) -> Result<usize> {
        let d = self.dim();
        if state.is_empty() || !state.len().is_multiple_of(d) {
            return Err(Error::Dimension(format!("state length {} is not a positive multiple of {d}", state.len())));
        }
        let m = state.len() / d;
        if let Some(p) = self.particles {
            if p != m {
                return Err(Error::Dimension(format!("{} is parameterised for {p} particles, got {m}", self.name)));
            }
        }
        Ok(m)
    }

    /// Largest sampled ratio `|g(x,y) − g(x',y')| / |(x,y) − (x',y')|` over
    /// pairs drawn uniformly from `[−r, r]^{2d}`.
    pub fn coupling_lipschitz_estimate(&self, radius: f64, samples: usize, rng: &mut SeededRng) -> f64 {
        let d = self.dim();
        let g = |x: &[f64], y: &[f64]| -> Vec<f64> {
            match &self.interaction {
                Interaction::Pairwise(g) => {
                    let mut out = vec![0.0; d];
                    g(x, y, &mut out);
                    out
                }
                Interaction::Sine { k } => vec![k * (y[0] - x[0]).sin()],
                Interaction::Attention { m3, .. } => m3.matvec(y).unwrap_or_default(),
            }
        };
        let mut best: f64 = 0.0;
        for _ in 0..samples {
            let p: Vec<f64> = (0..4 * d).map(|_| rng.uniform_in(-radius, radius)).collect();
            let (a, b) = p.split_at(2 * d);
            let dist = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            if dist == 0.0 {
                continue;
            }
            let ga = g(&a[..d], &a[d..]);
            let gb = g(&b[..d], &b[d..]);
            let diff = ga.iter().zip(&gb).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            best = best.max(diff / dist);
        }
        best
    }
}

/// Kuramoto oscillators: `f_i = ω_i`, `g = K sin(x_j − x_i)`. A single
/// frequency is shared by all particles.
pub fn kuramoto(k: f64, omega: Vec<f64>) -> Result<IpsModel> {
    check_finite("K", &[k])?;
    check_finite("ω", &omega)?;
    if omega.is_empty() {
        return Err(Error::Config("kuramoto needs at least one frequency".into()));
    }
    let particles = (omega.len() > 1).then_some(omega.len());
    let omega = Arc::new(omega);
    let intrinsic: Intrinsic = Arc::new(move |i, _, _| vec![if omega.len() == 1 { omega[0] } else { omega[i] }]);
    Ok(IpsModel {
        name: "kuramoto".into(),
        phase_space: PhaseSpace::Circle,
        intrinsic,
        interaction: Interaction::Sine { k },
        noise: None,
        particles,
    })
}

/// Desai–Zwanzig: `f = −V'(x)`, `g = K (x_j − x_i)`.
pub fn desai_zwanzig(potential_derivative: Arc<dyn Fn(f64) -> f64 + Send + Sync>, k: f64) -> Result<IpsModel> {
    check_finite("K", &[k])?;
    Ok(IpsModel::new(
        "desai_zwanzig",
        PhaseSpace::Euclidean(1),
        Arc::new(move |_, _, x| vec![-potential_derivative(x[0])]),
        Arc::new(move |x, y, out| out[0] = k * (y[0] - x[0])),
    ))
}

/// Derivative of the double well `V(x) = x⁴/4 − x²/2`.
pub fn double_well_derivative() -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
    Arc::new(|x| x * x * x - x)
}

/// Hegselmann–Krause: `g = K (x_j − x_i) 1{−c ≤ x_j − x_i ≤ d}`. Infinite
/// thresholds are allowed.
pub fn hegselmann_krause(k: f64, c: f64, d: f64) -> Result<IpsModel> {
    check_finite("K", &[k])?;
    if !(c > 0.0 && d > 0.0) {
        return Err(Error::Config(format!("thresholds must be positive, got c = {c}, d = {d}")));
    }
    Ok(IpsModel::new(
        "hegselmann_krause",
        PhaseSpace::Euclidean(1),
        Arc::new(|_, _, _| vec![0.0]),
        Arc::new(move |x, y, out| {
            let gap = y[0] - x[0];
            out[0] = if -c <= gap && gap <= d { k * gap } else { 0.0 };
        }),
    ))
}

/// Cucker–Smale flocking on `(position, velocity) ∈ ℝ²`:
/// `f = (v, 0)`, `g = (0, K (v_j − v_i) / (1 + |p_i − p_j|^α))`.
pub fn cucker_smale(k: f64, alpha: f64) -> Result<IpsModel> {
    check_finite("K", &[k])?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Config(format!("α must be positive, got {alpha}")));
    }
    Ok(IpsModel::new(
        "cucker_smale",
        PhaseSpace::Euclidean(2),
        Arc::new(|_, _, x| vec![x[1], 0.0]),
        Arc::new(move |x, y, out| {
            out[0] = 0.0;
            out[1] = k * (y[1] - x[1]) / (1.0 + (x[0] - y[0]).abs().powf(alpha));
        }),
    ))
}

/// Continuous Hopfield network `x_i' = −α x_i + Σ_j a_ij σ(x_j) + b_i` with
/// the logistic `σ`. The weights `a_ij` come from the graph.
pub fn hopfield_cts(alpha: f64, b: Vec<f64>) -> Result<IpsModel> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Config(format!("α must be positive, got {alpha}")));
    }
    check_finite("b", &b)?;
    if b.is_empty() {
        return Err(Error::Config("hopfield_cts needs at least one input b_i".into()));
    }
    let particles = (b.len() > 1).then_some(b.len());
    let b = Arc::new(b);
    let mut m = IpsModel::new(
        "hopfield_cts",
        PhaseSpace::Euclidean(1),
        Arc::new(move |i, _, x| vec![-alpha * x[0] + if b.len() == 1 { b[0] } else { b[i] }]),
        Arc::new(|_, y, out| out[0] = 1.0 / (1.0 + (-y[0]).exp())),
    );
    m.particles = particles;
    Ok(m)
}

/// Continuous-depth self-attention on `ℝ^d` with constant matrices
/// `M₁, M₂ ∈ ℝ^{m₀×d}`, `M₃ ∈ ℝ^{d×d}`.
pub fn transformer_ode(m1: Matrix<f64>, m2: Matrix<f64>, m3: Matrix<f64>) -> Result<IpsModel> {
    let d = m3.rows();
    if m3.cols() != d || m1.cols() != d || m2.cols() != d || m1.rows() != m2.rows() || d == 0 {
        return Err(Error::Config(format!(
            "transformer needs M1, M2 of equal shape m0×d and M3 d×d, got {}×{}, {}×{}, {}×{}",
            m1.rows(),
            m1.cols(),
            m2.rows(),
            m2.cols(),
            m3.rows(),
            m3.cols()
        )));
    }
    if !(m1.data().iter().chain(m2.data()).chain(m3.data()).all(|v| v.is_finite())) {
        return Err(Error::Config("transformer matrices must be finite".into()));
    }
    Ok(IpsModel {
        name: "transformer".into(),
        phase_space: PhaseSpace::Euclidean(d),
        intrinsic: Arc::new(move |_, _, _| vec![0.0; d]),
        interaction: Interaction::Attention { m1, m2, m3 },
        noise: None,
        particles: None,
    })
}

/// Softmax attention weights of row `i` for queries `q_i = M₁x_i` and keys `k_j = M₂x_j`.
pub(crate) fn softmax_row(q: &[f64], keys: &[Vec<f64>]) -> Vec<f64> {
    let logits: Vec<f64> = keys.iter().map(|k| q.iter().zip(k).map(|(a, b)| a * b).sum()).collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}
