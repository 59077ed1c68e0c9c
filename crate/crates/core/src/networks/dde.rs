use std::fmt;
use std::sync::Arc;

use super::ode::{check_affine_pair, rk4_step, VectorField};
use crate::numerics::{Matrix, Scalar};
use crate::{Error, Result};

/// Read access to the solution segment `h_t(s) = h(t + s)`, `s ∈ [−τ, 0]`,
/// while a delay equation is being integrated.
///
/// Before `t = 0` the history is the constant initial function. Completed
/// steps are interpolated by cubic Hermite polynomials through the stored
/// states and derivatives; a query that lands inside the step being taken is
/// interpolated linearly towards the current stage state.
pub struct History<'a, T> {
    t: T,
    tau: T,
    initial: &'a [T],
    times: &'a [T],
    states: &'a [Vec<T>],
    derivs: &'a [Vec<T>],
    base_t: T,
    base: &'a [T],
    stage: &'a [T],
}

impl<'a, T: Scalar> History<'a, T> {
    pub fn tau(&self) -> T {
        self.tau
    }

    /// Current time `t`.
    pub fn time(&self) -> T {
        self.t
    }

    /// `h(t + s)`, with `s` clamped to `[−τ, 0]`.
    pub fn at(&self, s: T) -> Vec<T> {
        if s >= T::zero() {
            return self.stage.to_vec();
        }
        let s = s.max(-self.tau);
        let u = self.t + s;
        if u <= T::zero() {
            return self.initial.to_vec();
        }
        if u >= self.base_t {
            let span = self.t - self.base_t;
            if span <= T::zero() {
                return self.base.to_vec();
            }
            let theta = (u - self.base_t) / span;
            return lerp(self.base, self.stage, theta);
        }
        let k = self.times.partition_point(|&tk| tk <= u).saturating_sub(1).min(self.times.len() - 2);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let dt = t1 - t0;
        let theta = (u - t0) / dt;
        if k + 1 < self.derivs.len() {
            hermite(&self.states[k], &self.states[k + 1], &self.derivs[k], &self.derivs[k + 1], dt, theta)
        } else {
            lerp(&self.states[k], &self.states[k + 1], theta)
        }
    }
}

fn lerp<T: Scalar>(a: &[T], b: &[T], theta: T) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + theta * (y - x)).collect()
}

fn hermite<T: Scalar>(y0: &[T], y1: &[T], f0: &[T], f1: &[T], dt: T, s: T) -> Vec<T> {
    let (two, three) = (T::lit(2.0), T::lit(3.0));
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = two * s3 - three * s2 + T::one();
    let h10 = s3 - two * s2 + s;
    let h01 = three * s2 - two * s3;
    let h11 = s3 - s2;
    (0..y0.len()).map(|i| h00 * y0[i] + h10 * dt * f0[i] + h01 * y1[i] + h11 * dt * f1[i]).collect()
}

/// Delay vector field `F(t, h_t)`.
pub trait DelayVectorField<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, t: T, history: &History<'_, T>) -> Vec<T>;
}

/// `F(t, h_t) = f(t, h_t(0))`: an ordinary field seen as a delay field.
pub struct Instantaneous<T: Scalar>(pub Arc<dyn VectorField<T>>);

impl<T: Scalar> DelayVectorField<T> for Instantaneous<T> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, t: T, history: &History<'_, T>) -> Vec<T> {
        self.0.eval(t, &history.at(T::zero()))
    }
}

/// `F(t, h_t) = f(t, h_t(−τ))`: an ordinary field evaluated on the delayed state.
pub struct Delayed<T: Scalar>(pub Arc<dyn VectorField<T>>);

impl<T: Scalar> DelayVectorField<T> for Delayed<T> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, t: T, history: &History<'_, T>) -> Vec<T> {
        self.0.eval(t, &history.at(-history.tau()))
    }
}

/// Delay field backed by a closure.
pub struct FnDelayField<F> {
    dim: usize,
    f: F,
}

impl<F> FnDelayField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T: Scalar, F: Fn(T, &History<'_, T>) -> Vec<T> + Send + Sync> DelayVectorField<T> for FnDelayField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: T, history: &History<'_, T>) -> Vec<T> {
        (self.f)(t, history)
    }
}

/// Neural DDE: `h'(t) = F(t, h_t)` with constant initial function `W x + b`
/// on `[−τ, 0]` and output `W̃ h(T) + b̃`.
#[derive(Clone)]
pub struct NeuralDdeSpec<T: Scalar> {
    pub w: Matrix<T>,
    pub b: Vec<T>,
    pub w_tilde: Matrix<T>,
    pub b_tilde: Vec<T>,
    pub field: Arc<dyn DelayVectorField<T>>,
    pub field_id: Option<String>,
    pub tau: T,
    pub t_end: T,
    pub steps: usize,
}

impl<T: Scalar> fmt::Debug for NeuralDdeSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NeuralDdeSpec")
            .field("d", &self.w.cols())
            .field("m", &self.w.rows())
            .field("q", &self.w_tilde.rows())
            .field("field_id", &self.field_id)
            .field("tau", &self.tau)
            .field("t_end", &self.t_end)
            .field("steps", &self.steps)
            .finish()
    }
}

impl<T: Scalar> NeuralDdeSpec<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        w: Matrix<T>,
        b: Vec<T>,
        w_tilde: Matrix<T>,
        b_tilde: Vec<T>,
        field: Arc<dyn DelayVectorField<T>>,
        tau: T,
        t_end: T,
        steps: usize,
    ) -> Result<Self> {
        if !(tau >= T::zero()) || !tau.is_finite() {
            return Err(Error::Input("delay τ must be nonnegative".into()));
        }
        if !(t_end > T::zero()) || !t_end.is_finite() {
            return Err(Error::Input("horizon T must be positive".into()));
        }
        if steps == 0 {
            return Err(Error::Input("step count must be at least 1".into()));
        }
        check_affine_pair(&w, &b, &w_tilde, &b_tilde, field.dim())?;
        Ok(Self { w, b, w_tilde, b_tilde, field, field_id: None, tau, t_end, steps })
    }

    pub fn identity_affine(field: Arc<dyn DelayVectorField<T>>, tau: T, t_end: T, steps: usize) -> Result<Self> {
        let m = field.dim();
        Self::new(Matrix::identity(m), vec![T::zero(); m], Matrix::identity(m), vec![T::zero(); m], field, tau, t_end, steps)
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn state_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w_tilde.rows()
    }

    /// Number of RK4 steps actually taken: `steps`, raised if needed so that
    /// a positive delay is never shorter than one step.
    pub fn effective_steps(&self) -> usize {
        if self.tau > T::zero() {
            let needed = (self.t_end / self.tau).ceil().to_usize().unwrap_or(usize::MAX);
            self.steps.max(needed)
        } else {
            self.steps
        }
    }
}

/// Integrates the DDE by the method of steps and returns the grid states.
pub fn ndde_trajectory<T: Scalar>(spec: &NeuralDdeSpec<T>, x: &[T]) -> Result<Vec<Vec<T>>> {
    let mut h0 = spec.w.matvec(x)?;
    for (hi, &bi) in h0.iter_mut().zip(&spec.b) {
        *hi = *hi + bi;
    }
    let steps = spec.effective_steps();
    let dt = spec.t_end / T::from_usize_lossy(steps);
    let times: Vec<T> = (0..=steps).map(|n| T::from_usize_lossy(n) * dt).collect();
    let mut states: Vec<Vec<T>> = Vec::with_capacity(steps + 1);
    let mut derivs: Vec<Vec<T>> = Vec::with_capacity(steps + 1);
    states.push(h0.clone());
    for n in 0..steps {
        let t = T::from_usize_lossy(n) * dt;
        let (next, k1) = {
            let base = &states[n];
            rk4_step(t, base, dt, |ts, ys| {
                let history = History {
                    t: ts,
                    tau: spec.tau,
                    initial: &h0,
                    times: &times[..=n],
                    states: &states,
                    derivs: &derivs,
                    base_t: t,
                    base,
                    stage: ys,
                };
                spec.field.eval(ts, &history)
            })
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: n + 1, message: format!("non-finite state at t = {}", t + dt) });
        }
        derivs.push(k1);
        states.push(next);
    }
    Ok(states)
}

/// Evaluates a neural DDE at `x`.
pub fn ndde_forward<T: Scalar>(spec: &NeuralDdeSpec<T>, x: &[T]) -> Result<Vec<T>> {
    let states = ndde_trajectory(spec, x)?;
    let h = states.last().expect("nonempty trajectory");
    let mut y = spec.w_tilde.apply(h);
    for (yi, &bi) in y.iter_mut().zip(&spec.b_tilde) {
        *yi = *yi + bi;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::ode::{node_forward, BuiltinField, NeuralOdeSpec};

    #[test]
    fn zero_field_passes_lift_through() {
        let spec = NeuralDdeSpec::new(
            Matrix::new(2, 1, vec![1.0, -2.0]).unwrap(),
            vec![0.5, 0.0],
            Matrix::new(1, 2, vec![1.0, 1.0]).unwrap(),
            vec![0.25],
            Arc::new(Instantaneous(Arc::new(BuiltinField::<f64>::Zero { dim: 2 }))),
            0.3,
            1.0,
            10,
        )
        .unwrap();
        // lift (3.5, -6) then sum + 0.25
        assert_eq!(ndde_forward(&spec, &[3.0]).unwrap(), vec![3.5 - 6.0 + 0.25]);
    }

    #[test]
    fn zero_delay_reproduces_ode() {
        let f: Arc<dyn VectorField<f64>> = Arc::new(BuiltinField::<f64>::from_id("tanh-net:11", 3).unwrap());
        let ode = NeuralOdeSpec::identity_affine(f.clone(), 1.3, 37).unwrap();
        let dde = NeuralDdeSpec::identity_affine(Arc::new(Instantaneous(f)), 0.0, 1.3, 37).unwrap();
        let x = [0.3, -0.8, 1.1];
        assert_eq!(node_forward(&ode, &x).unwrap(), ndde_forward(&dde, &x).unwrap());
    }

    #[test]
    fn first_delay_interval_is_linear() {
        // x' = -x(t - π/2) with history 1 gives x(t) = 1 - t on [0, π/2]
        let tau = std::f64::consts::FRAC_PI_2;
        let field = Arc::new(Delayed(Arc::new(BuiltinField::<f64>::Decay { dim: 1, rate: 1.0 })));
        let spec = NeuralDdeSpec::identity_affine(field, tau, tau, 200).unwrap();
        let y = ndde_forward(&spec, &[1.0]).unwrap()[0];
        assert!((y - (1.0 - tau)).abs() < 1e-12);
    }

    #[test]
    fn short_delay_forces_substeps() {
        let field = Arc::new(Delayed(Arc::new(BuiltinField::<f64>::Decay { dim: 1, rate: 1.0 })));
        let spec = NeuralDdeSpec::identity_affine(field, 0.1, 1.0, 2).unwrap();
        assert_eq!(spec.effective_steps(), 10);
    }
}
