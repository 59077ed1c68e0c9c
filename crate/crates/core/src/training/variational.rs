use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::networks::{rk4_step, VectorField};
use crate::numerics::{default_step, finite_diff_jacobian, Matrix, Scalar};
use crate::table::{Cell, Table};
use crate::{Error, Result};

/// One differentiable stage `x ↦ g(x)` of a layered map.
pub trait Stage<T: Scalar>: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn apply(&self, x: &[T]) -> Result<Vec<T>>;

    /// `∂g/∂x`, rows indexed by outputs; central differences unless overridden.
    fn jacobian(&self, x: &[T]) -> Result<Matrix<T>> {
        finite_diff_jacobian(|p| self.apply(p), x, default_step(x))
    }
}

/// Stage from a map and optionally its Jacobian.
pub struct FnStage<F, J> {
    dims: (usize, usize),
    f: F,
    jac: Option<J>,
}

impl<F> FnStage<F, fn(&[f64]) -> Matrix<f64>> {
    pub fn new(input_dim: usize, output_dim: usize, f: F) -> Self {
        Self { dims: (input_dim, output_dim), f, jac: None }
    }
}

impl<F, J> FnStage<F, J> {
    pub fn with_jacobian(input_dim: usize, output_dim: usize, f: F, jac: J) -> Self {
        Self { dims: (input_dim, output_dim), f, jac: Some(jac) }
    }
}

impl<F, J> Stage<f64> for FnStage<F, J>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
    J: Fn(&[f64]) -> Matrix<f64> + Send + Sync,
{
    fn input_dim(&self) -> usize {
        self.dims.0
    }
    fn output_dim(&self) -> usize {
        self.dims.1
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok((self.f)(x))
    }
    fn jacobian(&self, x: &[f64]) -> Result<Matrix<f64>> {
        match &self.jac {
            Some(j) => Ok(j(x)),
            None => finite_diff_jacobian(|p| Ok((self.f)(p)), x, default_step(x)),
        }
    }
}

/// One RK4 step of `h' = f(t, h)` from time `t`. Its Jacobian is the exact
/// derivative of the discrete step, obtained by running the same step on
/// the variational system `V' = ∂f/∂h · V`.
pub struct Rk4Stage<T: Scalar> {
    pub field: Arc<dyn VectorField<T>>,
    pub t: T,
    pub dt: T,
}

impl<T: Scalar> Stage<T> for Rk4Stage<T> {
    fn input_dim(&self) -> usize {
        self.field.dim()
    }
    fn output_dim(&self) -> usize {
        self.field.dim()
    }
    fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(rk4_step(self.t, x, self.dt, |s, y| self.field.eval(s, y)).0)
    }
    fn jacobian(&self, x: &[T]) -> Result<Matrix<T>> {
        let m = x.len();
        let mut aug = x.to_vec();
        aug.extend(Matrix::<T>::identity(m).data());
        let mut failure = None;
        let (next, _) = rk4_step(self.t, &aug, self.dt, |s, z| {
            let (y, v) = z.split_at(m);
            let mut out = self.field.eval(s, y);
            let vm = Matrix::new(m, m, v.to_vec()).expect("square block");
            match self.field.jacobian(s, y).and_then(|j| j.matmul(&vm)) {
                Ok(jv) => out.extend(jv.data()),
                Err(e) => {
                    failure = Some(e);
                    out.extend(std::iter::repeat_n(T::nan(), m * m));
                }
            }
            out
        });
        if let Some(e) = failure {
            return Err(e);
        }
        Matrix::new(m, m, next[m..].to_vec())
    }
}

/// The RK4 steps of `h' = f(t, h)` over `[0, t_end]` as stages.
pub fn ode_stages<T: Scalar>(field: Arc<dyn VectorField<T>>, t_end: T, steps: usize) -> Result<Vec<Box<dyn Stage<T>>>> {
    if steps == 0 || !(t_end > T::zero()) {
        return Err(Error::Input("need a positive horizon and at least one step".into()));
    }
    let dt = t_end / T::from_usize_lossy(steps);
    Ok((0..steps)
        .map(|n| Box::new(Rk4Stage { field: field.clone(), t: T::from_usize_lossy(n) * dt, dt }) as Box<dyn Stage<T>>)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Propagation<T> {
    /// Push a tangent vector through the stages in order.
    Forward(Vec<T>),
    /// Pull a cotangent back from the output.
    Reverse(Vec<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult<T> {
    pub output: Vec<T>,
    /// `J v` in forward mode, `Jᵀ c` in reverse mode.
    pub derivative: Vec<T>,
}

/// Forward- or reverse-mode derivative of `g_L ∘ … ∘ g_1` at `x0`.
pub fn variational_propagate<T: Scalar>(
    stages: &[Box<dyn Stage<T>>],
    x0: &[T],
    mode: &Propagation<T>,
) -> Result<PropagationResult<T>> {
    let mut states = vec![x0.to_vec()];
    for (l, s) in stages.iter().enumerate() {
        let x = states.last().expect("nonempty");
        if x.len() != s.input_dim() {
            return Err(Error::Structural { layer: l, message: format!("stage expects {} inputs, got {}", s.input_dim(), x.len()) });
        }
        let y = s.apply(x)?;
        states.push(y);
    }
    let output = states.last().expect("nonempty").clone();
    let derivative = match mode {
        Propagation::Forward(v) => {
            if v.len() != x0.len() {
                return Err(Error::Dimension("tangent must match the input".into()));
            }
            let mut v = v.clone();
            for (s, x) in stages.iter().zip(&states) {
                v = s.jacobian(x)?.matvec(&v)?;
            }
            v
        }
        Propagation::Reverse(c) => {
            if c.len() != output.len() {
                return Err(Error::Dimension("cotangent must match the output".into()));
            }
            let mut c = c.clone();
            for (s, x) in stages.iter().zip(&states).rev() {
                c = s.jacobian(x)?.tmatvec(&c)?;
            }
            c
        }
    };
    Ok(PropagationResult { output, derivative })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingTrace {
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub numeric: Vec<[f64; 2]>,
    pub exact: Vec<[f64; 2]>,
    /// `1/|λ_i|` for `λ = (−1, −ε)`.
    pub decay_times: [f64; 2],
    pub max_error: f64,
}

impl VanishingTrace {
    /// Columns `t,p1,p2,exact1,exact2`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["t", "p1", "p2", "exact1", "exact2"]);
        for ((&s, p), e) in self.times.iter().zip(&self.numeric).zip(&self.exact) {
            t.push(vec![Cell::from(s), Cell::from(p[0]), Cell::from(p[1]), Cell::from(e[0]), Cell::from(e[1])])
                .expect("five columns");
        }
        t
    }
}

/// RK4 integration of the gradient flow `p' = diag(−1, −ε) p` of
/// `L(p) = ½p₁² + ½εp₂²`, next to the exact exponentials.
pub fn vanishing_gradient_demo(epsilon: f64, p0: [f64; 2], horizon: f64, dt: f64) -> Result<VanishingTrace> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Input(format!("ε must lie in (0, 1], got {epsilon}")));
    }
    if !(horizon >= 0.0) || !(dt > 0.0) {
        return Err(Error::Input("need horizon ≥ 0 and dt > 0".into()));
    }
    let steps = (horizon / dt).round() as usize;
    let h = if steps == 0 { 0.0 } else { horizon / steps as f64 };
    let rates = [1.0, epsilon];
    let mut p = p0.to_vec();
    let mut times = vec![0.0];
    let mut numeric = vec![p0];
    let mut exact = vec![p0];
    let mut max_error: f64 = 0.0;
    for n in 0..steps {
        p = rk4_step(n as f64 * h, &p, h, |_, y| vec![-rates[0] * y[0], -rates[1] * y[1]]).0;
        let t = (n + 1) as f64 * h;
        let e = [p0[0] * (-rates[0] * t).exp(), p0[1] * (-rates[1] * t).exp()];
        max_error = max_error.max((p[0] - e[0]).abs()).max((p[1] - e[1]).abs());
        times.push(t);
        numeric.push([p[0], p[1]]);
        exact.push(e);
    }
    Ok(VanishingTrace { epsilon, times, numeric, exact, decay_times: [1.0, 1.0 / epsilon], max_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::BuiltinField;

    #[test]
    fn chain_rule_example() {
        let stages: Vec<Box<dyn Stage<f64>>> = vec![
            Box::new(FnStage::with_jacobian(1, 1, |x: &[f64]| vec![x[0] * x[0]], |x: &[f64]| Matrix::from_diag(&[2.0 * x[0]]))),
            Box::new(FnStage::with_jacobian(1, 1, |x: &[f64]| vec![x[0].sin()], |x: &[f64]| Matrix::from_diag(&[x[0].cos()]))),
        ];
        let f = variational_propagate(&stages, &[0.5], &Propagation::Forward(vec![1.0])).unwrap();
        let r = variational_propagate(&stages, &[0.5], &Propagation::Reverse(vec![1.0])).unwrap();
        let expect = 0.25f64.cos();
        assert!((f.derivative[0] - expect).abs() < 1e-15);
        assert_eq!(f.derivative, r.derivative);
    }

    #[test]
    fn rk4_stage_jacobian_matches_differences() {
        let field: Arc<dyn VectorField<f64>> = Arc::new(BuiltinField::from_id("tanh-net:5", 3).unwrap());
        let s = Rk4Stage { field: field.clone(), t: 0.0, dt: 0.1 };
        let x = [0.3, -0.2, 0.8];
        let exact = s.jacobian(&x).unwrap();
        let fd = finite_diff_jacobian(|p| s.apply(p), &x, 1e-6).unwrap();
        assert!(exact.sub(&fd).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn vanishing_gradient_example() {
        let tr = vanishing_gradient_demo(0.01, [1.0, 1.0], 5.0, 0.01).unwrap();
        let p = tr.numeric.last().unwrap();
        assert!((p[0] - (-5f64).exp()).abs() < 1e-9);
        assert!((p[1] - (-0.05f64).exp()).abs() < 1e-9);
        let tr = vanishing_gradient_demo(1.0, [1.0, 1.0], 2.0, 0.1).unwrap();
        assert!(tr.numeric.iter().all(|p| p[0] == p[1]));
        let tr = vanishing_gradient_demo(0.5, [0.3, 0.7], 0.0, 0.1).unwrap();
        assert_eq!(tr.numeric, vec![[0.3, 0.7]]);
    }
}
