use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::networks::MlpSpec;
use crate::numerics::{all_finite, default_step, finite_diff_jacobian, norm_inf, sym_eigen, Matrix, Scalar};
use crate::{Error, Result};

/// Differentiable parameter map `Φ(θ, x)`.
pub trait ParamModel<T: Scalar>: Send + Sync {
    fn param_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    fn eval(&self, theta: &[T], x: &[T]) -> Result<Vec<T>>;

    /// `cotᵀ ∂Φ/∂θ` by reverse accumulation.
    fn vjp(&self, theta: &[T], x: &[T], cot: &[T]) -> Result<Vec<T>>;

    /// Exact `∂²(cotᵀ Φ)/∂θ²` when the model knows it.
    fn param_hessian(&self, _theta: &[T], _x: &[T], _cot: &[T]) -> Option<Matrix<T>> {
        None
    }

    fn name(&self) -> String;
}

/// `Φ(θ, x) = θ₁ θ₂ x` on scalars.
#[derive(Debug, Clone, Copy, Default)]
pub struct Prod2;

impl<T: Scalar> ParamModel<T> for Prod2 {
    fn param_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn eval(&self, t: &[T], x: &[T]) -> Result<Vec<T>> {
        Ok(vec![t[0] * t[1] * x[0]])
    }
    fn vjp(&self, t: &[T], x: &[T], cot: &[T]) -> Result<Vec<T>> {
        Ok(vec![cot[0] * t[1] * x[0], cot[0] * t[0] * x[0]])
    }
    fn param_hessian(&self, _t: &[T], x: &[T], cot: &[T]) -> Option<Matrix<T>> {
        let c = cot[0] * x[0];
        Matrix::new(2, 2, vec![T::zero(), c, c, T::zero()]).ok()
    }
    fn name(&self) -> String {
        "prod2".into()
    }
}

/// `Φ(θ, x) = θᵀx`, scalar output.
#[derive(Debug, Clone, Copy)]
pub struct LinearModel {
    pub dim: usize,
}

impl<T: Scalar> ParamModel<T> for LinearModel {
    fn param_dim(&self) -> usize {
        self.dim
    }
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn eval(&self, t: &[T], x: &[T]) -> Result<Vec<T>> {
        Ok(vec![t.iter().zip(x).map(|(&a, &b)| a * b).sum()])
    }
    fn vjp(&self, _t: &[T], x: &[T], cot: &[T]) -> Result<Vec<T>> {
        Ok(x.iter().map(|&v| cot[0] * v).collect())
    }
    fn param_hessian(&self, _t: &[T], _x: &[T], _cot: &[T]) -> Option<Matrix<T>> {
        Some(Matrix::zeros(self.dim, self.dim))
    }
    fn name(&self) -> String {
        format!("linear:{}", self.dim)
    }
}

/// An MLP whose flattened weights are the parameters.
#[derive(Debug, Clone)]
pub struct MlpModel<T: Scalar> {
    template: MlpSpec<T>,
}

impl<T: Scalar> MlpModel<T> {
    pub fn new(template: MlpSpec<T>) -> Self {
        Self { template }
    }

    pub fn template(&self) -> &MlpSpec<T> {
        &self.template
    }
}

impl<T: Scalar> ParamModel<T> for MlpModel<T> {
    fn param_dim(&self) -> usize {
        self.template.param_count()
    }
    fn input_dim(&self) -> usize {
        self.template.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.template.output_dim()
    }
    fn eval(&self, t: &[T], x: &[T]) -> Result<Vec<T>> {
        crate::networks::mlp_forward(&self.template.with_params(t)?, x)
    }
    fn vjp(&self, t: &[T], x: &[T], cot: &[T]) -> Result<Vec<T>> {
        Ok(self.template.with_params(t)?.vjp(x, cot)?.1)
    }
    fn name(&self) -> String {
        format!("mlp:{:?}", self.template.layer_dims())
    }
}

/// Training pairs `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    xs: Vec<Vec<T>>,
    ys: Vec<Vec<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(xs: Vec<Vec<T>>, ys: Vec<Vec<T>>) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::Input("dataset needs N ≥ 1 inputs and as many targets".into()));
        }
        let (d, q) = (xs[0].len(), ys[0].len());
        if xs.iter().any(|x| x.len() != d) || ys.iter().any(|y| y.len() != q) {
            return Err(Error::Dimension("inconsistent example dimensions".into()));
        }
        Ok(Self { xs, ys })
    }

    /// Scalar pairs.
    pub fn scalar(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|p| vec![T::lit(p.0)]).collect(), pairs.iter().map(|p| vec![T::lit(p.1)]).collect())
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.xs[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.ys[0].len()
    }

    pub fn x(&self, i: usize) -> &[T] {
        &self.xs[i]
    }

    pub fn y(&self, i: usize) -> &[T] {
        &self.ys[i]
    }
}

/// Per-example loss `ℓ(y′, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    /// `½‖y′ − y‖²`
    HalfSquared,
    /// `‖y′ − y‖²`
    Squared,
}

impl LossKind {
    fn factor<T: Scalar>(self) -> T {
        match self {
            Self::HalfSquared => T::lit(0.5),
            Self::Squared => T::one(),
        }
    }

    /// `ℓ''` along any direction.
    fn curvature<T: Scalar>(self) -> T {
        T::lit(2.0) * self.factor::<T>()
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::HalfSquared => "half-squared",
            Self::Squared => "squared",
        })
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "half-squared" => Ok(Self::HalfSquared),
            "squared" => Ok(Self::Squared),
            other => Err(Error::Input(format!("unknown loss '{other}' (use half-squared or squared)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Overdetermined,
    Critical,
    Overparameterized,
}

/// `L(θ) = (c/N) Σ ℓ(Φ(θ, x_i), y_i)` with a positive scale `c` (1 by default).
#[derive(Clone)]
pub struct LossModel<T: Scalar> {
    model: Arc<dyn ParamModel<T>>,
    data: Dataset<T>,
    kind: LossKind,
    scale: T,
}

impl<T: Scalar> fmt::Debug for LossModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossModel")
            .field("model", &self.model.name())
            .field("n", &self.data.len())
            .field("kind", &self.kind)
            .field("scale", &self.scale)
            .finish()
    }
}

impl<T: Scalar> LossModel<T> {
    pub fn new(model: Arc<dyn ParamModel<T>>, data: Dataset<T>, kind: LossKind) -> Result<Self> {
        if data.input_dim() != model.input_dim() || data.output_dim() != model.output_dim() {
            return Err(Error::Dimension(format!(
                "model maps ℝ^{} → ℝ^{} but the data is ℝ^{} → ℝ^{}",
                model.input_dim(),
                model.output_dim(),
                data.input_dim(),
                data.output_dim()
            )));
        }
        Ok(Self { model, data, kind, scale: T::one() })
    }

    /// `L(θ) = (1 − θ₁θ₂)²` (or half of it) from one example `(1, 1)`.
    pub fn prod2(kind: LossKind) -> Self {
        Self::new(Arc::new(Prod2), Dataset::scalar(&[(1.0, 1.0)]).expect("valid data"), kind).expect("valid model")
    }

    /// `Φ(θ, x) = θx` on scalar pairs.
    pub fn scalar_linear(pairs: &[(f64, f64)], kind: LossKind) -> Result<Self> {
        Self::new(Arc::new(LinearModel { dim: 1 }), Dataset::scalar(pairs)?, kind)
    }

    /// `L(θ) = ½ θᵀQθ` for symmetric positive semidefinite `Q`, realised as a
    /// linear model on the rows of a factor of `Q`.
    pub fn quadratic(q: &Matrix<T>) -> Result<Self> {
        let eig = sym_eigen(q)?;
        let n = q.rows();
        let tol = T::lit(1e-12) * eig.values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if eig.values.iter().any(|&v| v < -tol) {
            return Err(Error::Input("quadratic form must be positive semidefinite".into()));
        }
        let nn = T::from_usize_lossy(n);
        let xs: Vec<Vec<T>> = (0..n)
            .map(|k| {
                let s = (nn * eig.values[k].max(T::zero())).sqrt();
                eig.vector(k).into_iter().map(|v| s * v).collect()
            })
            .collect();
        let ys = vec![vec![T::zero()]; n];
        Self::new(Arc::new(LinearModel { dim: n }), Dataset::new(xs, ys)?, LossKind::HalfSquared)
    }

    /// The same loss multiplied by `c > 0`.
    pub fn scaled(&self, c: T) -> Result<Self> {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::Input("loss scale must be positive".into()));
        }
        Ok(Self { scale: self.scale * c, ..self.clone() })
    }

    pub fn model(&self) -> &dyn ParamModel<T> {
        self.model.as_ref()
    }

    pub fn data(&self) -> &Dataset<T> {
        &self.data
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn param_dim(&self) -> usize {
        self.model.param_dim()
    }

    /// `q·N`, the number of interpolation constraints.
    pub fn constraint_count(&self) -> usize {
        self.model.output_dim() * self.data.len()
    }

    pub fn regime(&self) -> Regime {
        let (d, qn) = (self.param_dim(), self.constraint_count());
        match d.cmp(&qn) {
            std::cmp::Ordering::Less => Regime::Overdetermined,
            std::cmp::Ordering::Equal => Regime::Critical,
            std::cmp::Ordering::Greater => Regime::Overparameterized,
        }
    }

    fn check_theta(&self, theta: &[T]) -> Result<()> {
        if theta.len() != self.param_dim() {
            return Err(Error::Dimension(format!("θ has length {} but D = {}", theta.len(), self.param_dim())));
        }
        Ok(())
    }

    fn check_batch(&self, batch: &[usize]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Input("batch must be nonempty".into()));
        }
        if let Some(&i) = batch.iter().find(|&&i| i >= self.data.len()) {
            return Err(Error::Input(format!("batch index {i} out of range for N = {}", self.data.len())));
        }
        Ok(())
    }

    fn residual(&self, theta: &[T], i: usize) -> Result<Vec<T>> {
        let out = self.model.eval(theta, self.data.x(i))?;
        let r: Vec<T> = out.iter().zip(self.data.y(i)).map(|(&a, &b)| a - b).collect();
        if !all_finite(&r) {
            return Err(Error::Evaluation(format!("model output is not finite on example {i}")));
        }
        Ok(r)
    }

    /// Mean loss over the examples in `batch`.
    pub fn batch_loss(&self, theta: &[T], batch: &[usize]) -> Result<T> {
        self.check_theta(theta)?;
        self.check_batch(batch)?;
        let mut total = T::zero();
        for &i in batch {
            let r = self.residual(theta, i)?;
            total = total + self.kind.factor::<T>() * r.iter().map(|&v| v * v).sum::<T>();
        }
        Ok(self.scale * total / T::from_usize_lossy(batch.len()))
    }

    /// Gradient of [`batch_loss`](Self::batch_loss) by reverse accumulation.
    pub fn batch_grad(&self, theta: &[T], batch: &[usize]) -> Result<Vec<T>> {
        self.check_theta(theta)?;
        self.check_batch(batch)?;
        let mut g = vec![T::zero(); self.param_dim()];
        let w = self.scale * self.kind.curvature::<T>() / T::from_usize_lossy(batch.len());
        for &i in batch {
            let r = self.residual(theta, i)?;
            let cot: Vec<T> = r.iter().map(|&v| w * v).collect();
            let gi = self.model.vjp(theta, self.data.x(i), &cot)?;
            for (a, b) in g.iter_mut().zip(gi) {
                *a = *a + b;
            }
        }
        if !all_finite(&g) {
            return Err(Error::Evaluation("gradient is not finite".into()));
        }
        Ok(g)
    }

    /// Hessian of the batch loss. Models with exact second derivatives give
    /// the exact Hessian; otherwise central differences of the gradient.
    pub fn batch_hessian(&self, theta: &[T], batch: &[usize]) -> Result<Matrix<T>> {
        self.check_theta(theta)?;
        self.check_batch(batch)?;
        match self.exact_hessian(theta, batch)? {
            Some(h) => Ok(h),
            None => self.batch_hessian_fd(theta, batch),
        }
    }

    /// Central differences of the batch gradient, symmetrised.
    pub fn batch_hessian_fd(&self, theta: &[T], batch: &[usize]) -> Result<Matrix<T>> {
        let h = finite_diff_jacobian(|p| self.batch_grad(p, batch), theta, default_step(theta))?;
        let h = h.symmetrized();
        if !all_finite(h.data()) {
            return Err(Error::Evaluation("Hessian is not finite".into()));
        }
        Ok(h)
    }

    fn exact_hessian(&self, theta: &[T], batch: &[usize]) -> Result<Option<Matrix<T>>> {
        let dd = self.param_dim();
        let q = self.model.output_dim();
        let w = self.scale * self.kind.curvature::<T>() / T::from_usize_lossy(batch.len());
        let mut h = Matrix::zeros(dd, dd);
        for &i in batch {
            let x = self.data.x(i);
            let r = self.residual(theta, i)?;
            let cot: Vec<T> = r.iter().map(|&v| w * v).collect();
            let Some(second) = self.model.param_hessian(theta, x, &cot) else { return Ok(None) };
            h = h.add(&second)?;
            // Gauss-Newton part w·JᵀJ from unit cotangents
            for k in 0..q {
                let mut e = vec![T::zero(); q];
                e[k] = T::one();
                let jk = self.model.vjp(theta, x, &e)?;
                for a in 0..dd {
                    for b in 0..dd {
                        h[(a, b)] = h[(a, b)] + w * jk[a] * jk[b];
                    }
                }
            }
        }
        Ok(Some(h))
    }

    pub fn full_batch(&self) -> Vec<usize> {
        (0..self.data.len()).collect()
    }

    /// `max_i ‖Φ(θ, x_i) − y_i‖∞`
    pub fn interpolation_residual(&self, theta: &[T]) -> Result<T> {
        self.check_theta(theta)?;
        let mut worst = T::zero();
        for i in 0..self.data.len() {
            worst = worst.max(norm_inf(&self.residual(theta, i)?));
        }
        Ok(worst)
    }
}

pub fn loss<T: Scalar>(model: &LossModel<T>, theta: &[T]) -> Result<T> {
    model.batch_loss(theta, &model.full_batch())
}

pub fn grad_loss<T: Scalar>(model: &LossModel<T>, theta: &[T]) -> Result<Vec<T>> {
    model.batch_grad(theta, &model.full_batch())
}

pub fn batch_loss<T: Scalar>(model: &LossModel<T>, theta: &[T], batch: &[usize]) -> Result<T> {
    model.batch_loss(theta, batch)
}

pub fn hessian<T: Scalar>(model: &LossModel<T>, theta: &[T]) -> Result<Matrix<T>> {
    model.batch_hessian(theta, &model.full_batch())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prod2_examples() {
        let m = LossModel::<f64>::prod2(LossKind::Squared);
        assert_eq!(loss(&m, &[2.0, 0.5]).unwrap(), 0.0);
        assert_eq!(grad_loss(&m, &[2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
        assert!((loss(&m, &[3.0, 1.0]).unwrap() - 4.0).abs() < 1e-15);
        let h = hessian(&m, &[1.0, 1.0]).unwrap();
        assert_eq!(h.to_rows(), vec![vec![2.0, 2.0], vec![2.0, 2.0]]);
        let h = hessian(&m, &[2.0, 0.5]).unwrap();
        assert_eq!(h.to_rows(), vec![vec![0.5, 2.0], vec![2.0, 8.0]]);
        assert_eq!(m.regime(), Regime::Overparameterized);
    }

    #[test]
    fn batch_loss_examples() {
        let m = LossModel::<f64>::scalar_linear(&[(1.0, 0.0), (2.0, 0.0)], LossKind::HalfSquared).unwrap();
        assert_eq!(m.batch_loss(&[1.0], &[0]).unwrap(), 0.5);
        assert_eq!(m.batch_loss(&[1.0], &[0, 1]).unwrap(), loss(&m, &[1.0]).unwrap());
        assert!(m.batch_loss(&[1.0], &[2]).is_err());
        assert!(m.batch_loss(&[1.0], &[]).is_err());
    }

    #[test]
    fn quadratic_reproduces_form() {
        let q = Matrix::<f64>::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let m = LossModel::quadratic(&q).unwrap();
        let th = [0.3, -0.7];
        let expect = 0.5 * (3.0 * 0.09 + 2.0 * 0.3 * -0.7 + 2.0 * 0.49);
        assert!((loss(&m, &th).unwrap() - expect).abs() < 1e-14);
        let h = hessian(&m, &th).unwrap();
        assert!(h.sub(&q).unwrap().max_abs() < 1e-12);
        assert!(LossModel::quadratic(&Matrix::from_diag(&[1.0, -1.0])).is_err());
    }

    #[test]
    fn exact_and_fd_hessians_agree() {
        let m = LossModel::<f64>::prod2(LossKind::HalfSquared);
        let th = [1.3, -0.4];
        let a = hessian(&m, &th).unwrap();
        let b = m.batch_hessian_fd(&th, &[0]).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-7);
    }
}
