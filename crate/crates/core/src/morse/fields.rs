use crate::networks::{MlpSpec, NetworkSpec};
use crate::numerics::{default_step, finite_diff_gradient, finite_diff_jacobian, Matrix, Scalar};
use crate::{Error, Result};

/// Scalar field `Ψ: ℝ^d → ℝ`.
pub trait ScalarField<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[T]) -> Result<T>;

    /// `∇Ψ(x)`; central differences unless overridden.
    fn gradient(&self, x: &[T]) -> Result<Vec<T>> {
        let failure = std::cell::RefCell::new(None);
        let g = finite_diff_gradient(
            |p| match self.value(p) {
                Ok(v) => v,
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    T::nan()
                }
            },
            x,
            default_step(x),
        );
        match failure.into_inner() {
            Some(e) => Err(e),
            None => g,
        }
    }

    /// Symmetrised central differences of the gradient.
    fn hessian(&self, x: &[T]) -> Result<Matrix<T>> {
        Ok(finite_diff_jacobian(|p| self.gradient(p), x, default_step(x))?.symmetrized())
    }
}

/// Scalar field from closures; the gradient closure is optional.
pub struct FnScalarField<F, G> {
    dim: usize,
    value: F,
    gradient: Option<G>,
}

impl<F> FnScalarField<F, fn(&[f64]) -> Vec<f64>> {
    pub fn new(dim: usize, value: F) -> Self {
        Self { dim, value, gradient: None }
    }
}

impl<F, G> FnScalarField<F, G> {
    pub fn with_gradient(dim: usize, value: F, gradient: G) -> Self {
        Self { dim, value, gradient: Some(gradient) }
    }
}

impl<F, G> ScalarField<f64> for FnScalarField<F, G>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let v = (self.value)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation("scalar field is not finite".into()))
        }
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.gradient {
            Some(g) => Ok(g(x)),
            None => finite_diff_gradient(|p| (self.value)(p), x, default_step(x)),
        }
    }
}

impl<T: Scalar> ScalarField<T> for MlpSpec<T> {
    fn dim(&self) -> usize {
        self.input_dim()
    }

    fn value(&self, x: &[T]) -> Result<T> {
        if self.output_dim() != 1 {
            return Err(Error::Unsupported("scalar field needs a scalar output".into()));
        }
        Ok(crate::networks::mlp_forward(self, x)?[0])
    }

    fn gradient(&self, x: &[T]) -> Result<Vec<T>> {
        self.input_gradient(x)
    }
}

/// Any scalar-output network seen as a scalar field. MLPs use
/// backpropagation for the gradient; continuous-depth models use differences.
pub struct NetworkField<T: Scalar>(pub NetworkSpec<T>);

impl<T: Scalar> ScalarField<T> for NetworkField<T> {
    fn dim(&self) -> usize {
        match &self.0 {
            NetworkSpec::Mlp(s) => s.input_dim(),
            NetworkSpec::ResNet(s) => s.width(),
            NetworkSpec::Node(s) => s.input_dim(),
            NetworkSpec::Ndde(s) => s.input_dim(),
        }
    }

    fn value(&self, x: &[T]) -> Result<T> {
        let y = self.0.forward(x)?;
        if y.len() != 1 {
            return Err(Error::Unsupported("scalar field needs a scalar output".into()));
        }
        Ok(y[0])
    }

    fn gradient(&self, x: &[T]) -> Result<Vec<T>> {
        if let NetworkSpec::Mlp(s) = &self.0 {
            return s.input_gradient(x);
        }
        let failure = std::cell::RefCell::new(None);
        let g = finite_diff_gradient(
            |p| match self.value(p) {
                Ok(v) => v,
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    T::nan()
                }
            },
            x,
            default_step(x),
        );
        match failure.into_inner() {
            Some(e) => Err(e),
            None => g,
        }
    }
}

/// Ids of the analytic probe functions.
pub const MORSE_FIELD_IDS: [&str; 6] = ["affine", "circle", "cube", "square", "tanh", "xor"];

type BoxedField = Box<dyn ScalarField<f64>>;

/// Analytic probe functions with exact gradients:
/// `circle` `x₁²+x₂²−1`, `xor` `x₂²−x₁²`, `square` `x²`, `cube` `x³`,
/// `tanh` `tanh x`, `affine` `x+5`.
pub fn named_field(id: &str) -> Result<BoxedField> {
    Ok(match id {
        "circle" => Box::new(FnScalarField::with_gradient(
            2,
            |x: &[f64]| x[0] * x[0] + x[1] * x[1] - 1.0,
            |x: &[f64]| vec![2.0 * x[0], 2.0 * x[1]],
        )),
        "xor" => Box::new(FnScalarField::with_gradient(
            2,
            |x: &[f64]| x[1] * x[1] - x[0] * x[0],
            |x: &[f64]| vec![-2.0 * x[0], 2.0 * x[1]],
        )),
        "square" => Box::new(FnScalarField::with_gradient(1, |x: &[f64]| x[0] * x[0], |x: &[f64]| vec![2.0 * x[0]])),
        "cube" => Box::new(FnScalarField::with_gradient(1, |x: &[f64]| x[0].powi(3), |x: &[f64]| vec![3.0 * x[0] * x[0]])),
        "tanh" => Box::new(FnScalarField::with_gradient(
            1,
            |x: &[f64]| x[0].tanh(),
            |x: &[f64]| vec![1.0 - x[0].tanh().powi(2)],
        )),
        "affine" => Box::new(FnScalarField::with_gradient(1, |x: &[f64]| x[0] + 5.0, |_: &[f64]| vec![1.0])),
        other => return Err(Error::Input(format!("unknown scalar field id '{other}'"))),
    })
}
