use std::fmt;
use std::sync::Arc;

use crate::numerics::{default_step, finite_diff_jacobian, Matrix, Scalar, SeededRng};
use crate::{Error, Result};

/// Time-dependent vector field `f(t, h)` on `ℝ^m`.
pub trait VectorField<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, t: T, h: &[T]) -> Vec<T>;

    /// `∂f/∂h`; central differences unless overridden.
    fn jacobian(&self, t: T, h: &[T]) -> Result<Matrix<T>> {
        finite_diff_jacobian(|x| Ok(self.eval(t, x)), h, default_step(h))
    }
}

/// Vector field backed by a closure.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T: Scalar, F: Fn(T, &[T]) -> Vec<T> + Send + Sync> VectorField<T> for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: T, h: &[T]) -> Vec<T> {
        (self.f)(t, h)
    }
}

/// Named parametric vector fields addressable by registry id.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinField<T> {
    /// `f ≡ 0`
    Zero { dim: usize },
    /// `f(t, h) = a·h`
    Linear { dim: usize, a: T },
    /// `f(t, h) = −r·h`
    Decay { dim: usize, rate: T },
    /// `f(t, h) = tanh(A h + c)` with Gaussian `A` (scaled by `1/√m`) and `c` drawn from a seed.
    TanhNet { seed: u64, a: Matrix<T>, c: Vec<T> },
}

/// Registry ids of the built-in vector fields.
pub const FIELD_IDS: [&str; 4] = ["decay", "linear", "tanh-net", "zero"];

impl<T: Scalar> BuiltinField<T> {
    /// Parses `zero`, `linear:<a>`, `decay:<r>` or `tanh-net:<seed>` for state dimension `dim`.
    pub fn from_id(id: &str, dim: usize) -> Result<Self> {
        let (name, arg) = match id.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (id.trim(), None),
        };
        let real = |default: f64| -> Result<T> {
            match arg {
                None => Ok(T::lit(default)),
                Some(a) => a
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(T::lit)
                    .ok_or_else(|| Error::Input(format!("bad numeric argument in vector field id '{id}'"))),
            }
        };
        match name {
            "zero" => Ok(Self::Zero { dim }),
            "linear" => Ok(Self::Linear { dim, a: real(1.0)? }),
            "decay" => Ok(Self::Decay { dim, rate: real(1.0)? }),
            "tanh-net" => {
                let seed = match arg {
                    None => 0,
                    Some(a) => a.parse().map_err(|_| Error::Input(format!("bad seed in vector field id '{id}'")))?,
                };
                let mut rng = SeededRng::new(seed);
                let scale = 1.0 / (dim.max(1) as f64).sqrt();
                let a = Matrix::new(dim, dim, (0..dim * dim).map(|_| T::lit(scale * rng.normal())).collect())?;
                let c = (0..dim).map(|_| T::lit(0.5 * rng.normal())).collect();
                Ok(Self::TanhNet { seed, a, c })
            }
            _ => Err(Error::Input(format!("unknown vector field id '{id}'"))),
        }
    }

    pub fn id(&self) -> String {
        match self {
            Self::Zero { .. } => "zero".into(),
            Self::Linear { a, .. } => format!("linear:{a}"),
            Self::Decay { rate, .. } => format!("decay:{rate}"),
            Self::TanhNet { seed, .. } => format!("tanh-net:{seed}"),
        }
    }
}

impl<T: Scalar> fmt::Display for BuiltinField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl<T: Scalar> VectorField<T> for BuiltinField<T> {
    fn dim(&self) -> usize {
        match self {
            Self::Zero { dim } | Self::Linear { dim, .. } | Self::Decay { dim, .. } => *dim,
            Self::TanhNet { c, .. } => c.len(),
        }
    }

    fn eval(&self, _t: T, h: &[T]) -> Vec<T> {
        match self {
            Self::Zero { .. } => vec![T::zero(); h.len()],
            Self::Linear { a, .. } => h.iter().map(|&x| *a * x).collect(),
            Self::Decay { rate, .. } => h.iter().map(|&x| -*rate * x).collect(),
            Self::TanhNet { a, c, .. } => a.apply(h).iter().zip(c).map(|(&z, &ci)| (z + ci).tanh()).collect(),
        }
    }

    fn jacobian(&self, _t: T, h: &[T]) -> Result<Matrix<T>> {
        let n = h.len();
        Ok(match self {
            Self::Zero { .. } => Matrix::zeros(n, n),
            Self::Linear { a, .. } => Matrix::identity(n).scale(*a),
            Self::Decay { rate, .. } => Matrix::identity(n).scale(-*rate),
            Self::TanhNet { a, c, .. } => {
                let z = a.apply(h);
                let mut j = a.clone();
                for i in 0..n {
                    let s = T::one() - (z[i] + c[i]).tanh().powi(2);
                    for k in 0..n {
                        j[(i, k)] = j[(i, k)] * s;
                    }
                }
                j
            }
        })
    }
}

/// One classical Runge–Kutta step. `eval(t, y)` returns the derivative;
/// returns the new state and the first stage derivative `k1 = f(t, y)`.
pub(crate) fn rk4_step<T: Scalar>(t: T, y: &[T], dt: T, mut eval: impl FnMut(T, &[T]) -> Vec<T>) -> (Vec<T>, Vec<T>) {
    let half = T::lit(0.5) * dt;
    let shifted = |k: &[T], s: T| -> Vec<T> { y.iter().zip(k).map(|(&yi, &ki)| yi + s * ki).collect() };
    let k1 = eval(t, y);
    let k2 = eval(t + half, &shifted(&k1, half));
    let k3 = eval(t + half, &shifted(&k2, half));
    let k4 = eval(t + dt, &shifted(&k3, dt));
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    let next = (0..y.len()).map(|i| y[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i])).collect();
    (next, k1)
}

/// Integrates `h' = f(t, h)` from `t = 0` to `t_end` with `steps` RK4 steps;
/// returns the states at every grid point.
pub fn rk4_trajectory<T: Scalar>(field: &dyn VectorField<T>, h0: &[T], t_end: T, steps: usize) -> Result<Vec<Vec<T>>> {
    if steps == 0 {
        return Err(Error::Input("step count must be at least 1".into()));
    }
    let dt = t_end / T::from_usize_lossy(steps);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(h0.to_vec());
    for n in 0..steps {
        let t = T::from_usize_lossy(n) * dt;
        let (next, _) = rk4_step(t, &out[n], dt, |s, y| field.eval(s, y));
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: n + 1, message: format!("non-finite state at t = {}", t + dt) });
        }
        out.push(next);
    }
    Ok(out)
}

/// Neural ODE `x ↦ W̃ h(T) + b̃` with `h' = f(t, h)`, `h(0) = W x + b`.
#[derive(Clone)]
pub struct NeuralOdeSpec<T: Scalar> {
    pub w: Matrix<T>,
    pub b: Vec<T>,
    pub w_tilde: Matrix<T>,
    pub b_tilde: Vec<T>,
    pub field: Arc<dyn VectorField<T>>,
    /// Registry id of `field`, when it came from the registry.
    pub field_id: Option<String>,
    pub t_end: T,
    pub steps: usize,
}

impl<T: Scalar> fmt::Debug for NeuralOdeSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NeuralOdeSpec")
            .field("d", &self.input_dim())
            .field("m", &self.state_dim())
            .field("q", &self.output_dim())
            .field("field_id", &self.field_id)
            .field("t_end", &self.t_end)
            .field("steps", &self.steps)
            .finish()
    }
}

pub(crate) fn check_affine_pair<T: Scalar>(w: &Matrix<T>, b: &[T], w_tilde: &Matrix<T>, b_tilde: &[T], m: usize) -> Result<()> {
    if w.rows() != m || b.len() != m {
        return Err(Error::Structural { layer: 0, message: format!("lift must map into dimension {m}") });
    }
    if w_tilde.cols() != m || b_tilde.len() != w_tilde.rows() {
        return Err(Error::Structural { layer: 1, message: format!("projection must read dimension {m} and match b̃") });
    }
    Ok(())
}

impl<T: Scalar> NeuralOdeSpec<T> {
    pub fn new(
        w: Matrix<T>,
        b: Vec<T>,
        w_tilde: Matrix<T>,
        b_tilde: Vec<T>,
        field: Arc<dyn VectorField<T>>,
        t_end: T,
        steps: usize,
    ) -> Result<Self> {
        if !(t_end > T::zero()) || !t_end.is_finite() {
            return Err(Error::Input("horizon T must be positive".into()));
        }
        if steps == 0 {
            return Err(Error::Input("step count must be at least 1".into()));
        }
        check_affine_pair(&w, &b, &w_tilde, &b_tilde, field.dim())?;
        Ok(Self { w, b, w_tilde, b_tilde, field, field_id: None, t_end, steps })
    }

    /// Spec with identity lift and projection on `ℝ^m`.
    pub fn identity_affine(field: Arc<dyn VectorField<T>>, t_end: T, steps: usize) -> Result<Self> {
        let m = field.dim();
        Self::new(Matrix::identity(m), vec![T::zero(); m], Matrix::identity(m), vec![T::zero(); m], field, t_end, steps)
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

    pub fn lift(&self, x: &[T]) -> Result<Vec<T>> {
        let mut h = self.w.matvec(x)?;
        for (hi, &bi) in h.iter_mut().zip(&self.b) {
            *hi = *hi + bi;
        }
        Ok(h)
    }

    pub fn project(&self, h: &[T]) -> Vec<T> {
        let mut y = self.w_tilde.apply(h);
        for (yi, &bi) in y.iter_mut().zip(&self.b_tilde) {
            *yi = *yi + bi;
        }
        y
    }
}

/// Evaluates a neural ODE at `x` with fixed-step RK4.
pub fn node_forward<T: Scalar>(spec: &NeuralOdeSpec<T>, x: &[T]) -> Result<Vec<T>> {
    let h0 = spec.lift(x)?;
    let traj = rk4_trajectory(spec.field.as_ref(), &h0, spec.t_end, spec.steps)?;
    Ok(spec.project(traj.last().expect("nonempty trajectory")))
}

/// Depth-`L` explicit Euler residual network of a neural ODE:
/// `h_{l+1} = h_l + (T/L) f(lT/L, h_l)` between the same lift and projection.
#[derive(Clone)]
pub struct EulerResNet<T: Scalar> {
    spec: NeuralOdeSpec<T>,
    depth: usize,
}

impl<T: Scalar> EulerResNet<T> {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        let dt = self.spec.t_end / T::from_usize_lossy(self.depth);
        let mut h = self.spec.lift(x)?;
        for l in 0..self.depth {
            let f = self.spec.field.eval(T::from_usize_lossy(l) * dt, &h);
            for (hi, fi) in h.iter_mut().zip(f) {
                *hi = *hi + dt * fi;
            }
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { step: l + 1, message: "non-finite residual state".into() });
            }
        }
        Ok(self.spec.project(&h))
    }
}

pub fn euler_resnet_of_node<T: Scalar>(spec: &NeuralOdeSpec<T>, depth: usize) -> Result<EulerResNet<T>> {
    if depth == 0 {
        return Err(Error::Input("depth must be at least 1".into()));
    }
    Ok(EulerResNet { spec: spec.clone(), depth })
}
