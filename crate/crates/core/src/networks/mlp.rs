use serde::{Deserialize, Serialize};

use super::activation::Activation;
use crate::numerics::{Matrix, Scalar};
use crate::{Error, Result};

/// One layer `h ↦ W̃ σ(W h + b) + b̃`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpLayer<T> {
    /// inner width × input width
    pub w: Matrix<T>,
    pub b: Vec<T>,
    /// output width × inner width
    pub w_tilde: Matrix<T>,
    pub b_tilde: Vec<T>,
    pub activation: Activation,
}

impl<T: Scalar> MlpLayer<T> {
    pub fn new(w: Matrix<T>, b: Vec<T>, w_tilde: Matrix<T>, b_tilde: Vec<T>, activation: Activation) -> Self {
        Self { w, b, w_tilde, b_tilde, activation }
    }

    /// Layer with zero biases.
    pub fn unbiased(w: Matrix<T>, w_tilde: Matrix<T>, activation: Activation) -> Self {
        let (b, b_tilde) = (vec![T::zero(); w.rows()], vec![T::zero(); w_tilde.rows()]);
        Self { w, b, w_tilde, b_tilde, activation }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn inner_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w_tilde.rows()
    }

    pub fn param_count(&self) -> usize {
        self.w.rows() * self.w.cols() + self.b.len() + self.w_tilde.rows() * self.w_tilde.cols() + self.b_tilde.len()
    }

    fn validate(&self, layer: usize) -> Result<()> {
        let structural = |message: String| Err(Error::Structural { layer, message });
        if self.b.len() != self.w.rows() {
            return structural(format!("b has length {} but W has {} rows", self.b.len(), self.w.rows()));
        }
        if self.w_tilde.cols() != self.w.rows() {
            return structural(format!("W̃ has {} columns but W has {} rows", self.w_tilde.cols(), self.w.rows()));
        }
        if self.b_tilde.len() != self.w_tilde.rows() {
            return structural(format!("b̃ has length {} but W̃ has {} rows", self.b_tilde.len(), self.w_tilde.rows()));
        }
        if let Activation::LeakyRelu { slope } = self.activation {
            if !(slope > 0.0) {
                return structural("leaky-relu slope must be positive".into());
            }
        }
        Ok(())
    }

    /// Returns `(z, output)` where `z = W h + b` is the pre-activation.
    pub fn forward(&self, h: &[T]) -> (Vec<T>, Vec<T>) {
        let mut z = self.w.apply(h);
        for (zi, &bi) in z.iter_mut().zip(&self.b) {
            *zi = *zi + bi;
        }
        let a: Vec<T> = z.iter().map(|&v| self.activation.eval(v)).collect();
        let mut out = self.w_tilde.apply(&a);
        for (o, &bi) in out.iter_mut().zip(&self.b_tilde) {
            *o = *o + bi;
        }
        (z, out)
    }

    /// Pulls an output cotangent back through the layer, given the stored
    /// pre-activation. Returns the input cotangent and, when `grads` is
    /// given, accumulates parameter gradients in the flat layout
    /// `W, b, W̃, b̃` (matrices row-major).
    fn backward(&self, h: &[T], z: &[T], cot: &[T], grads: Option<&mut [T]>) -> Vec<T> {
        let a: Vec<T> = z.iter().map(|&v| self.activation.eval(v)).collect();
        let da = self.w_tilde.tmatvec(cot).expect("validated shapes");
        let dz: Vec<T> = da.iter().zip(z).map(|(&g, &zi)| g * self.activation.derivative(zi)).collect();
        if let Some(g) = grads {
            let (m, d, q) = (self.w.rows(), self.w.cols(), self.w_tilde.rows());
            let mut k = 0;
            for i in 0..m {
                for j in 0..d {
                    g[k] = g[k] + dz[i] * h[j];
                    k += 1;
                }
            }
            for i in 0..m {
                g[k] = g[k] + dz[i];
                k += 1;
            }
            for i in 0..q {
                for j in 0..m {
                    g[k] = g[k] + cot[i] * a[j];
                    k += 1;
                }
            }
            for i in 0..q {
                g[k] = g[k] + cot[i];
                k += 1;
            }
        }
        self.w.tmatvec(&dz).expect("validated shapes")
    }

    fn write_params(&self, out: &mut Vec<T>) {
        out.extend_from_slice(self.w.data());
        out.extend_from_slice(&self.b);
        out.extend_from_slice(self.w_tilde.data());
        out.extend_from_slice(&self.b_tilde);
    }

    fn read_params(&mut self, p: &[T]) -> usize {
        let (m, d, q) = (self.w.rows(), self.w.cols(), self.w_tilde.rows());
        let mut k = 0;
        let mut take = |n: usize| {
            let s = &p[k..k + n];
            k += n;
            s.to_vec()
        };
        self.w = Matrix::new(m, d, take(m * d)).unwrap_or_else(|_| Matrix::zeros(m, d));
        self.b = take(m);
        self.w_tilde = Matrix::new(q, m, take(q * m)).unwrap_or_else(|_| Matrix::zeros(q, m));
        self.b_tilde = take(q);
        k
    }
}

/// Multilayer perceptron `h_{l+1} = W̃_l σ_l(W_l h_l + b_l) + b̃_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec<T> {
    layers: Vec<MlpLayer<T>>,
}

/// Intermediate values of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpTrace<T> {
    /// `h_0, …, h_L`
    pub states: Vec<Vec<T>>,
    /// pre-activations `W_l h_l + b_l`
    pub pre_activations: Vec<Vec<T>>,
}

impl<T: Scalar> MlpSpec<T> {
    /// Validates per-layer shapes and the chaining `d_{l+1}` of consecutive layers.
    pub fn new(layers: Vec<MlpLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Input("an MLP needs at least one layer".into()));
        }
        for (l, layer) in layers.iter().enumerate() {
            layer.validate(l)?;
            if l > 0 && layer.input_dim() != layers[l - 1].output_dim() {
                return Err(Error::Structural {
                    layer: l,
                    message: format!(
                        "expects input width {} but the previous layer outputs {}",
                        layer.input_dim(),
                        layers[l - 1].output_dim()
                    ),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[MlpLayer<T>] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `d_0, …, d_L`
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].input_dim()];
        dims.extend(self.layers.iter().map(MlpLayer::output_dim));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(MlpLayer::param_count).sum()
    }

    /// All parameters, layer by layer in the order `W, b, W̃, b̃`.
    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            layer.write_params(&mut out);
        }
        out
    }

    /// Copy of the network with parameters replaced from a flat vector.
    pub fn with_params(&self, p: &[T]) -> Result<Self> {
        if p.len() != self.param_count() {
            return Err(Error::Dimension(format!("expected {} parameters, got {}", self.param_count(), p.len())));
        }
        let mut out = self.clone();
        let mut k = 0;
        for layer in &mut out.layers {
            k += layer.read_params(&p[k..]);
        }
        Ok(out)
    }

    pub fn forward_trace(&self, x: &[T]) -> Result<MlpTrace<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::Structural {
                layer: 0,
                message: format!("input has length {} but layer 0 expects {}", x.len(), self.input_dim()),
            });
        }
        let mut states = vec![x.to_vec()];
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let (z, out) = layer.forward(&states[l]);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::Evaluation(format!("layer {l} produced a non-finite value")));
            }
            pre_activations.push(z);
            states.push(out);
        }
        Ok(MlpTrace { states, pre_activations })
    }

    /// Vector-Jacobian products at `x`: returns `(cotᵀ ∂Φ/∂x, cotᵀ ∂Φ/∂θ)`.
    pub fn vjp(&self, x: &[T], cot: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        let trace = self.forward_trace(x)?;
        self.vjp_from_trace(&trace, cot)
    }

    pub fn vjp_from_trace(&self, trace: &MlpTrace<T>, cot: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        if cot.len() != self.output_dim() {
            return Err(Error::Dimension("cotangent length must equal the output width".into()));
        }
        let mut grads = vec![T::zero(); self.param_count()];
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let start = *acc;
                *acc += l.param_count();
                Some(start)
            })
            .collect();
        let mut g = cot.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let slice = &mut grads[offsets[l]..offsets[l] + layer.param_count()];
            g = layer.backward(&trace.states[l], &trace.pre_activations[l], &g, Some(slice));
        }
        Ok((g, grads))
    }

    /// Gradient of a scalar-output network with respect to its input.
    pub fn input_gradient(&self, x: &[T]) -> Result<Vec<T>> {
        if self.output_dim() != 1 {
            return Err(Error::Unsupported("input gradient needs a scalar output".into()));
        }
        let trace = self.forward_trace(x)?;
        let mut g = vec![T::one()];
        for l in (0..self.layers.len()).rev() {
            g = self.layers[l].backward(&trace.states[l], &trace.pre_activations[l], &g, None);
        }
        Ok(g)
    }
}

/// Forward pass of an MLP.
pub fn mlp_forward<T: Scalar>(spec: &MlpSpec<T>, x: &[T]) -> Result<Vec<T>> {
    let mut trace = spec.forward_trace(x)?;
    Ok(trace.states.pop().expect("at least one state"))
}

/// Residual network `h_{l+1} = h_l + f_l(h_l)` with every `f_l` an MLP layer of constant width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResNetSpec<T> {
    layers: Vec<MlpLayer<T>>,
}

impl<T: Scalar> ResNetSpec<T> {
    pub fn new(layers: Vec<MlpLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Input("a residual network needs at least one layer".into()));
        }
        let d = layers[0].input_dim();
        for (l, layer) in layers.iter().enumerate() {
            layer.validate(l)?;
            if layer.input_dim() != d || layer.output_dim() != d {
                return Err(Error::Structural {
                    layer: l,
                    message: format!(
                        "residual layers must map width {d} to {d}, got {} to {}",
                        layer.input_dim(),
                        layer.output_dim()
                    ),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn width(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn layers(&self) -> &[MlpLayer<T>] {
        &self.layers
    }
}

pub fn resnet_forward<T: Scalar>(spec: &ResNetSpec<T>, x: &[T]) -> Result<Vec<T>> {
    if x.len() != spec.width() {
        return Err(Error::Structural { layer: 0, message: format!("input has length {} but width is {}", x.len(), spec.width()) });
    }
    let mut h = x.to_vec();
    for (l, layer) in spec.layers.iter().enumerate() {
        let (_, f) = layer.forward(&h);
        for (hi, fi) in h.iter_mut().zip(f) {
            *hi = *hi + fi;
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("layer {l} produced a non-finite value")));
        }
    }
    Ok(h)
}

/// Layer of a densely connected residual network: reads the `arity` most
/// recent states concatenated as `(h_l, h_{l-1}, …)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer<T> {
    pub arity: usize,
    pub map: MlpLayer<T>,
}

/// `h_{l+1} = h_l + f_{Dense,l}(h_l, …, h_{l+1-arity})`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseResNetSpec<T> {
    width: usize,
    layers: Vec<DenseLayer<T>>,
}

impl<T: Scalar> DenseResNetSpec<T> {
    pub fn new(width: usize, layers: Vec<DenseLayer<T>>) -> Result<Self> {
        for (l, layer) in layers.iter().enumerate() {
            layer.map.validate(l)?;
            if layer.arity == 0 || layer.arity > l + 1 {
                return Err(Error::Structural {
                    layer: l,
                    message: format!("layer {l} may read 1..={} previous states, declared {}", l + 1, layer.arity),
                });
            }
            if layer.map.input_dim() != layer.arity * width || layer.map.output_dim() != width {
                return Err(Error::Structural {
                    layer: l,
                    message: format!(
                        "arity {} at width {width} needs a {}→{width} map, got {}→{}",
                        layer.arity,
                        layer.arity * width,
                        layer.map.input_dim(),
                        layer.map.output_dim()
                    ),
                });
            }
        }
        Ok(Self { width, layers })
    }
}

pub fn dense_resnet_forward<T: Scalar>(spec: &DenseResNetSpec<T>, x: &[T]) -> Result<Vec<T>> {
    if x.len() != spec.width {
        return Err(Error::Structural { layer: 0, message: format!("input has length {} but width is {}", x.len(), spec.width) });
    }
    let mut states = vec![x.to_vec()];
    for (l, layer) in spec.layers.iter().enumerate() {
        let input: Vec<T> = (0..layer.arity).flat_map(|k| states[l - k].iter().copied()).collect();
        let (_, f) = layer.map.forward(&input);
        let next: Vec<T> = states[l].iter().zip(f).map(|(&h, fi)| h + fi).collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("layer {l} produced a non-finite value")));
        }
        states.push(next);
    }
    Ok(states.pop().expect("at least the input"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_layer(w: f64, b: f64, wt: f64, bt: f64, act: Activation) -> MlpLayer<f64> {
        MlpLayer::new(Matrix::new(1, 1, vec![w]).unwrap(), vec![b], Matrix::new(1, 1, vec![wt]).unwrap(), vec![bt], act)
    }

    #[test]
    fn identity_network_is_identity() {
        let l = MlpLayer::unbiased(Matrix::identity(3), Matrix::identity(3), Activation::Identity);
        let net = MlpSpec::new(vec![l.clone(), l]).unwrap();
        assert_eq!(mlp_forward(&net, &[1.0, -2.0, 0.5]).unwrap(), vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn tanh_layer_at_zero() {
        let net = MlpSpec::new(vec![scalar_layer(1.0, 0.0, 2.0, 1.0, Activation::Tanh)]).unwrap();
        assert_eq!(mlp_forward(&net, &[0.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn two_layer_composition() {
        let net = MlpSpec::new(vec![
            scalar_layer(3.0, 0.0, 1.0, 0.0, Activation::Identity),
            scalar_layer(2.0, 0.0, 1.0, 0.0, Activation::Identity),
        ])
        .unwrap();
        assert_eq!(mlp_forward(&net, &[1.0]).unwrap(), vec![6.0]);
    }

    #[test]
    fn mismatch_names_the_layer() {
        let a = MlpLayer::<f64>::unbiased(Matrix::identity(2), Matrix::identity(2), Activation::Tanh);
        let b = MlpLayer::unbiased(Matrix::identity(3), Matrix::identity(3), Activation::Tanh);
        assert!(matches!(MlpSpec::new(vec![a, b]), Err(Error::Structural { layer: 1, .. })));
    }

    #[test]
    fn resnet_examples() {
        let zero = scalar_layer(0.0, 0.0, 0.0, 0.0, Activation::Tanh);
        let net = ResNetSpec::new(vec![zero.clone(), zero.clone(), zero]).unwrap();
        assert_eq!(resnet_forward(&net, &[0.7]).unwrap(), vec![0.7]);

        let id = ResNetSpec::new(vec![scalar_layer(1.0, 0.0, 1.0, 0.0, Activation::Identity)]).unwrap();
        assert_eq!(resnet_forward(&id, &[1.5]).unwrap(), vec![3.0]);

        let half = scalar_layer(0.5, 0.0, 1.0, 0.0, Activation::Identity);
        let net = ResNetSpec::new(vec![half.clone(), half]).unwrap();
        assert!((resnet_forward(&net, &[2.0]).unwrap()[0] - 2.0 * 2.25).abs() < 1e-15);
    }

    #[test]
    fn dense_resnet_examples() {
        let copy_first = DenseLayer {
            arity: 2,
            map: MlpLayer::unbiased(Matrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap(), Matrix::new(1, 2, vec![0.0, 1.0]).unwrap(), Activation::Identity),
        };
        let first = DenseLayer { arity: 1, map: scalar_layer(1.0, 0.0, 1.0, 0.0, Activation::Identity) };
        let net = DenseResNetSpec::new(1, vec![first, copy_first]).unwrap();
        assert_eq!(dense_resnet_forward(&net, &[2.0]).unwrap(), vec![6.0]);

        let bad = DenseLayer { arity: 2, map: scalar_layer(1.0, 0.0, 1.0, 0.0, Activation::Identity) };
        assert!(matches!(DenseResNetSpec::new(1, vec![bad]), Err(Error::Structural { .. })));
    }

    #[test]
    fn dense_with_arity_one_matches_resnet() {
        let layer = scalar_layer(0.8, 0.1, -1.2, 0.3, Activation::Tanh);
        let dense = DenseResNetSpec::new(1, vec![DenseLayer { arity: 1, map: layer.clone() }; 3]).unwrap();
        let res = ResNetSpec::new(vec![layer; 3]).unwrap();
        assert_eq!(dense_resnet_forward(&dense, &[0.4]).unwrap(), resnet_forward(&res, &[0.4]).unwrap());
    }

    #[test]
    fn params_round_trip() {
        let net = MlpSpec::new(vec![scalar_layer(1.0, 2.0, 3.0, 4.0, Activation::Tanh)]).unwrap();
        let p = net.params();
        assert_eq!(p, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(net.with_params(&p).unwrap(), net);
    }
}
