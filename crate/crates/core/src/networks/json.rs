//! JSON network schema.
//!
//! ```json
//! {
//!   "layer_dims": [2, 3, 1],
//!   "weights": [W_0, W̃_0, W_1, W̃_1, ...],
//!   "biases":  [b_0, b̃_0, b_1, b̃_1, ...],
//!   "activation": "tanh" | ["tanh", "identity", ...]
//! }
//! ```
//!
//! Matrices are lists of rows. A neural ODE uses `layer_dims = [d, m, q]`,
//! `weights = [W, W̃]`, `biases = [b, b̃]` (empty means zero), plus
//! `"vector_field_id"`, `"T"` and `"steps"`; adding `"tau"` makes it a neural
//! DDE whose field is evaluated on the delayed state `h(t − τ)`. The optional
//! `"kind"` field (`mlp`, `resnet`, `node`, `ndde`) overrides inference.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::dde::{ndde_forward, Delayed, NeuralDdeSpec};
use super::mlp::{mlp_forward, resnet_forward, MlpLayer, MlpSpec, ResNetSpec};
use super::ode::{node_forward, BuiltinField, NeuralOdeSpec, VectorField};
use crate::numerics::{Matrix, Scalar};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActivationJson {
    Shared(Activation),
    PerLayer(Vec<Activation>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    pub layer_dims: Vec<usize>,
    #[serde(default)]
    pub weights: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub biases: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<ActivationJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector_field_id: Option<String>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

/// Any of the serialisable forward architectures.
#[derive(Debug, Clone)]
pub enum NetworkSpec<T: Scalar> {
    Mlp(MlpSpec<T>),
    ResNet(ResNetSpec<T>),
    Node(NeuralOdeSpec<T>),
    Ndde(NeuralDdeSpec<T>),
}

impl<T: Scalar> NetworkSpec<T> {
    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        match self {
            Self::Mlp(s) => mlp_forward(s, x),
            Self::ResNet(s) => resnet_forward(s, x),
            Self::Node(s) => node_forward(s, x),
            Self::Ndde(s) => ndde_forward(s, x),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: NetworkJson = serde_json::from_str(text).map_err(|e| Error::Input(format!("network JSON: {e}")))?;
        Self::from_json(&doc)
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.to_json()?).map_err(|e| Error::Input(e.to_string()))
    }

    pub fn from_json(doc: &NetworkJson) -> Result<Self> {
        let kind = match doc.kind.as_deref() {
            Some(k) => k.to_string(),
            None if doc.vector_field_id.is_some() && doc.tau.is_some() => "ndde".into(),
            None if doc.vector_field_id.is_some() => "node".into(),
            None => "mlp".into(),
        };
        match kind.as_str() {
            "mlp" => Ok(Self::Mlp(MlpSpec::new(layers_from_json(doc)?)?)),
            "resnet" => Ok(Self::ResNet(ResNetSpec::new(layers_from_json(doc)?)?)),
            "node" | "ndde" => continuous_from_json(doc, kind == "ndde"),
            other => Err(Error::Input(format!("unknown network kind '{other}'"))),
        }
    }

    pub fn to_json(&self) -> Result<NetworkJson> {
        let layered = |kind: Option<&str>, layers: &[MlpLayer<T>], dims: Vec<usize>| {
            let mut weights = Vec::new();
            let mut biases = Vec::new();
            for l in layers {
                weights.push(l.w.cast::<f64>().to_rows());
                weights.push(l.w_tilde.cast::<f64>().to_rows());
                biases.push(l.b.iter().map(|v| v.as_f64()).collect());
                biases.push(l.b_tilde.iter().map(|v| v.as_f64()).collect());
            }
            let acts: Vec<Activation> = layers.iter().map(|l| l.activation).collect();
            let activation = if acts.windows(2).all(|w| w[0] == w[1]) {
                ActivationJson::Shared(acts[0])
            } else {
                ActivationJson::PerLayer(acts)
            };
            NetworkJson {
                kind: kind.map(str::to_string),
                layer_dims: dims,
                weights,
                biases,
                activation: Some(activation),
                vector_field_id: None,
                t_end: None,
                tau: None,
                steps: None,
            }
        };
        let continuous = |w: &Matrix<T>, b: &[T], wt: &Matrix<T>, bt: &[T], id: &Option<String>| -> Result<NetworkJson> {
            let id = id
                .clone()
                .ok_or_else(|| Error::Unsupported("only registry vector fields can be serialised".into()))?;
            Ok(NetworkJson {
                kind: None,
                layer_dims: vec![w.cols(), w.rows(), wt.rows()],
                weights: vec![w.cast::<f64>().to_rows(), wt.cast::<f64>().to_rows()],
                biases: vec![b.iter().map(|v| v.as_f64()).collect(), bt.iter().map(|v| v.as_f64()).collect()],
                activation: None,
                vector_field_id: Some(id),
                t_end: None,
                tau: None,
                steps: None,
            })
        };
        match self {
            Self::Mlp(s) => Ok(layered(None, s.layers(), s.layer_dims())),
            Self::ResNet(s) => {
                Ok(layered(Some("resnet"), s.layers(), vec![s.width(); s.layers().len() + 1]))
            }
            Self::Node(s) => {
                let mut j = continuous(&s.w, &s.b, &s.w_tilde, &s.b_tilde, &s.field_id)?;
                j.t_end = Some(s.t_end.as_f64());
                j.steps = Some(s.steps);
                Ok(j)
            }
            Self::Ndde(s) => {
                let mut j = continuous(&s.w, &s.b, &s.w_tilde, &s.b_tilde, &s.field_id)?;
                j.t_end = Some(s.t_end.as_f64());
                j.steps = Some(s.steps);
                j.tau = Some(s.tau.as_f64());
                Ok(j)
            }
        }
    }
}

fn matrix_from_rows<T: Scalar>(rows: &[Vec<f64>], what: &str, layer: usize) -> Result<Matrix<T>> {
    Matrix::from_rows(rows)
        .map(|m: Matrix<f64>| m.cast::<T>())
        .map_err(|e| Error::Structural { layer, message: format!("{what}: {e}") })
}

fn layers_from_json<T: Scalar>(doc: &NetworkJson) -> Result<Vec<MlpLayer<T>>> {
    let depth = doc.layer_dims.len().saturating_sub(1);
    if depth == 0 {
        return Err(Error::Input("layer_dims needs at least two entries".into()));
    }
    if doc.weights.len() != 2 * depth {
        return Err(Error::Input(format!("expected {} weight matrices (W and W̃ per layer), got {}", 2 * depth, doc.weights.len())));
    }
    if !doc.biases.is_empty() && doc.biases.len() != 2 * depth {
        return Err(Error::Input(format!("expected {} bias vectors, got {}", 2 * depth, doc.biases.len())));
    }
    let activations: Vec<Activation> = match &doc.activation {
        None => vec![Activation::Identity; depth],
        Some(ActivationJson::Shared(a)) => vec![*a; depth],
        Some(ActivationJson::PerLayer(list)) if list.len() == depth => list.clone(),
        Some(ActivationJson::PerLayer(list)) => {
            return Err(Error::Input(format!("expected {depth} activations, got {}", list.len())))
        }
    };
    let mut layers = Vec::with_capacity(depth);
    for l in 0..depth {
        let w: Matrix<T> = matrix_from_rows(&doc.weights[2 * l], "W", l)?;
        let wt: Matrix<T> = matrix_from_rows(&doc.weights[2 * l + 1], "W̃", l)?;
        let (b, bt) = if doc.biases.is_empty() {
            (vec![T::zero(); w.rows()], vec![T::zero(); wt.rows()])
        } else {
            (
                doc.biases[2 * l].iter().map(|&v| T::lit(v)).collect(),
                doc.biases[2 * l + 1].iter().map(|&v| T::lit(v)).collect(),
            )
        };
        if w.cols() != doc.layer_dims[l] || wt.rows() != doc.layer_dims[l + 1] {
            return Err(Error::Structural {
                layer: l,
                message: format!(
                    "weights map {} to {} but layer_dims says {} to {}",
                    w.cols(),
                    wt.rows(),
                    doc.layer_dims[l],
                    doc.layer_dims[l + 1]
                ),
            });
        }
        layers.push(MlpLayer::new(w, b, wt, bt, activations[l]));
    }
    Ok(layers)
}

fn continuous_from_json<T: Scalar>(doc: &NetworkJson, delay: bool) -> Result<NetworkSpec<T>> {
    let [d, m, q] = doc.layer_dims[..] else {
        return Err(Error::Input("a neural ODE/DDE needs layer_dims = [d, m, q]".into()));
    };
    let id = doc.vector_field_id.as_deref().ok_or_else(|| Error::Input("missing vector_field_id".into()))?;
    let t_end = doc.t_end.ok_or_else(|| Error::Input("missing T".into()))?;
    let steps = doc.steps.ok_or_else(|| Error::Input("missing steps".into()))?;
    let (w, wt) = match &doc.weights[..] {
        [] => (Matrix::<T>::identity(m), Matrix::<T>::identity(m)),
        [w, wt] => (matrix_from_rows(w, "W", 0)?, matrix_from_rows(wt, "W̃", 1)?),
        _ => return Err(Error::Input("a neural ODE/DDE takes weights [W, W̃]".into())),
    };
    if w.cols() != d || wt.rows() != q {
        return Err(Error::Structural { layer: 0, message: "weights disagree with layer_dims".into() });
    }
    let (b, bt) = match &doc.biases[..] {
        [] => (vec![T::zero(); m], vec![T::zero(); q]),
        [b, bt] => (b.iter().map(|&v| T::lit(v)).collect(), bt.iter().map(|&v| T::lit(v)).collect()),
        _ => return Err(Error::Input("a neural ODE/DDE takes biases [b, b̃]".into())),
    };
    let field: Arc<dyn VectorField<T>> = Arc::new(BuiltinField::<T>::from_id(id, m)?);
    if delay {
        let tau = doc.tau.ok_or_else(|| Error::Input("missing tau".into()))?;
        let mut spec = NeuralDdeSpec::new(w, b, wt, bt, Arc::new(Delayed(field)), T::lit(tau), T::lit(t_end), steps)?;
        spec.field_id = Some(id.to_string());
        Ok(NetworkSpec::Ndde(spec))
    } else {
        let mut spec = NeuralOdeSpec::new(w, b, wt, bt, field, T::lit(t_end), steps)?;
        spec.field_id = Some(id.to_string());
        Ok(NetworkSpec::Node(spec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_round_trip() {
        let text = r#"{
            "layer_dims": [1, 1],
            "weights": [[[1.0]], [[2.0]]],
            "biases": [[0.0], [1.0]],
            "activation": "tanh"
        }"#;
        let net = NetworkSpec::<f64>::from_json_str(text).unwrap();
        assert_eq!(net.forward(&[0.0]).unwrap(), vec![1.0]);
        let again = NetworkSpec::<f64>::from_json_str(&net.to_json_string().unwrap()).unwrap();
        assert_eq!(again.forward(&[0.3]).unwrap(), net.forward(&[0.3]).unwrap());
    }

    #[test]
    fn node_from_json() {
        let text = r#"{"layer_dims": [1, 1, 1], "vector_field_id": "linear:1", "T": 1.0, "steps": 100}"#;
        let net = NetworkSpec::<f64>::from_json_str(text).unwrap();
        assert!((net.forward(&[1.0]).unwrap()[0] - std::f64::consts::E).abs() < 1e-6);
        assert!(matches!(net, NetworkSpec::Node(_)));
        let text = r#"{"layer_dims": [1, 1, 1], "vector_field_id": "decay:1", "T": 1.0, "steps": 100, "tau": 1.0}"#;
        let net = NetworkSpec::<f64>::from_json_str(text).unwrap();
        assert!((net.forward(&[1.0]).unwrap()[0]).abs() < 1e-12);
        let back = net.to_json().unwrap();
        assert_eq!(back.tau, Some(1.0));
    }

    #[test]
    fn inconsistent_dims_are_structural() {
        let text = r#"{"layer_dims": [2, 1], "weights": [[[1.0]], [[2.0]]], "activation": "tanh"}"#;
        assert!(matches!(NetworkSpec::<f64>::from_json_str(text), Err(Error::Structural { layer: 0, .. })));
    }

    #[test]
    fn unknown_field_rejected() {
        let text = r#"{"layer_dims": [1, 1], "weights": [[[1.0]], [[2.0]]], "wieghts": 1}"#;
        assert!(NetworkSpec::<f64>::from_json_str(text).is_err());
    }
}
