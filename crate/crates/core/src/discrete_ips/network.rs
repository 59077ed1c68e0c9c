use serde::{Deserialize, Serialize};

use crate::numerics::Matrix;
use crate::{Error, Result};

/// Largest network for exact enumeration of `{0,1}^M`.
pub const MAX_EXACT_SITES: usize = 20;

/// How the local field enters the logistic update probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    /// `p_i = 1/(1 + exp(b_i − Σ_j a_ij v_j))`, the Glauber rule of `exp(−H)`.
    #[default]
    Balanced,
    /// `p_i = 1/(1 + exp(b_i + Σ_j a_ij v_j))` as printed; not reversible
    /// for `exp(−H)` once couplings are present.
    Literal,
}

impl std::str::FromStr for SignConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(Self::Balanced),
            "literal" => Ok(Self::Literal),
            other => Err(Error::Config(format!("unknown sign convention '{other}' (expected balanced or literal)"))),
        }
    }
}

/// Binary network with couplings `A` (zero diagonal) and biases `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinNetwork {
    a: Matrix<f64>,
    b: Vec<f64>,
    symmetric: bool,
}

impl SpinNetwork {
    /// Energy-consistent network: `A` must be symmetric.
    pub fn new(a: Matrix<f64>, b: Vec<f64>) -> Result<Self> {
        let net = Self::directed(a, b)?;
        if !net.symmetric {
            return Err(Error::Input("couplings must be symmetric for an energy-based network".into()));
        }
        Ok(net)
    }

    /// Network without the symmetry requirement; energy-based analysis is refused.
    pub fn directed(a: Matrix<f64>, b: Vec<f64>) -> Result<Self> {
        let m = b.len();
        if m == 0 || a.rows() != m || a.cols() != m {
            return Err(Error::Dimension(format!("need an {m}×{m} coupling matrix for {m} biases")));
        }
        if !a.data().iter().chain(&b).all(|v| v.is_finite()) {
            return Err(Error::Input("couplings and biases must be finite".into()));
        }
        if (0..m).any(|i| a[(i, i)] != 0.0) {
            return Err(Error::Input("couplings must have a zero diagonal".into()));
        }
        let symmetric = (0..m).all(|i| (0..i).all(|j| a[(i, j)] == a[(j, i)]));
        Ok(Self { a, b, symmetric })
    }

    /// Independent sites with biases `b`.
    pub fn uncoupled(b: Vec<f64>) -> Result<Self> {
        let m = b.len();
        Self::new(Matrix::zeros(m, m), b)
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn couplings(&self) -> &Matrix<f64> {
        &self.a
    }

    pub fn biases(&self) -> &[f64] {
        &self.b
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub(crate) fn require_energy(&self) -> Result<()> {
        if self.symmetric {
            Ok(())
        } else {
            Err(Error::Input("energy-based analysis needs symmetric couplings".into()))
        }
    }

    pub fn check_state(&self, v: &[u8]) -> Result<()> {
        if v.len() != self.m() {
            return Err(Error::Dimension(format!("state has {} sites, network has {}", v.len(), self.m())));
        }
        if v.iter().any(|&s| s > 1) {
            return Err(Error::Input("state entries must be 0 or 1".into()));
        }
        Ok(())
    }

    /// `Σ_j a_ij v_j`.
    pub fn field(&self, i: usize, v: &[u8]) -> f64 {
        self.a.row(i).iter().zip(v).filter(|(_, &s)| s == 1).map(|(a, _)| a).sum()
    }

    /// Probability that site `i` is set to 1 given the other sites.
    pub fn on_probability(&self, i: usize, v: &[u8], convention: SignConvention) -> f64 {
        let h = self.field(i, v);
        let z = match convention {
            SignConvention::Balanced => self.b[i] - h,
            SignConvention::Literal => self.b[i] + h,
        };
        1.0 / (1.0 + z.exp())
    }
}

/// `H(v) = Σ_i v_i b_i − ½ Σ_{i,j} v_i v_j a_ij`.
pub fn energy(net: &SpinNetwork, v: &[u8]) -> Result<f64> {
    net.check_state(v)?;
    let m = net.m();
    let mut linear = 0.0;
    let mut quad = 0.0;
    for i in 0..m {
        if v[i] == 1 {
            linear += net.b[i];
            quad += net.field(i, v);
        }
    }
    Ok(linear - 0.5 * quad)
}

/// State `k` of `{0,1}^M` in lexicographic order (`v_1` most significant).
pub fn state_of_index(k: usize, m: usize) -> Vec<u8> {
    (0..m).map(|i| ((k >> (m - 1 - i)) & 1) as u8).collect()
}

pub fn index_of_state(v: &[u8]) -> usize {
    v.iter().fold(0, |acc, &s| (acc << 1) | s as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_examples() {
        let net = SpinNetwork::new(Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(), vec![0.0, 0.0]).unwrap();
        assert_eq!(energy(&net, &[0, 0]).unwrap(), 0.0);
        assert_eq!(energy(&net, &[1, 1]).unwrap(), -1.0);
        let net = SpinNetwork::uncoupled(vec![3.0, 0.0]).unwrap();
        assert_eq!(energy(&net, &[1, 0]).unwrap(), 3.0);
        assert!(energy(&net, &[2, 0]).is_err());
    }

    #[test]
    fn validation() {
        assert!(SpinNetwork::new(Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap(), vec![0.0; 2]).is_err());
        let asym = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(SpinNetwork::new(asym.clone(), vec![0.0; 2]).is_err());
        assert!(!SpinNetwork::directed(asym, vec![0.0; 2]).unwrap().is_symmetric());
    }

    #[test]
    fn index_roundtrip() {
        for k in 0..16 {
            assert_eq!(index_of_state(&state_of_index(k, 4)), k);
        }
        assert_eq!(state_of_index(1, 3), vec![0, 0, 1]);
    }

    #[test]
    fn logistic_limits() {
        let net = SpinNetwork::uncoupled(vec![0.0, 800.0, -2.0]).unwrap();
        assert_eq!(net.on_probability(0, &[0, 0, 0], SignConvention::Balanced), 0.5);
        assert_eq!(net.on_probability(1, &[0, 0, 0], SignConvention::Balanced), 0.0);
        assert!((net.on_probability(2, &[0, 0, 0], SignConvention::Literal) - 1.0 / (1.0 + (-2f64).exp())).abs() < 1e-16);
    }
}
