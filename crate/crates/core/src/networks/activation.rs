use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::numerics::Scalar;
use crate::{Error, Result};

/// Strictly monotone scalar activation.
///
/// Plain ReLU is deliberately absent; the leaky variant requires a positive slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Tanh,
    Softplus,
    Sigmoid,
    LeakyRelu { slope: f64 },
    Identity,
}

impl Activation {
    pub fn leaky_relu(slope: f64) -> Result<Self> {
        if slope > 0.0 && slope.is_finite() {
            Ok(Self::LeakyRelu { slope })
        } else {
            Err(Error::Input(format!("leaky-relu slope must be positive, got {slope}")))
        }
    }

    pub fn eval<T: Scalar>(&self, x: T) -> T {
        match *self {
            Self::Tanh => x.tanh(),
            Self::Softplus => {
                // log(1 + e^x) without overflow
                if x > T::zero() {
                    x + (-x).exp().ln_1p()
                } else {
                    x.exp().ln_1p()
                }
            }
            Self::Sigmoid => sigmoid(x),
            Self::LeakyRelu { slope } => {
                if x >= T::zero() {
                    x
                } else {
                    T::lit(slope) * x
                }
            }
            Self::Identity => x,
        }
    }

    pub fn derivative<T: Scalar>(&self, x: T) -> T {
        match *self {
            Self::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
            Self::Softplus => sigmoid(x),
            Self::Sigmoid => {
                let s = sigmoid(x);
                s * (T::one() - s)
            }
            Self::LeakyRelu { slope } => {
                if x >= T::zero() {
                    T::one()
                } else {
                    T::lit(slope)
                }
            }
            Self::Identity => T::one(),
        }
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Tanh => write!(f, "tanh"),
            Self::Softplus => write!(f, "softplus"),
            Self::Sigmoid => write!(f, "sigmoid"),
            Self::LeakyRelu { slope } => write!(f, "leaky-relu:{slope}"),
            Self::Identity => write!(f, "identity"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    /// Accepts `tanh`, `softplus`, `sigmoid`, `identity` and `leaky-relu:<slope>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "tanh" => Ok(Self::Tanh),
            "softplus" => Ok(Self::Softplus),
            "sigmoid" => Ok(Self::Sigmoid),
            "identity" => Ok(Self::Identity),
            "relu" => Err(Error::Input("relu is not strictly monotone; use leaky-relu:<slope>".into())),
            other => match other.strip_prefix("leaky-relu:") {
                Some(slope) => {
                    let slope: f64 = slope
                        .parse()
                        .map_err(|_| Error::Input(format!("bad leaky-relu slope in '{other}'")))?;
                    Self::leaky_relu(slope)
                }
                None => Err(Error::Input(format!("unknown activation '{other}'"))),
            },
        }
    }
}

impl Serialize for Activation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Activation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        let acts = [
            Activation::Tanh,
            Activation::Softplus,
            Activation::Sigmoid,
            Activation::LeakyRelu { slope: 0.1 },
            Activation::Identity,
        ];
        for a in acts {
            for &x in &[-2.3f64, -0.4, 0.7, 3.1] {
                let h = 1e-6;
                let fd = (a.eval(x + h) - a.eval(x - h)) / (2.0 * h);
                assert!((fd - a.derivative(x)).abs() < 1e-8, "{a} at {x}");
                assert!(a.derivative(x) > 0.0);
            }
        }
    }

    #[test]
    fn parse_round_trip() {
        for s in ["tanh", "softplus", "sigmoid", "identity", "leaky-relu:0.25"] {
            assert_eq!(s.parse::<Activation>().unwrap().to_string(), s);
        }
        assert!("relu".parse::<Activation>().is_err());
        assert!("leaky-relu:0".parse::<Activation>().is_err());
    }

    #[test]
    fn softplus_is_stable_for_large_inputs() {
        assert_eq!(Activation::Softplus.eval(1000.0f64), 1000.0);
        assert!(Activation::Softplus.eval(-1000.0f64) >= 0.0);
    }
}
