use serde::{Deserialize, Serialize};

use super::ode::VectorField;
use crate::numerics::{norm2, Scalar, SeededRng};
use crate::{Error, Result};

/// Target function scales `(K_Ψ, w, w̃)` for the embedding criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedTarget {
    pub k_psi: f64,
    pub w: f64,
    pub w_tilde: f64,
}

/// Memory capacity `Kτ` of a neural DDE and the two regime indicators.
///
/// The small-memory flag only marks a candidate regime: the threshold
/// delay below which approximation provably fails is known to exist but is
/// not available in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub k: f64,
    pub tau: f64,
    pub target: Option<EmbedTarget>,
}

impl MemoryReport {
    pub fn product(&self) -> f64 {
        self.k * self.tau
    }

    /// `Kτe < 1`
    pub fn small_memory_flag(&self) -> bool {
        self.product() * std::f64::consts::E < 1.0
    }

    /// `Kτ ≥ 2(1 + K_Ψ/(w w̃))`; false without a target.
    pub fn embed_capable_flag(&self) -> bool {
        self.embed_threshold().is_some_and(|thr| self.product() >= thr)
    }

    pub fn embed_threshold(&self) -> Option<f64> {
        self.target.map(|t| 2.0 * (1.0 + t.k_psi / (t.w * t.w_tilde)))
    }
}

pub fn memory_report(k: f64, tau: f64, target: Option<EmbedTarget>) -> Result<MemoryReport> {
    if !(k >= 0.0) || !(tau >= 0.0) || !k.is_finite() || !tau.is_finite() {
        return Err(Error::Input("K and τ must be finite and nonnegative".into()));
    }
    if let Some(t) = target {
        if !(t.w > 0.0) || !(t.w_tilde > 0.0) || !(t.k_psi >= 0.0) {
            return Err(Error::Input("target needs w, w̃ > 0 and K_Ψ ≥ 0".into()));
        }
    }
    Ok(MemoryReport { k, tau, target })
}

/// Sampling lower bound on the Lipschitz constant of `h ↦ f(t, h)`:
/// the largest difference quotient over `pairs` random pairs in the box
/// `[−radius, radius]^m`.
pub fn estimate_lipschitz_lower_bound<T: Scalar>(
    field: &dyn VectorField<T>,
    t: T,
    radius: f64,
    pairs: usize,
    rng: &mut SeededRng,
) -> f64 {
    let m = field.dim();
    let mut best = 0.0f64;
    for _ in 0..pairs {
        let x: Vec<T> = (0..m).map(|_| T::lit(rng.uniform_in(-radius, radius))).collect();
        let y: Vec<T> = (0..m).map(|_| T::lit(rng.uniform_in(-radius, radius))).collect();
        let dx: Vec<T> = x.iter().zip(&y).map(|(&a, &b)| a - b).collect();
        let nx = norm2(&dx).as_f64();
        if nx == 0.0 {
            continue;
        }
        let fx = field.eval(t, &x);
        let fy = field.eval(t, &y);
        let df: Vec<T> = fx.iter().zip(&fy).map(|(&a, &b)| a - b).collect();
        let ratio = norm2(&df).as_f64() / nx;
        if ratio.is_finite() {
            best = best.max(ratio);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::ode::BuiltinField;

    #[test]
    fn small_memory_example() {
        let r = memory_report(1.0, 0.3, None).unwrap();
        assert!((r.product() * std::f64::consts::E - 0.815_484_6).abs() < 1e-6);
        assert!(r.small_memory_flag());
        assert!(!r.embed_capable_flag());
    }

    #[test]
    fn no_coupling() {
        let r = memory_report(0.0, 5.0, Some(EmbedTarget { k_psi: 0.0, w: 1.0, w_tilde: 1.0 })).unwrap();
        assert!(r.small_memory_flag());
        assert!(!r.embed_capable_flag());
    }

    #[test]
    fn boundary_is_inclusive() {
        let r = memory_report(4.0, 1.0, Some(EmbedTarget { k_psi: 1.0, w: 1.0, w_tilde: 1.0 })).unwrap();
        assert!(r.embed_capable_flag());
        assert!(!r.small_memory_flag());
    }

    #[test]
    fn negative_inputs_rejected() {
        assert!(memory_report(-1.0, 1.0, None).is_err());
        assert!(memory_report(1.0, 1.0, Some(EmbedTarget { k_psi: 1.0, w: 0.0, w_tilde: 1.0 })).is_err());
    }

    #[test]
    fn lipschitz_estimate_is_a_lower_bound() {
        let f = BuiltinField::<f64>::Linear { dim: 2, a: 3.0 };
        let k = estimate_lipschitz_lower_bound(&f, 0.0, 1.0, 1000, &mut SeededRng::new(1));
        assert!((k - 3.0).abs() < 1e-9);
        let g = BuiltinField::<f64>::from_id("tanh-net:2", 3).unwrap();
        let k = estimate_lipschitz_lower_bound(&g, 0.0, 2.0, 1000, &mut SeededRng::new(1));
        let BuiltinField::TanhNet { a, .. } = &g else { unreachable!() };
        assert!(k <= a.frobenius_norm() + 1e-12);
    }
}
