//! Weighted atomic measures and the distances used to compare them.

use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use crate::{Error, Result};

const PROB_TOL: f64 = 1e-9;

/// A finite weighted sum of Dirac masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureAtoms<T> {
    positions: Vec<Vec<T>>,
    weights: Vec<T>,
}

impl<T: Scalar> MeasureAtoms<T> {
    pub fn new(positions: Vec<Vec<T>>, weights: Vec<T>) -> Result<Self> {
        if positions.len() != weights.len() {
            return Err(Error::Dimension(format!(
                "{} positions but {} weights",
                positions.len(),
                weights.len()
            )));
        }
        let dim = positions.first().map_or(0, Vec::len);
        if dim == 0 || positions.iter().any(|p| p.len() != dim) {
            return Err(Error::Dimension("atom positions must share a dimension of at least 1".into()));
        }
        if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(Error::Input("weights must be finite and nonnegative".into()));
        }
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Input("positions must be finite".into()));
        }
        if !(weights.iter().copied().sum::<T>() > T::zero()) {
            return Err(Error::Input("total mass must be positive".into()));
        }
        Ok(Self { positions, weights })
    }

    /// One-dimensional atoms.
    pub fn on_line(points: &[T], weights: Vec<T>) -> Result<Self> {
        Self::new(points.iter().map(|&x| vec![x]).collect(), weights)
    }

    /// Equal weights `1/n` at the given one-dimensional points.
    pub fn uniform(points: &[T]) -> Result<Self> {
        let w = T::one() / T::from_usize_lossy(points.len().max(1));
        Self::on_line(points, vec![w; points.len()])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.positions[0].len()
    }

    pub fn positions(&self) -> &[Vec<T>] {
        &self.positions
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn total_mass(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass() - T::one()).abs() <= T::lit(PROB_TOL)
    }
}

/// Ambient space for one-dimensional transport distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry<T> {
    Line,
    /// Circle `ℝ / period·ℤ`.
    Circle(T),
}

fn check_1d_probability<T: Scalar>(m: &MeasureAtoms<T>) -> Result<()> {
    if m.dim() != 1 {
        return Err(Error::Unsupported(format!("Wasserstein-1 is only available in dimension 1, got {}", m.dim())));
    }
    if !m.is_probability() {
        return Err(Error::Input(format!("measure has total mass {}, expected 1", m.total_mass())));
    }
    Ok(())
}

/// Wasserstein-1 distance between two probability measures on the line or a circle.
///
/// On the line this is `∫ |F_a − F_b|`. On a circle of period `P` it is
/// `min_s ∫_0^P |F_a − F_b − s|`, where the minimising shift is the
/// length-weighted median of the piecewise-constant CDF difference.
pub fn wasserstein1<T: Scalar>(a: &MeasureAtoms<T>, b: &MeasureAtoms<T>, geometry: Geometry<T>) -> Result<T> {
    check_1d_probability(a)?;
    check_1d_probability(b)?;
    let wrap = |x: T| match geometry {
        Geometry::Line => x,
        Geometry::Circle(p) => {
            let r = x - (x / p).floor() * p;
            if r >= p {
                r - p
            } else {
                r
            }
        }
    };
    let mut events: Vec<(T, T)> = Vec::with_capacity(a.len() + b.len());
    events.extend(a.positions.iter().zip(&a.weights).map(|(p, &w)| (wrap(p[0]), w)));
    events.extend(b.positions.iter().zip(&b.weights).map(|(p, &w)| (wrap(p[0]), -w)));
    events.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));

    // Piecewise-constant CDF difference as (value, interval length) pieces.
    let mut pieces: Vec<(T, T)> = Vec::with_capacity(events.len() + 1);
    let mut diff = T::zero();
    let mut k = 0;
    let mut start = match geometry {
        Geometry::Line => events.first().map_or(T::zero(), |e| e.0),
        Geometry::Circle(_) => T::zero(),
    };
    while k < events.len() {
        let x = events[k].0;
        if x > start {
            pieces.push((diff, x - start));
        }
        while k < events.len() && events[k].0 == x {
            diff = diff + events[k].1;
            k += 1;
        }
        start = x;
    }
    if let Geometry::Circle(p) = geometry {
        if p > start {
            pieces.push((diff, p - start));
        }
    }

    let shift = match geometry {
        Geometry::Line => T::zero(),
        Geometry::Circle(_) => weighted_median(&mut pieces.clone()),
    };
    Ok(pieces.iter().map(|&(v, len)| (v - shift).abs() * len).sum())
}

fn weighted_median<T: Scalar>(pieces: &mut [(T, T)]) -> T {
    pieces.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    let total: T = pieces.iter().map(|p| p.1).sum();
    let half = total * T::lit(0.5);
    let mut acc = T::zero();
    for &(v, len) in pieces.iter() {
        acc = acc + len;
        if acc >= half {
            return v;
        }
    }
    pieces.last().map_or(T::zero(), |p| p.0)
}

/// Kullback–Leibler divergence `Σ p_i ln(p_i/q_i)`, with `0·ln(0/q) = 0`.
///
/// Returns `+∞` when some `p_i > 0` meets `q_i = 0`.
pub fn kl_divergence<T: Scalar>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!("p has length {} but q has length {}", p.len(), q.len())));
    }
    for (name, v) in [("p", p), ("q", q)] {
        if v.iter().any(|x| !(*x >= T::zero()) || !x.is_finite()) {
            return Err(Error::Input(format!("{name} has a negative or non-finite entry")));
        }
        let s: T = v.iter().copied().sum();
        if (s - T::one()).abs() > T::lit(PROB_TOL) {
            return Err(Error::Input(format!("{name} sums to {s}, expected 1")));
        }
    }
    let mut acc = T::zero();
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == T::zero() {
            continue;
        }
        if qi == T::zero() {
            return Ok(T::infinity());
        }
        acc = acc + pi * (pi / qi).ln();
    }
    Ok(acc.max(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atoms(x: &[f64], w: &[f64]) -> MeasureAtoms<f64> {
        MeasureAtoms::on_line(x, w.to_vec()).unwrap()
    }

    #[test]
    fn dirac_distance_on_line() {
        let d = wasserstein1(&atoms(&[0.0], &[1.0]), &atoms(&[1.0], &[1.0]), Geometry::Line).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn self_distance_is_zero() {
        let a = atoms(&[0.3, -1.0, 2.0], &[0.2, 0.5, 0.3]);
        assert_eq!(wasserstein1(&a, &a, Geometry::Line).unwrap(), 0.0);
        assert_eq!(wasserstein1(&a, &a, Geometry::Circle(std::f64::consts::TAU)).unwrap(), 0.0);
    }

    #[test]
    fn split_versus_midpoint() {
        let a = atoms(&[0.0, 1.0], &[0.5, 0.5]);
        let b = atoms(&[0.5, 0.5], &[0.5, 0.5]);
        assert!((wasserstein1(&a, &b, Geometry::Line).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn circle_uses_short_way_round() {
        // 0.1 and 0.9 on a unit circle are 0.2 apart
        let d = wasserstein1(&atoms(&[0.1], &[1.0]), &atoms(&[0.9], &[1.0]), Geometry::Circle(1.0)).unwrap();
        assert!((d - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_unnormalised_and_multidimensional() {
        let a = atoms(&[0.0], &[2.0]);
        assert!(matches!(wasserstein1(&a, &a, Geometry::Line), Err(Error::Input(_))));
        let b = MeasureAtoms::new(vec![vec![0.0, 1.0]], vec![1.0]).unwrap();
        assert!(matches!(wasserstein1(&b, &b, Geometry::Line), Err(Error::Unsupported(_))));
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!((kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), f64::INFINITY);
        assert!(matches!(kl_divergence(&[1.0], &[0.5, 0.5]), Err(Error::Dimension(_))));
    }
}
