//! Gaussian quadrature rules via the Golub–Welsch eigenvalue method.

use super::eigen::sym_eigen;
use super::matrix::Matrix;
use crate::{Error, Result};

/// Nodes and weights of a quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn golub_welsch(offdiag: &[f64], mu0: f64) -> Result<Rule> {
    let n = offdiag.len() + 1;
    let mut j = Matrix::zeros(n, n);
    for (k, &b) in offdiag.iter().enumerate() {
        j[(k, k + 1)] = b;
        j[(k + 1, k)] = b;
    }
    let eig = sym_eigen(&j)?;
    let weights = (0..n).map(|k| mu0 * eig.vectors[(0, k)].powi(2)).collect();
    Ok(Rule { nodes: eig.values, weights })
}

/// Gauss–Legendre rule with `n` points on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::Input("quadrature order must be at least 1".into()));
    }
    let off: Vec<f64> = (1..n).map(|k| k as f64 / ((4 * k * k - 1) as f64).sqrt()).collect();
    golub_welsch(&off, 2.0)
}

/// Gauss–Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Result<Rule> {
    let r = gauss_legendre(n)?;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    Ok(Rule {
        nodes: r.nodes.iter().map(|&x| mid + half * x).collect(),
        weights: r.weights.iter().map(|&w| half * w).collect(),
    })
}

/// Quantises `N(mean, sd²)` into `n` atoms by Gauss–Hermite quadrature.
/// The weights sum to one.
pub fn gauss_hermite_normal(n: usize, mean: f64, sd: f64) -> Result<Rule> {
    if n == 0 {
        return Err(Error::Input("quadrature order must be at least 1".into()));
    }
    if !(sd >= 0.0) {
        return Err(Error::Input("standard deviation must be nonnegative".into()));
    }
    // Probabilists' Hermite recurrence: off-diagonal sqrt(k).
    let off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
    let r = golub_welsch(&off, 1.0)?;
    Ok(Rule { nodes: r.nodes.iter().map(|&x| mean + sd * x).collect(), weights: r.weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let r = gauss_legendre(4).unwrap();
        // degree 7 is exact for 4 points
        let integral: f64 = r.nodes.iter().zip(&r.weights).map(|(&x, &w)| w * (x.powi(6) + x.powi(7))).sum();
        assert!((integral - 2.0 / 7.0).abs() < 1e-14);
        let mass: f64 = r.weights.iter().sum();
        assert!((mass - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_matches_normal_moments() {
        let r = gauss_hermite_normal(5, 1.0, 2.0).unwrap();
        let m = |p: i32| -> f64 { r.nodes.iter().zip(&r.weights).map(|(&x, &w)| w * x.powi(p)).sum() };
        assert!((m(0) - 1.0).abs() < 1e-14);
        assert!((m(1) - 1.0).abs() < 1e-13);
        assert!((m(2) - 5.0).abs() < 1e-12);
    }
}
