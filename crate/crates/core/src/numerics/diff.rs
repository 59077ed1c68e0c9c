//! Central finite differences.

use super::matrix::Matrix;
use super::scalar::{norm_inf, Scalar};
use crate::{Error, Result};

/// Default step `cbrt(eps) · (1 + ‖p‖∞)`.
pub fn default_step<T: Scalar>(p: &[T]) -> T {
    T::epsilon().cbrt() * (T::one() + norm_inf(p))
}

/// Central-difference gradient `(f(p+he_i) − f(p−he_i)) / 2h`.
pub fn finite_diff_gradient<T: Scalar>(f: impl Fn(&[T]) -> T, p: &[T], h: T) -> Result<Vec<T>> {
    if !(h > T::zero()) {
        return Err(Error::Input("finite-difference step must be positive".into()));
    }
    let mut x = p.to_vec();
    let mut out = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        x[i] = p[i] + h;
        let fp = f(&x);
        x[i] = p[i] - h;
        let fm = f(&x);
        x[i] = p[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::Evaluation(format!("f is not finite near coordinate {i}")));
        }
        out.push((fp - fm) / (T::lit(2.0) * h));
    }
    Ok(out)
}

/// Central-difference Jacobian of a vector map; row `i` holds `∂f_i/∂p`.
pub fn finite_diff_jacobian<T: Scalar>(f: impl Fn(&[T]) -> Result<Vec<T>>, p: &[T], h: T) -> Result<Matrix<T>> {
    if !(h > T::zero()) {
        return Err(Error::Input("finite-difference step must be positive".into()));
    }
    let mut x = p.to_vec();
    let mut columns = Vec::with_capacity(p.len());
    let mut rows = 0;
    for j in 0..p.len() {
        x[j] = p[j] + h;
        let fp = f(&x)?;
        x[j] = p[j] - h;
        let fm = f(&x)?;
        x[j] = p[j];
        if fp.len() != fm.len() {
            return Err(Error::Dimension("map changed output length".into()));
        }
        if fp.iter().chain(&fm).any(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("map is not finite near coordinate {j}")));
        }
        rows = fp.len();
        columns.push(fp.iter().zip(&fm).map(|(&a, &b)| (a - b) / (T::lit(2.0) * h)).collect::<Vec<T>>());
    }
    if p.is_empty() {
        rows = f(p)?.len();
    }
    Matrix::from_columns(&columns, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let g = finite_diff_gradient(|x: &[f64]| x[0] * x[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_gives_zero() {
        let g = finite_diff_gradient(|_: &[f64]| 4.2, &[1.0, -3.0], 1e-4).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn bilinear() {
        let g = finite_diff_gradient(|x: &[f64]| x[0] * x[1], &[2.0, 5.0], 1e-5).unwrap();
        assert!((g[0] - 5.0).abs() < 1e-6 && (g[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn non_finite_is_reported() {
        let r = finite_diff_gradient(|x: &[f64]| 1.0 / x[0], &[0.0], 0.5);
        assert!(r.is_ok());
        let r = finite_diff_gradient(|x: &[f64]| (x[0] - 0.5).ln(), &[0.0], 0.5);
        assert!(matches!(r, Err(Error::Evaluation(_))));
    }

    #[test]
    fn jacobian_of_linear_map() {
        let a = [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let j = finite_diff_jacobian(
            |x: &[f64]| Ok(a.iter().map(|r| r[0] * x[0] + r[1] * x[1]).collect()),
            &[0.3, -0.7],
            1e-4,
        )
        .unwrap();
        for i in 0..3 {
            for k in 0..2 {
                assert!((j[(i, k)] - a[i][k]).abs() < 1e-9);
            }
        }
    }
}
