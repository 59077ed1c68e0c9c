//! Dense eigen-analysis for the small matrices used throughout the crate.
//!
//! Symmetric problems go through cyclic Jacobi rotations. General matrices use
//! power iteration for the spectral radius, falling back to Householder
//! Hessenberg reduction followed by the Francis double-shift QR algorithm.

use super::matrix::Matrix;
use super::scalar::{dot, norm2, Scalar};
use crate::{Error, Result};

const JACOBI_MAX_SWEEPS: usize = 100;
const POWER_MAX_ITERS: usize = 200;

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    /// Eigenvalues in ascending order.
    pub values: Vec<T>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: Matrix<T>,
}

impl<T: Scalar> SymEigen<T> {
    pub fn vector(&self, k: usize) -> Vec<T> {
        self.vectors.column(k)
    }

    /// `V diag(λ) Vᵀ`
    pub fn reconstruct(&self) -> Matrix<T> {
        let n = self.values.len();
        let mut out = Matrix::zeros(n, n);
        for k in 0..n {
            let lambda = self.values[k];
            for i in 0..n {
                let vik = self.vectors[(i, k)] * lambda;
                for j in 0..n {
                    out[(i, j)] = out[(i, j)] + vik * self.vectors[(j, k)];
                }
            }
        }
        out
    }
}

/// Symmetric eigen-decomposition by cyclic Jacobi rotations.
///
/// The input must be square and symmetric within `1e-10` relative to its
/// largest entry (or a few ulps for single precision).
pub fn sym_eigen<T: Scalar>(m: &Matrix<T>) -> Result<SymEigen<T>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("sym_eigen needs a square matrix, got {}x{}", m.rows(), m.cols())));
    }
    let sym_tol = T::lit(1e-10).max(T::epsilon() * T::lit(64.0));
    if !m.is_symmetric(sym_tol) {
        return Err(Error::Input("sym_eigen input is not symmetric".into()));
    }
    let n = m.rows();
    let mut a = m.symmetrized();
    let mut v = Matrix::identity(n);

    let total = a.frobenius_norm();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= T::epsilon() * total * T::lit(1e-2) || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let t = if theta == T::zero() { T::one() } else { t };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = T::zero();
                a[(q, p)] = T::zero();
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, new)] = v[(k, old)];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Singular values in descending order, by one-sided Jacobi rotations.
///
/// Small singular values are resolved to roughly machine precision relative
/// to the largest one, which the Gram-matrix route cannot do.
pub fn singular_values<T: Scalar>(m: &Matrix<T>) -> Vec<T> {
    let a = if m.rows() >= m.cols() { m.clone() } else { m.transpose() };
    let (rows, cols) = (a.rows(), a.cols());
    let mut columns: Vec<Vec<T>> = (0..cols).map(|j| a.column(j)).collect();
    let tol = T::epsilon() * T::lit(4.0);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha = dot(&columns[p], &columns[p]);
                let beta = dot(&columns[q], &columns[q]);
                let gamma = dot(&columns[p], &columns[q]);
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for k in 0..rows {
                    let xp = columns[p][k];
                    let xq = columns[q][k];
                    columns[p][k] = c * xp - s * xq;
                    columns[q][k] = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = columns.iter().map(|c| norm2(c)).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number<T: Scalar>(m: &Matrix<T>) -> T {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > T::zero() => hi / lo,
        (Some(_), Some(_)) => T::infinity(),
        _ => T::zero(),
    }
}

/// A (possibly complex) eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue<T> {
    pub re: T,
    pub im: T,
}

impl<T: Scalar> Eigenvalue<T> {
    pub fn modulus(&self) -> T {
        self.re.hypot(self.im)
    }
}

/// All eigenvalues of a general square matrix.
pub fn eigenvalues<T: Scalar>(m: &Matrix<T>) -> Result<Vec<Eigenvalue<T>>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("eigenvalues need a square matrix, got {}x{}", m.rows(), m.cols())));
    }
    let mut h = m.clone();
    hessenberg_in_place(&mut h);
    hqr(h)
}

/// Householder reduction to upper Hessenberg form (similarity transform).
fn hessenberg_in_place<T: Scalar>(a: &mut Matrix<T>) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let mut x: Vec<T> = ((k + 1)..n).map(|i| a[(i, k)]).collect();
        let alpha = norm2(&x);
        if alpha == T::zero() {
            continue;
        }
        let sign = if x[0] >= T::zero() { T::one() } else { -T::one() };
        x[0] = x[0] + sign * alpha;
        let vnorm = norm2(&x);
        if vnorm == T::zero() {
            continue;
        }
        for xi in x.iter_mut() {
            *xi = *xi / vnorm;
        }
        // A <- (I - 2vvᵀ) A
        for j in 0..n {
            let s: T = (0..x.len()).map(|i| x[i] * a[(k + 1 + i, j)]).sum();
            for i in 0..x.len() {
                a[(k + 1 + i, j)] = a[(k + 1 + i, j)] - T::lit(2.0) * x[i] * s;
            }
        }
        // A <- A (I - 2vvᵀ)
        for i in 0..n {
            let s: T = (0..x.len()).map(|j| a[(i, k + 1 + j)] * x[j]).sum();
            for j in 0..x.len() {
                a[(i, k + 1 + j)] = a[(i, k + 1 + j)] - T::lit(2.0) * s * x[j];
            }
        }
        for i in (k + 2)..n {
            a[(i, k)] = T::zero();
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (EISPACK `hqr`).
fn hqr<T: Scalar>(mut a: Matrix<T>) -> Result<Vec<Eigenvalue<T>>> {
    let n = a.rows() as isize;
    let mut out = vec![Eigenvalue { re: T::zero(), im: T::zero() }; n as usize];
    if n == 0 {
        return Ok(out);
    }
    let eps = T::epsilon();
    let two = T::lit(2.0);
    let mut anorm = T::zero();
    for i in 0..n {
        for j in (i - 1).max(0)..n {
            anorm = anorm + a[(i as usize, j as usize)].abs();
        }
    }
    let idx = |i: isize, j: isize| (i as usize, j as usize);
    let mut nn = n - 1;
    let mut t = T::zero();
    while nn >= 0 {
        let mut its = 0;
        let mut l;
        loop {
            l = nn;
            while l > 0 {
                let mut s = a[idx(l - 1, l - 1)].abs() + a[idx(l, l)].abs();
                if s == T::zero() {
                    s = anorm;
                }
                if a[idx(l, l - 1)].abs() <= eps * s {
                    a[idx(l, l - 1)] = T::zero();
                    break;
                }
                l -= 1;
            }
            let mut x = a[idx(nn, nn)];
            if l == nn {
                out[nn as usize] = Eigenvalue { re: x + t, im: T::zero() };
                nn -= 1;
            } else {
                let mut y = a[idx(nn - 1, nn - 1)];
                let mut w = a[idx(nn, nn - 1)] * a[idx(nn - 1, nn)];
                if l == nn - 1 {
                    let p = T::lit(0.5) * (y - x);
                    let q = p * p + w;
                    let z = q.abs().sqrt();
                    x = x + t;
                    if q >= T::zero() {
                        let z = p + if p >= T::zero() { z } else { -z };
                        let lo = x + z;
                        let hi = if z != T::zero() { x - w / z } else { lo };
                        out[(nn - 1) as usize] = Eigenvalue { re: lo, im: T::zero() };
                        out[nn as usize] = Eigenvalue { re: hi, im: T::zero() };
                    } else {
                        out[nn as usize] = Eigenvalue { re: x + p, im: -z };
                        out[(nn - 1) as usize] = Eigenvalue { re: x + p, im: z };
                    }
                    nn -= 2;
                } else {
                    if its == 60 {
                        return Err(Error::Evaluation("QR eigenvalue iteration did not converge".into()));
                    }
                    if its == 10 || its == 20 {
                        t = t + x;
                        for i in 0..=nn {
                            a[idx(i, i)] = a[idx(i, i)] - x;
                        }
                        let s = a[idx(nn, nn - 1)].abs() + a[idx(nn - 1, nn - 2)].abs();
                        x = T::lit(0.75) * s;
                        y = x;
                        w = T::lit(-0.4375) * s * s;
                    }
                    its += 1;
                    let mut m = nn - 2;
                    let (mut p, mut q, mut r);
                    loop {
                        let z = a[idx(m, m)];
                        let r0 = x - z;
                        let s0 = y - z;
                        p = (r0 * s0 - w) / a[idx(m + 1, m)] + a[idx(m, m + 1)];
                        q = a[idx(m + 1, m + 1)] - z - r0 - s0;
                        r = a[idx(m + 2, m + 1)];
                        let s = p.abs() + q.abs() + r.abs();
                        p = p / s;
                        q = q / s;
                        r = r / s;
                        if m == l {
                            break;
                        }
                        let u = a[idx(m, m - 1)].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[idx(m - 1, m - 1)].abs() + z.abs() + a[idx(m + 1, m + 1)].abs());
                        if u <= eps * v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m..(nn - 1) {
                        a[idx(i + 2, i)] = T::zero();
                        if i != m {
                            a[idx(i + 2, i - 1)] = T::zero();
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = a[idx(k, k - 1)];
                            q = a[idx(k + 1, k - 1)];
                            r = T::zero();
                            if k + 1 != nn {
                                r = a[idx(k + 2, k - 1)];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != T::zero() {
                                p = p / x;
                                q = q / x;
                                r = r / x;
                            }
                        }
                        let norm = (p * p + q * q + r * r).sqrt();
                        let s = if p >= T::zero() { norm } else { -norm };
                        if s != T::zero() {
                            if k == m {
                                if l != m {
                                    a[idx(k, k - 1)] = -a[idx(k, k - 1)];
                                }
                            } else {
                                a[idx(k, k - 1)] = -s * x;
                            }
                            p = p + s;
                            x = p / s;
                            y = q / s;
                            let z = r / s;
                            q = q / p;
                            r = r / p;
                            for j in k..=nn {
                                let mut pp = a[idx(k, j)] + q * a[idx(k + 1, j)];
                                if k + 1 != nn {
                                    pp = pp + r * a[idx(k + 2, j)];
                                    a[idx(k + 2, j)] = a[idx(k + 2, j)] - pp * z;
                                }
                                a[idx(k + 1, j)] = a[idx(k + 1, j)] - pp * y;
                                a[idx(k, j)] = a[idx(k, j)] - pp * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                let mut pp = x * a[idx(i, k)] + y * a[idx(i, k + 1)];
                                if k + 1 != nn {
                                    pp = pp + z * a[idx(i, k + 2)];
                                    a[idx(i, k + 2)] = a[idx(i, k + 2)] - pp * r;
                                }
                                a[idx(i, k + 1)] = a[idx(i, k + 1)] - pp * q;
                                a[idx(i, k)] = a[idx(i, k)] - pp;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if l + 1 >= nn {
                break;
            }
        }
    }
    let _ = two;
    Ok(out)
}

/// Non-symmetric matrices up to this size go straight to QR, whose moduli are
/// accurate to rounding; a converged Rayleigh quotient is only first-order.
const QR_DIRECT_MAX: usize = 64;

/// Largest eigenvalue modulus of a square matrix.
///
/// Symmetric input is handled exactly by Jacobi and matrices up to 64×64 by
/// the QR spectrum. Larger ones use power iteration for at most 200 steps,
/// falling back to QR if the Rayleigh residual has not settled (complex or
/// equal-modulus dominant pairs, nilpotent parts).
pub fn spectral_radius<T: Scalar>(m: &Matrix<T>) -> Result<T> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("spectral radius needs a square matrix, got {}x{}", m.rows(), m.cols())));
    }
    if m.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("matrix entries must be finite".into()));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(T::zero());
    }
    if m.is_symmetric(T::epsilon() * T::lit(16.0)) {
        let eig = sym_eigen(m)?;
        return Ok(eig.values.iter().fold(T::zero(), |acc, &l| acc.max(l.abs())));
    }
    if n > QR_DIRECT_MAX {
        if let Some(rho) = power_iteration(m) {
            return Ok(rho);
        }
    }
    Ok(eigenvalues(m)?.iter().fold(T::zero(), |acc, e| acc.max(e.modulus())))
}

fn power_iteration<T: Scalar>(m: &Matrix<T>) -> Option<T> {
    let n = m.rows();
    let scale = m.max_abs();
    if scale == T::zero() {
        return Some(T::zero());
    }
    // Deterministic start with no special alignment to coordinate axes.
    let mut v: Vec<T> = (0..n).map(|i| T::one() + T::lit(0.37) * T::from_usize_lossy(i + 1).sin()).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x = *x / nv);
    let tol = T::epsilon().sqrt() * T::lit(1e-2);
    for _ in 0..POWER_MAX_ITERS {
        let w = m.apply(&v);
        let nw = norm2(&w);
        if nw == T::zero() || !nw.is_finite() {
            return None;
        }
        let rayleigh = dot(&v, &w);
        let residual: T = w.iter().zip(&v).map(|(&wi, &vi)| (wi - rayleigh * vi).powi(2)).sum::<T>().sqrt();
        if residual <= tol * scale * T::from_usize_lossy(n) && rayleigh.abs() > tol * scale {
            return Some(rayleigh.abs());
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    None
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    if !a.is_square() || a.rows() != b.len() {
        return Err(Error::Dimension("solve needs square A and matching b".into()));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = a.max_abs();
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| m[(i, k)].abs().partial_cmp(&m[(j, k)].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(k);
        if m[(piv, k)].abs() <= T::epsilon() * scale {
            return Err(Error::Input("singular matrix in solve".into()));
        }
        if piv != k {
            for j in 0..n {
                let tmp = m[(k, j)];
                m[(k, j)] = m[(piv, j)];
                m[(piv, j)] = tmp;
            }
            x.swap(k, piv);
        }
        for i in (k + 1)..n {
            let f = m[(i, k)] / m[(k, k)];
            if f == T::zero() {
                continue;
            }
            for j in k..n {
                m[(i, j)] = m[(i, j)] - f * m[(k, j)];
            }
            x[i] = x[i] - f * x[k];
        }
    }
    for k in (0..n).rev() {
        let s: T = ((k + 1)..n).map(|j| m[(k, j)] * x[j]).sum();
        x[k] = (x[k] - s) / m[(k, k)];
    }
    Ok(x)
}

/// Unit eigenvectors for the real eigenvalues of a general matrix, by
/// inverse iteration with a slightly perturbed shift.
pub fn real_eigenvectors<T: Scalar>(m: &Matrix<T>) -> Result<Vec<(T, Vec<T>)>> {
    let n = m.rows();
    let eig = eigenvalues(m)?;
    let scale = m.max_abs().max(T::epsilon());
    let mut out = Vec::new();
    for e in eig {
        if e.im.abs() > T::lit(1e-9) * scale {
            continue;
        }
        let shift = e.re + T::lit(1e-10) * scale;
        let mut shifted = m.clone();
        for i in 0..n {
            shifted[(i, i)] = shifted[(i, i)] - shift;
        }
        let mut v: Vec<T> = (0..n).map(|i| T::one() + T::lit(0.29) * T::from_usize_lossy(i + 3).cos()).collect();
        let mut ok = true;
        for _ in 0..4 {
            match solve(&shifted, &v) {
                Ok(w) => {
                    let nw = norm2(&w);
                    if nw == T::zero() || !nw.is_finite() {
                        ok = false;
                        break;
                    }
                    v = w.into_iter().map(|x| x / nw).collect();
                }
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            out.push((e.re, v));
        }
    }
    Ok(out)
}

/// Thin QR of a tall frame by modified Gram-Schmidt with one
/// re-orthogonalisation pass. Returns `(Q, diag(R))`.
pub fn qr_frame<T: Scalar>(frame: &Matrix<T>) -> (Matrix<T>, Vec<T>) {
    let (n, k) = (frame.rows(), frame.cols());
    let mut q: Vec<Vec<T>> = Vec::with_capacity(k);
    let mut diag = Vec::with_capacity(k);
    for j in 0..k {
        let mut v = frame.column(j);
        for _ in 0..2 {
            for qi in &q {
                let proj = dot(qi, &v);
                for (vk, &qk) in v.iter_mut().zip(qi) {
                    *vk = *vk - proj * qk;
                }
            }
        }
        let r = norm2(&v);
        if r > T::zero() {
            v.iter_mut().for_each(|x| *x = *x / r);
        }
        diag.push(r);
        q.push(v);
    }
    let qm = Matrix::from_columns(&q, n).expect("consistent frame");
    (qm, diag)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> Matrix<f64> {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn spectral_radius_examples() {
        assert_eq!(spectral_radius(&Matrix::<f64>::identity(3)).unwrap(), 1.0);
        assert_eq!(spectral_radius(&Matrix::from_diag(&[3.0, -5.0])).unwrap(), 5.0);
        assert_eq!(spectral_radius(&m(&[vec![0.0, 1.0], vec![0.0, 0.0]])).unwrap(), 0.0);
    }

    #[test]
    fn spectral_radius_rejects_non_square() {
        let r = spectral_radius(&Matrix::<f64>::zeros(2, 3));
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn spectral_radius_complex_pair() {
        // rotation by 90 degrees scaled by 2: eigenvalues ±2i
        let r = spectral_radius(&m(&[vec![0.0, -2.0], vec![2.0, 0.0]])).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sym_eigen_examples() {
        let e = sym_eigen(&Matrix::from_diag(&[2.0, 0.0])).unwrap();
        assert_eq!(e.values, vec![0.0, 2.0]);

        let e = sym_eigen(&m(&[vec![2.0, 2.0], vec![2.0, 2.0]])).unwrap();
        assert!(e.values[0].abs() < 1e-14 && (e.values[1] - 4.0).abs() < 1e-14);
        let k = e.vector(0);
        assert!((k[0] + k[1]).abs() < 1e-14, "kernel direction ∝ (1,-1): {k:?}");

        let e = sym_eigen(&m(&[vec![-7.5]])).unwrap();
        assert_eq!(e.values, vec![-7.5]);
    }

    #[test]
    fn sym_eigen_rejects_asymmetric() {
        let r = sym_eigen(&m(&[vec![1.0, 2.0], vec![0.0, 1.0]]));
        assert!(matches!(r, Err(Error::Input(_))));
    }

    #[test]
    fn general_eigenvalues_of_companion() {
        // x^3 - 6x^2 + 11x - 6 = (x-1)(x-2)(x-3)
        let c = m(&[vec![6.0, -11.0, 6.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let mut ev: Vec<f64> = eigenvalues(&c).unwrap().iter().map(|e| e.re).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_values_detect_rank_deficiency() {
        let a = m(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]);
        let sv = singular_values(&a);
        assert!(sv[1] < 1e-14 * sv[0]);
    }

    #[test]
    fn solve_small_system() {
        let a = m(&[vec![4.0, 1.0], vec![2.0, 3.0]]);
        let x = solve(&a, &[1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        assert!((2.0 * x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn works_in_single_precision() {
        let e = sym_eigen(&Matrix::<f32>::from_rows(&[vec![2.0, 2.0], vec![2.0, 2.0]]).unwrap()).unwrap();
        assert!((e.values[1] - 4.0).abs() < 1e-5);
        assert!((spectral_radius(&Matrix::<f32>::from_diag(&[3.0, -5.0])).unwrap() - 5.0).abs() < 1e-6);
    }
}
