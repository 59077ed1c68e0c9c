use serde::{Deserialize, Serialize};

use super::descent::ON_MANIFOLD_TOL;
use super::model::{hessian, LossModel, Regime};
use crate::numerics::{condition_number, norm2, real_eigenvectors, sym_eigen, Matrix, Scalar, SeededRng};
use crate::{Error, Result};

/// Verdicts within this distance of `2/η` are reported as `Edge`.
pub const EDGE_BAND: f64 = 1e-9;

/// Relative eigenvalue threshold separating tangent from normal directions.
pub const DEFAULT_RANK_TOL: f64 = 1e-6;

/// Condition numbers at or above this count as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldSplit<T: Scalar> {
    /// Orthonormal columns spanning the Hessian kernel.
    pub tangent: Matrix<T>,
    /// Orthonormal columns spanning the Hessian image.
    pub normal: Matrix<T>,
    /// Hessian eigenvalues, ascending.
    pub eigenvalues: Vec<T>,
    /// `D − qN` in the overparameterized regime.
    pub expected_tangent_dim: Option<usize>,
    /// The measured tangent dimension differs from the expected one.
    pub dim_mismatch: bool,
    /// The Hessian vanishes, so every direction is tangent.
    pub zero_hessian: bool,
}

impl<T: Scalar> ManifoldSplit<T> {
    pub fn tangent_dim(&self) -> usize {
        self.tangent.cols()
    }

    pub fn normal_dim(&self) -> usize {
        self.normal.cols()
    }
}

/// Eigen-split of the loss Hessian at an interpolating point.
pub fn tangent_normal_split<T: Scalar>(model: &LossModel<T>, theta: &[T], rank_tol: f64) -> Result<ManifoldSplit<T>> {
    let residual = model.interpolation_residual(theta)?;
    if residual.as_f64() > ON_MANIFOLD_TOL {
        return Err(Error::Input(format!("θ is not interpolating (residual {residual})")));
    }
    let h = hessian(model, theta)?;
    let eig = sym_eigen(&h)?;
    let dd = h.rows();
    let max = eig.values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let cut = T::lit(rank_tol) * max;
    let zero_hessian = max == T::zero();
    let (mut tan, mut nor) = (Vec::new(), Vec::new());
    for (k, &v) in eig.values.iter().enumerate() {
        if zero_hessian || v.abs() <= cut {
            tan.push(eig.vector(k));
        } else {
            nor.push(eig.vector(k));
        }
    }
    let expected = (model.regime() == Regime::Overparameterized).then(|| dd - model.constraint_count());
    let dim_mismatch = expected.is_some_and(|e| e != tan.len());
    Ok(ManifoldSplit {
        tangent: Matrix::from_columns(&tan, dd)?,
        normal: Matrix::from_columns(&nor, dd)?,
        eigenvalues: eig.values,
        expected_tangent_dim: expected,
        dim_mismatch,
        zero_hessian,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityVerdict {
    Stable,
    Edge,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport<T> {
    pub sharpness: T,
    pub threshold: T,
    pub verdict: StabilityVerdict,
    pub hessian_eigenvalues: Vec<T>,
}

impl<T: Scalar> SpectralReport<T> {
    /// Strict `sharpness < 2/η`.
    pub fn gd_stable(&self) -> bool {
        self.sharpness < self.threshold
    }
}

/// Compares the largest Hessian eigenvalue with `2/η`.
pub fn spectral_stability<T: Scalar>(model: &LossModel<T>, theta: &[T], eta: f64) -> Result<SpectralReport<T>> {
    if !(eta > 0.0) {
        return Err(Error::Input("learning rate must be positive".into()));
    }
    let eig = sym_eigen(&hessian(model, theta)?)?;
    let sharpness = *eig.values.last().expect("nonempty spectrum");
    let threshold = T::lit(2.0 / eta);
    let verdict = if (sharpness - threshold).abs().as_f64() <= EDGE_BAND {
        StabilityVerdict::Edge
    } else if sharpness < threshold {
        StabilityVerdict::Stable
    } else {
        StabilityVerdict::Unstable
    };
    Ok(SpectralReport { sharpness, threshold, verdict, hessian_eigenvalues: eig.values })
}

/// Normal-space batch Jacobians with their batches; all batches are
/// equally likely.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchJacobians<T: Scalar> {
    pub batches: Vec<Vec<usize>>,
    pub matrices: Vec<Matrix<T>>,
    /// All `C(N, B)` batches were enumerated.
    pub exhaustive: bool,
}

/// Batches are enumerated when there are at most this many.
pub const MAX_ENUMERATED_BATCHES: u64 = 10_000;

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut c: u64 = 1;
    for i in 0..k {
        c = c.saturating_mul((n - i) as u64) / (i as u64 + 1);
        if c > MAX_ENUMERATED_BATCHES * 10 {
            return u64::MAX;
        }
    }
    c
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else { break };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}

/// `A_Ξ = I − η Nᵀ Hess L_Ξ(θ*) N` in the orthonormal normal basis `N`.
/// Enumerates every `B`-subset when there are at most
/// [`MAX_ENUMERATED_BATCHES`], otherwise draws that many from `rng`.
pub fn batch_normal_jacobians<T: Scalar>(
    model: &LossModel<T>,
    theta: &[T],
    eta: f64,
    batch_size: usize,
    normal: &Matrix<T>,
    rng: &mut SeededRng,
) -> Result<BatchJacobians<T>> {
    let n = model.data().len();
    if batch_size == 0 || batch_size > n {
        return Err(Error::Input(format!("batch size must lie in 1..={n}")));
    }
    if normal.rows() != model.param_dim() {
        return Err(Error::Dimension("normal basis must have D rows".into()));
    }
    let exhaustive = binomial(n, batch_size) <= MAX_ENUMERATED_BATCHES;
    let batches = if exhaustive {
        combinations(n, batch_size)
    } else {
        (0..MAX_ENUMERATED_BATCHES)
            .map(|_| {
                let mut b = rng.subset(n, batch_size);
                b.sort_unstable();
                b
            })
            .collect()
    };
    let r = normal.cols();
    let nt = normal.transpose();
    let eta = T::lit(eta);
    let matrices = batches
        .iter()
        .map(|b| {
            let h = model.batch_hessian(theta, b)?;
            let restricted = nt.matmul(&h.matmul(normal)?)?;
            Matrix::<T>::identity(r).sub(&restricted.scale(eta))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchJacobians { batches, matrices, exhaustive })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    /// `A_Ξ` invertible, per matrix.
    pub invertible: Vec<bool>,
    /// `I − A_Ξ` invertible, per matrix.
    pub complement_invertible: Vec<bool>,
    /// Every matrix and complement is invertible.
    pub regular: bool,
    /// Heuristic verdict on strong irreducibility; indicative only.
    pub irreducible_indicative: bool,
}

const DIRECTION_TOL: f64 = 1e-6;

fn same_direction(a: &[f64], b: &[f64]) -> bool {
    let c: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    c.abs() > 1.0 - DIRECTION_TOL
}

fn words(mats: &[Matrix<f64>], rng: &mut SeededRng) -> Result<Vec<Matrix<f64>>> {
    const WORD_BUDGET: usize = 200;
    let mut out: Vec<Matrix<f64>> = mats.to_vec();
    let all_short = mats.len() * mats.len() * (1 + mats.len()) <= WORD_BUDGET;
    if all_short {
        for a in mats {
            for b in mats {
                let ab = a.matmul(b)?;
                for c in mats {
                    out.push(ab.matmul(c)?);
                }
                out.push(ab);
            }
        }
    } else {
        for _ in 0..WORD_BUDGET {
            let len = 2 + rng.below(2);
            let mut w = mats[rng.below(mats.len())].clone();
            for _ in 1..len {
                w = w.matmul(&mats[rng.below(mats.len())])?;
            }
            out.push(w);
        }
    }
    Ok(out)
}

/// Invertibility flags by condition number, plus an eigenvector-clustering
/// heuristic for strong irreducibility over words of length ≤ 3.
///
/// The heuristic collects the real eigen-directions of the words and fails
/// when some nonempty subset of them is mapped into itself by every
/// generator, i.e. a finite union of lines is invariant. It only looks at
/// lines, so invariant planes in dimension ≥ 3 go unnoticed.
pub fn regularity_check<T: Scalar>(matrices: &[Matrix<T>], rng: &mut SeededRng) -> Result<RegularityReport> {
    let Some(first) = matrices.first() else { return Err(Error::Input("need at least one matrix".into())) };
    let dim = first.rows();
    if matrices.iter().any(|m| m.rows() != dim || m.cols() != dim) {
        return Err(Error::Dimension("matrices must be square of equal size".into()));
    }
    let mats: Vec<Matrix<f64>> = matrices.iter().map(|m| m.cast()).collect();
    let invertible_f = |m: &Matrix<f64>| condition_number(m) < CONDITION_LIMIT;
    let invertible: Vec<bool> = mats.iter().map(invertible_f).collect();
    let complement_invertible: Vec<bool> =
        mats.iter().map(|m| invertible_f(&Matrix::identity(dim).sub(m).expect("same shape"))).collect();
    let regular = invertible.iter().chain(&complement_invertible).all(|&b| b);

    let irreducible_indicative = if dim == 1 {
        true
    } else {
        let mut clusters: Vec<Vec<f64>> = Vec::new();
        for w in words(&mats, rng)? {
            for (_, v) in real_eigenvectors(&w)? {
                if !clusters.iter().any(|c| same_direction(c, &v)) {
                    clusters.push(v);
                }
            }
        }
        // prune lines that some generator sends outside the remaining set
        let mut keep = vec![true; clusters.len()];
        loop {
            let mut changed = false;
            for i in 0..clusters.len() {
                if !keep[i] {
                    continue;
                }
                let escapes = mats.iter().any(|m| {
                    let img = m.matvec(&clusters[i]).expect("square shapes");
                    let n = norm2(&img);
                    if n <= 1e-12 * m.max_abs() {
                        return false;
                    }
                    let img: Vec<f64> = img.iter().map(|x| x / n).collect();
                    !clusters.iter().zip(&keep).any(|(c, &k)| k && same_direction(c, &img))
                });
                if escapes {
                    keep[i] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        !keep.iter().any(|&k| k)
    };
    Ok(RegularityReport { invertible, complement_invertible, regular, irreducible_indicative })
}
