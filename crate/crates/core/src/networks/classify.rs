use serde::{Deserialize, Serialize};

use crate::numerics::{singular_values, Matrix, Scalar};
use crate::{Error, Result};

/// Architecture class. Feed-forward networks are `NonAugmented`,
/// `Augmented` or `Bottleneck`; neural ODEs/DDEs are `NonAugmented`,
/// `Augmented` or `Degenerate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArchClass {
    NonAugmented,
    Augmented,
    Bottleneck,
    Degenerate,
}

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-10;

/// `d_{l-1} ≥ d_l` for every layer.
pub fn is_non_augmented(dims: &[usize]) -> bool {
    dims.windows(2).all(|w| w[0] >= w[1])
}

/// Some maximal layer is wider than the input, widths never shrink before
/// it and never grow after it. Plateaus at the maximum are allowed.
pub fn is_augmented(dims: &[usize]) -> bool {
    let Some(&max) = dims.iter().max() else { return false };
    if max <= dims[0] {
        return false;
    }
    let peak = dims.iter().position(|&d| d == max).expect("max is present");
    dims[..=peak].windows(2).all(|w| w[0] <= w[1]) && dims[peak..].windows(2).all(|w| w[0] >= w[1])
}

/// Some layer is strictly narrower than an earlier and a later layer.
pub fn has_bottleneck(dims: &[usize]) -> bool {
    (1..dims.len().saturating_sub(1)).any(|b| {
        let before = dims[..b].iter().any(|&d| d > dims[b]);
        let after = dims[b + 1..].iter().any(|&d| d > dims[b]);
        before && after
    })
}

/// Classifies a feed-forward network from its layer widths `d_0, …, d_L`.
pub fn classify_fnn(dims: &[usize]) -> Result<ArchClass> {
    if dims.len() < 2 {
        return Err(Error::Input("need at least an input and an output width".into()));
    }
    if dims.contains(&0) {
        return Err(Error::Input("layer widths must be at least 1".into()));
    }
    Ok(if is_non_augmented(dims) {
        ArchClass::NonAugmented
    } else if is_augmented(dims) {
        ArchClass::Augmented
    } else {
        ArchClass::Bottleneck
    })
}

/// Rank deficiency test: smallest singular value below `RANK_TOL` times the largest.
pub fn is_rank_deficient<T: Scalar>(m: &Matrix<T>) -> bool {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) => hi == T::zero() || lo < T::lit(RANK_TOL) * hi,
        _ => true,
    }
}

/// Classifies a neural ODE/DDE with lift `W` (m×d) and projection `W̃` (q×m).
pub fn classify_ode_arch<T: Scalar>(d: usize, m: usize, q: usize, w: &Matrix<T>, w_tilde: &Matrix<T>) -> Result<ArchClass> {
    if w.rows() != m || w.cols() != d {
        return Err(Error::Structural { layer: 0, message: format!("W must be {m}x{d}, got {}x{}", w.rows(), w.cols()) });
    }
    if w_tilde.rows() != q || w_tilde.cols() != m {
        return Err(Error::Structural {
            layer: 1,
            message: format!("W̃ must be {q}x{m}, got {}x{}", w_tilde.rows(), w_tilde.cols()),
        });
    }
    Ok(if is_rank_deficient(w) || is_rank_deficient(w_tilde) {
        ArchClass::Degenerate
    } else if m > d.max(q) {
        ArchClass::Augmented
    } else {
        ArchClass::NonAugmented
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_examples() {
        assert_eq!(classify_fnn(&[5, 4, 3, 2, 1]).unwrap(), ArchClass::NonAugmented);
        assert_eq!(classify_fnn(&[2, 4, 4, 1]).unwrap(), ArchClass::Augmented);
        assert_eq!(classify_fnn(&[2, 3, 1, 3, 1]).unwrap(), ArchClass::Bottleneck);
    }

    #[test]
    fn short_list_rejected() {
        assert!(classify_fnn(&[3]).is_err());
        assert!(classify_fnn(&[3, 0]).is_err());
    }

    fn full_rank(r: usize, c: usize) -> Matrix<f64> {
        let mut m = Matrix::zeros(r, c);
        for i in 0..r {
            for j in 0..c {
                m[(i, j)] = ((i * 7 + j * 3 + 1) as f64).sin() + if i == j { 2.0 } else { 0.0 };
            }
        }
        m
    }

    #[test]
    fn ode_examples() {
        assert_eq!(classify_ode_arch(4, 3, 1, &full_rank(3, 4), &full_rank(1, 3)).unwrap(), ArchClass::NonAugmented);
        assert_eq!(classify_ode_arch(3, 6, 2, &full_rank(6, 3), &full_rank(2, 6)).unwrap(), ArchClass::Augmented);
        let mut w = full_rank(3, 4);
        for j in 0..4 {
            w[(1, j)] = 0.0;
        }
        assert_eq!(classify_ode_arch(4, 3, 1, &w, &full_rank(1, 3)).unwrap(), ArchClass::Degenerate);
        assert!(classify_ode_arch(4, 3, 1, &full_rank(4, 3), &full_rank(1, 3)).is_err());
    }
}
