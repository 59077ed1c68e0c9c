use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::fields::{NetworkField, ScalarField};
use super::search::{classify_function, BoxDomain, FunctionClass, SearchParams};
use crate::networks::{
    classify_fnn, is_rank_deficient, Activation, ArchClass, BuiltinField, MlpLayer, MlpSpec,
    NetworkSpec, NeuralOdeSpec,
};
use crate::numerics::{Matrix, SeededRng};
use crate::{Error, Result};

/// Architecture family from which random networks are drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum ArchSample {
    /// MLP with widths `dims`; each layer's inner width equals its output width.
    Mlp { dims: Vec<usize>, activation: Activation },
    /// Neural ODE `ℝ^d → ℝ` through `ℝ^m` with a random `tanh-net` field.
    /// `degenerate` forces `W̃ = 0`.
    Node { d: usize, m: usize, t_end: f64, steps: usize, degenerate: bool },
}

/// Row of the architecture/class table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TableRow {
    NonAugmented,
    Augmented,
    Degenerate,
}

impl TableRow {
    /// Classes the row allows.
    pub fn allows(&self, class: FunctionClass) -> bool {
        match self {
            Self::NonAugmented => class == FunctionClass::C1,
            Self::Augmented => matches!(class, FunctionClass::C1 | FunctionClass::C2),
            Self::Degenerate => matches!(class, FunctionClass::C1 | FunctionClass::C3),
        }
    }

    fn arch(&self) -> ArchClass {
        match self {
            Self::NonAugmented => ArchClass::NonAugmented,
            Self::Augmented => ArchClass::Augmented,
            Self::Degenerate => ArchClass::Degenerate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSummary {
    pub row: TableRow,
    pub trials: usize,
    /// Samples whose class the row allows.
    pub passed: usize,
    pub c1: usize,
    pub c2: usize,
    pub c3: usize,
    pub inconclusive: usize,
    /// `(trial, class)` for every sample outside the row's allowed classes.
    pub violations: Vec<(usize, FunctionClass)>,
}

impl RowSummary {
    pub fn all_passed(&self) -> bool {
        self.passed == self.trials
    }
}

fn gaussian(rows: usize, cols: usize, sd: f64, rng: &mut SeededRng) -> Matrix<f64> {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| sd * rng.normal()).collect()).expect("shape matches data")
}

fn full_rank_gaussian(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix<f64> {
    let sd = 1.0 / (cols as f64).sqrt();
    loop {
        let m = gaussian(rows, cols, sd, rng);
        if !is_rank_deficient(&m) {
            return m;
        }
    }
}

fn sample_mlp(dims: &[usize], activation: Activation, rng: &mut SeededRng) -> Result<MlpSpec<f64>> {
    let layers = dims
        .windows(2)
        .map(|w| {
            let (din, dout) = (w[0], w[1]);
            let wm = full_rank_gaussian(dout, din, rng);
            let b = (0..dout).map(|_| 0.5 * rng.normal()).collect();
            let wt = full_rank_gaussian(dout, dout, rng);
            let bt = (0..dout).map(|_| 0.5 * rng.normal()).collect();
            MlpLayer::new(wm, b, wt, bt, activation)
        })
        .collect();
    MlpSpec::new(layers)
}

fn sample_node(d: usize, m: usize, t_end: f64, steps: usize, degenerate: bool, rng: &mut SeededRng) -> Result<NeuralOdeSpec<f64>> {
    let w = full_rank_gaussian(m, d, rng);
    let b = (0..m).map(|_| 0.5 * rng.normal()).collect();
    let w_tilde = if degenerate { Matrix::zeros(1, m) } else { full_rank_gaussian(1, m, rng) };
    let id = format!("tanh-net:{}", rng.next_u64());
    let field = BuiltinField::<f64>::from_id(&id, m)?;
    let mut spec = NeuralOdeSpec::new(w, b, w_tilde, vec![0.0], Arc::new(field), t_end, steps)?;
    spec.field_id = Some(id);
    Ok(spec)
}

/// Draws `trials` random networks from `sample`, classifies each on
/// `[−radius, radius]^d` and checks the classes against `row`.
///
/// The architecture must belong to the row and have a scalar output.
pub fn verify_classification_row(
    sample: &ArchSample,
    row: TableRow,
    rng: &mut SeededRng,
    trials: usize,
    radius: f64,
    params: &SearchParams,
) -> Result<RowSummary> {
    let (d, arch) = match sample {
        ArchSample::Mlp { dims, .. } => {
            if dims.last() != Some(&1) {
                return Err(Error::Unsupported("classification needs a scalar output (q = 1)".into()));
            }
            (dims[0], classify_fnn(dims)?)
        }
        ArchSample::Node { d, m, degenerate, .. } => {
            let arch = if *degenerate {
                ArchClass::Degenerate
            } else if *m > (*d).max(1) {
                ArchClass::Augmented
            } else {
                ArchClass::NonAugmented
            };
            (*d, arch)
        }
    };
    if arch != row.arch() {
        return Err(Error::Input(format!("architecture is {arch:?}, not in row {row:?}")));
    }
    let domain = BoxDomain::cube(d, radius);
    let mut summary = RowSummary { row, trials, passed: 0, c1: 0, c2: 0, c3: 0, inconclusive: 0, violations: Vec::new() };
    for trial in 0..trials {
        let mut draw_rng = rng.child(trial as u64);
        let field: Box<dyn ScalarField<f64>> = match sample {
            ArchSample::Mlp { dims, activation } => Box::new(sample_mlp(dims, *activation, &mut draw_rng)?),
            ArchSample::Node { d, m, t_end, steps, degenerate } => {
                Box::new(NetworkField(NetworkSpec::Node(sample_node(*d, *m, *t_end, *steps, *degenerate, &mut draw_rng)?)))
            }
        };
        let report = classify_function(field.as_ref(), &domain, params, &mut draw_rng)?;
        match report.verdict {
            FunctionClass::C1 => summary.c1 += 1,
            FunctionClass::C2 => summary.c2 += 1,
            FunctionClass::C3 => summary.c3 += 1,
            FunctionClass::Inconclusive => summary.inconclusive += 1,
        }
        if row.allows(report.verdict) {
            summary.passed += 1;
        } else {
            summary.violations.push((trial, report.verdict));
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_output_required() {
        let s = ArchSample::Mlp { dims: vec![3, 2], activation: Activation::Tanh };
        let e = verify_classification_row(&s, TableRow::NonAugmented, &mut SeededRng::new(0), 1, 1.0, &SearchParams::default());
        assert!(matches!(e, Err(Error::Unsupported(_))));
    }

    #[test]
    fn row_must_match_architecture() {
        let s = ArchSample::Mlp { dims: vec![1, 3, 1], activation: Activation::Tanh };
        assert!(verify_classification_row(&s, TableRow::NonAugmented, &mut SeededRng::new(0), 1, 1.0, &SearchParams::default()).is_err());
    }

    #[test]
    fn degenerate_node_is_c3() {
        let s = ArchSample::Node { d: 2, m: 2, t_end: 1.0, steps: 10, degenerate: true };
        let r = verify_classification_row(&s, TableRow::Degenerate, &mut SeededRng::new(1), 2, 1.0, &SearchParams::default()).unwrap();
        assert!(r.all_passed());
        assert_eq!(r.c3, 2);
    }
}
