use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::numerics::quadrature::gauss_legendre_on;
use crate::numerics::Matrix;
use crate::{Error, Result};

pub const DEFAULT_QUADRATURE_ORDER: usize = 4;

/// Built-in graphon kernels on `[0, 1]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Graphon {
    /// `G ≡ c`.
    Constant { c: f64 },
    /// Ranked attachment `G(x, y) = xy`.
    Product,
    /// `blocks` equal communities, `inside` within and `outside` across.
    Block { blocks: usize, inside: f64, outside: f64 },
}

impl Graphon {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Graphon::Constant { c } => c,
            Graphon::Product => x * y,
            Graphon::Block { blocks, inside, outside } => {
                let b = |z: f64| ((z * blocks as f64) as usize).min(blocks - 1);
                if b(x) == b(y) {
                    inside
                } else {
                    outside
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Graphon::Constant { c } if !c.is_finite() => Err(Error::Config("graphon constant must be finite".into())),
            Graphon::Block { blocks: 0, .. } => Err(Error::Config("block graphon needs at least one block".into())),
            Graphon::Block { inside, outside, .. } if !(inside.is_finite() && outside.is_finite()) => {
                Err(Error::Config("block graphon weights must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Source of the interaction weights `a_ij`.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    Explicit(Matrix<f64>),
    /// Every pair, diagonal included, with weight `c/M` (summed convention).
    AllToAll(f64),
    /// Cell integrals of a graphon over the uniform partition of `[0, 1]`.
    Graphon { graphon: Graphon, order: usize },
}

/// How a graph's weights enter the drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `x_i' = … + Σ_j a_ij g`, with the `1/M` folded into the weights.
    Summed,
    /// `dx_i = … + (1/M) Σ_j a_ij g`; weights are of order one.
    Averaged,
}

impl GraphSpec {
    pub fn graphon(graphon: Graphon) -> Self {
        GraphSpec::Graphon { graphon, order: DEFAULT_QUADRATURE_ORDER }
    }

    /// Weight matrix for `m` vertices under the given convention.
    ///
    /// Explicit matrices are used verbatim. All-to-all gives `c/M` summed or
    /// `c` averaged. A graphon gives `M·∫∫_{I_i×I_j} G` summed, i.e. the cell
    /// average divided by `M`, or the cell average itself when averaged.
    pub fn weights(&self, m: usize, normalization: Normalization) -> Result<Matrix<f64>> {
        if m == 0 {
            return Err(Error::Input("graph needs at least one vertex".into()));
        }
        let mf = m as f64;
        match self {
            GraphSpec::Explicit(a) => {
                if a.rows() != m || a.cols() != m {
                    return Err(Error::Dimension(format!("explicit graph is {}×{}, expected {m}×{m}", a.rows(), a.cols())));
                }
                if !a.data().iter().all(|v| v.is_finite()) {
                    return Err(Error::Input("explicit graph entries must be finite".into()));
                }
                Ok(a.clone())
            }
            GraphSpec::AllToAll(c) => {
                if !c.is_finite() {
                    return Err(Error::Config("all-to-all weight must be finite".into()));
                }
                let w = match normalization {
                    Normalization::Summed => c / mf,
                    Normalization::Averaged => *c,
                };
                Matrix::new(m, m, vec![w; m * m])
            }
            GraphSpec::Graphon { graphon, order } => {
                graphon.validate()?;
                let avg = graphon_cell_averages(graphon, m, *order)?;
                Ok(match normalization {
                    Normalization::Summed => avg.scale(1.0 / mf),
                    Normalization::Averaged => avg,
                })
            }
        }
    }
}

/// `M² ∫∫_{I_i×I_j} G`, by tensor Gauss–Legendre quadrature in each cell.
pub fn graphon_cell_averages(graphon: &Graphon, m: usize, order: usize) -> Result<Matrix<f64>> {
    let h = 1.0 / m as f64;
    let cells: Vec<_> = (0..m).map(|i| gauss_legendre_on(order, i as f64 * h, (i + 1) as f64 * h)).collect::<Result<_>>()?;
    let mut a = Matrix::zeros(m, m);
    for (i, ri) in cells.iter().enumerate() {
        for (j, rj) in cells.iter().enumerate() {
            let mut s = 0.0;
            for (x, wx) in ri.nodes.iter().zip(&ri.weights) {
                for (y, wy) in rj.nodes.iter().zip(&rj.weights) {
                    s += wx * wy * graphon.eval(*x, *y);
                }
            }
            a[(i, j)] = s / (h * h);
        }
    }
    Ok(a)
}

/// Fibre measures of a weighted digraph: vertex cell `i` carries atoms at
/// `j/M` with weights `a_ij / M` (averaged convention).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigraphMeasure {
    pub m: usize,
    /// `fibers[i][j]` is the weight of the atom at `(j+1)/M` in fibre `i`.
    pub fibers: Vec<Vec<f64>>,
}

impl DigraphMeasure {
    /// Index of the cell containing `u`, with `I_1 = [0, 1/M]` and `I_i = ((i−1)/M, i/M]`.
    pub fn cell_of(&self, u: f64) -> usize {
        let k = (u * self.m as f64).ceil() as usize;
        k.clamp(1, self.m) - 1
    }

    pub fn fiber_mass(&self, i: usize) -> f64 {
        self.fibers[i].iter().sum()
    }
}

pub fn digraph_measure_of(graph: &GraphSpec, m: usize) -> Result<DigraphMeasure> {
    let a = graph.weights(m, Normalization::Averaged)?;
    if a.data().iter().any(|&w| w < 0.0) {
        return Err(Error::Input("digraph measures need nonnegative weights".into()));
    }
    let mf = m as f64;
    let fibers = (0..m).map(|i| (0..m).map(|j| a[(i, j)] / mf).collect()).collect();
    Ok(DigraphMeasure { m, fibers })
}

/// Bounded-Lipschitz distance `sup {∫f d(μ−ν) : |f| ≤ 1, Lip f ≤ 1}` between
/// two finite nonnegative atomic measures on `[0, 1]`.
///
/// Test functions are piecewise linear on the union of atom positions (and
/// the interval ends), which loses nothing for atomic measures, so the
/// linear program is exact up to solver tolerance.
pub fn bounded_lipschitz_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64> {
    let mut nodes: Vec<f64> = a.iter().chain(b).map(|p| p.0).chain([0.0, 1.0]).collect();
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let mut w = vec![0.0; nodes.len()];
    let idx = |x: f64| nodes.binary_search_by(|n| n.total_cmp(&x)).expect("atom is a node");
    for &(x, m) in a {
        w[idx(x)] += m;
    }
    for &(x, m) in b {
        w[idx(x)] -= m;
    }
    if w.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = w.iter().map(|&c| lp.add_var(c, (-1.0, 1.0))).collect();
    for k in 0..nodes.len() - 1 {
        let gap = nodes[k + 1] - nodes[k];
        lp.add_constraint([(vars[k + 1], 1.0), (vars[k], -1.0)], ComparisonOp::Le, gap);
        lp.add_constraint([(vars[k + 1], 1.0), (vars[k], -1.0)], ComparisonOp::Ge, -gap);
    }
    let sol = lp.solve().map_err(|e| Error::Evaluation(format!("bounded-Lipschitz program failed: {e}")))?;
    Ok(sol.objective().max(0.0))
}

/// Approximation of `d_∞` between digraph measures: the largest fibre
/// distance over `grid_u` midpoints `u_k = (k + ½)/grid_u`.
pub fn dgm_distance(a: &DigraphMeasure, b: &DigraphMeasure, grid_u: usize) -> Result<f64> {
    if grid_u == 0 {
        return Err(Error::Input("need at least one u-grid point".into()));
    }
    let atoms = |g: &DigraphMeasure, i: usize| -> Vec<(f64, f64)> {
        g.fibers[i].iter().enumerate().filter(|(_, &w)| w != 0.0).map(|(j, &w)| ((j + 1) as f64 / g.m as f64, w)).collect()
    };
    let mut pairs: Vec<(usize, usize)> =
        (0..grid_u).map(|k| (k as f64 + 0.5) / grid_u as f64).map(|u| (a.cell_of(u), b.cell_of(u))).collect();
    pairs.dedup();
    let mut best: f64 = 0.0;
    for (i, j) in pairs {
        best = best.max(bounded_lipschitz_distance(&atoms(a, i), &atoms(b, j))?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_to_all_conventions() {
        let s = GraphSpec::AllToAll(2.0).weights(4, Normalization::Summed).unwrap();
        assert_eq!(s[(1, 2)], 0.5);
        let a = GraphSpec::AllToAll(2.0).weights(4, Normalization::Averaged).unwrap();
        assert_eq!(a[(3, 3)], 2.0);
    }

    #[test]
    fn product_graphon_cells_are_exact() {
        // G = xy is bilinear, so order 1 already integrates it exactly
        let a = graphon_cell_averages(&Graphon::Product, 3, 1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = (i as f64 + 0.5) / 3.0 * (j as f64 + 0.5) / 3.0;
                assert!((a[(i, j)] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn block_graphon_cell_average_straddles_boundary() {
        // M = 3, two blocks: middle cell straddles x = 1/2
        let g = Graphon::Block { blocks: 2, inside: 1.0, outside: 0.0 };
        let a = graphon_cell_averages(&g, 3, 4).unwrap();
        assert!((a[(0, 0)] - 1.0).abs() < 1e-12);
        assert_eq!(a[(0, 2)], 0.0);
        assert!((a[(1, 1)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cells_are_left_closed_at_zero() {
        let d = DigraphMeasure { m: 4, fibers: vec![vec![0.0; 4]; 4] };
        assert_eq!(d.cell_of(0.0), 0);
        assert_eq!(d.cell_of(0.25), 0);
        assert_eq!(d.cell_of(0.2500001), 1);
        assert_eq!(d.cell_of(1.0), 3);
    }

    #[test]
    fn bl_distance_closed_forms() {
        // unit shift by s < 2 between unit atoms costs s
        let d = bounded_lipschitz_distance(&[(0.2, 1.0)], &[(0.5, 1.0)]).unwrap();
        assert!((d - 0.3).abs() < 1e-9);
        // against the zero measure the distance is the mass
        let d = bounded_lipschitz_distance(&[(0.2, 0.4), (0.9, 0.3)], &[]).unwrap();
        assert!((d - 0.7).abs() < 1e-9);
        assert_eq!(bounded_lipschitz_distance(&[(0.1, 1.0)], &[(0.1, 1.0)]).unwrap(), 0.0);
    }
}
