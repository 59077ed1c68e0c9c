use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fields::ScalarField;
use crate::numerics::{norm2, sym_eigen, Scalar, SeededRng};
use crate::table::{Cell, Table};
use crate::{Error, Result};

const MAX_NEWTON_ITERS: usize = 200;
const MAX_HALVINGS: usize = 40;
const GRID_BUDGET: f64 = 4096.0;

/// Axis-aligned search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Dimension("box bounds must have equal nonzero length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::Input("box must have lo < hi in every coordinate".into()));
        }
        Ok(Self { lo, hi })
    }

    /// `[−r, r]^d`
    pub fn cube(d: usize, r: f64) -> Self {
        Self { lo: vec![-r; d], hi: vec![r; d] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&a, &b))| {
            let pad = slack * (b - a);
            v >= a - pad && v <= b + pad
        })
    }
}

/// Search and classification tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub starts: usize,
    pub grad_tol: f64,
    /// Relative threshold on `min |λ|` for degeneracy.
    pub degen_tol: f64,
    pub merge_radius: f64,
    pub grad_floor: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self { starts: 64, grad_tol: 1e-8, degen_tol: 1e-6, merge_radius: 1e-4, grad_floor: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub gradient_norm: f64,
    /// Hessian eigenvalues, ascending.
    pub hessian_eigenvalues: Vec<f64>,
    pub min_abs_eigenvalue: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointSearch {
    /// Distinct critical points, sorted lexicographically by location.
    pub points: Vec<CriticalPoint>,
    /// Starts that did not converge inside the box.
    pub dropped: usize,
    /// Largest Hessian eigenvalue modulus seen at the starts; the scale
    /// against which degeneracy is judged.
    pub hessian_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FunctionClass {
    C1,
    C2,
    C3,
    Inconclusive,
}

impl std::fmt::Display for FunctionClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::C1 => "C1",
            Self::C2 => "C2",
            Self::C3 => "C3",
            Self::Inconclusive => "Inconclusive",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionClassReport {
    pub verdict: FunctionClass,
    pub critical_points: Vec<CriticalPoint>,
    pub search_domain: BoxDomain,
    pub params: SearchParams,
    /// Smallest gradient norm over the dense grid.
    pub grid_min_gradient: f64,
    pub dropped_starts: usize,
}

impl FunctionClassReport {
    /// One row per critical point followed by a summary row.
    ///
    /// Columns: `row_type,x_1..x_d,gradient_norm,min_abs_eig,degenerate,verdict`.
    /// The summary row carries the grid minimum of the gradient norm.
    pub fn to_table(&self) -> Table {
        let d = self.search_domain.dim();
        let mut headers = vec!["row_type".to_string()];
        headers.extend((1..=d).map(|i| format!("x_{i}")));
        headers.extend(["gradient_norm", "min_abs_eig", "degenerate", "verdict"].map(String::from));
        let mut t = Table::new(headers);
        for p in &self.critical_points {
            let mut row = vec![Cell::from("critical_point")];
            row.extend(p.location.iter().map(|&x| Cell::from(x)));
            row.extend([Cell::from(p.gradient_norm), Cell::from(p.min_abs_eigenvalue), Cell::from(p.degenerate), Cell::Empty]);
            t.push(row).expect("row width matches");
        }
        let mut row = vec![Cell::from("summary")];
        row.extend((0..d).map(|_| Cell::Empty));
        row.extend([
            Cell::from(self.grid_min_gradient),
            Cell::Empty,
            Cell::from(self.critical_points.iter().filter(|p| p.degenerate).count()),
            Cell::from(self.verdict.to_string()),
        ]);
        t.push(row).expect("row width matches");
        t
    }
}

/// Halton point `index` in `[0,1)^d` (prime bases).
fn halton(index: usize, d: usize) -> Vec<f64> {
    const PRIMES: [usize; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    (0..d)
        .map(|k| {
            let base = PRIMES[k % PRIMES.len()];
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = index + 1;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        })
        .collect()
}

struct NewtonOutcome {
    point: Option<Vec<f64>>,
    start_scale: f64,
}

fn to_t<T: Scalar>(x: &[f64]) -> Vec<T> {
    x.iter().map(|&v| T::lit(v)).collect()
}

fn to_f64<T: Scalar>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.as_f64()).collect()
}

fn grad_norm<T: Scalar>(field: &dyn ScalarField<T>, x: &[f64]) -> Option<(Vec<f64>, f64)> {
    let g = to_f64(&field.gradient(&to_t::<T>(x)).ok()?);
    let n = norm2(&g);
    n.is_finite().then_some((g, n))
}

/// Damped Newton on `∇Ψ = 0`, accepting only steps that shrink `‖∇Ψ‖`.
/// Once below `grad_tol` it keeps polishing while the norm still decreases,
/// so that slowly converging degenerate points are located accurately.
fn newton<T: Scalar>(field: &dyn ScalarField<T>, start: Vec<f64>, domain: &BoxDomain, grad_tol: f64) -> NewtonOutcome {
    let mut x = start;
    let mut start_scale = 0.0;
    let Some((mut g, mut gn)) = grad_norm(field, &x) else { return NewtonOutcome { point: None, start_scale } };
    for iter in 0..MAX_NEWTON_ITERS {
        if gn == 0.0 {
            break;
        }
        let Ok(h) = field.hessian(&to_t::<T>(&x)) else { break };
        let h = h.cast::<f64>();
        let Ok(eig) = sym_eigen(&h) else { break };
        let lam_max = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if iter == 0 {
            start_scale = lam_max;
        }
        let floor = 1e-14 * lam_max.max(1e-300);
        let mut step = vec![0.0; x.len()];
        for (k, &lam) in eig.values.iter().enumerate() {
            let v = eig.vector(k);
            let c: f64 = v.iter().zip(&g).map(|(a, b)| a * b).sum();
            let coef = if lam.abs() > floor { -c / lam } else { -c };
            for (s, vi) in step.iter_mut().zip(&v) {
                *s += coef * vi;
            }
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + alpha * s).collect();
            if let Some((tg, tn)) = grad_norm(field, &trial) {
                if tn < gn {
                    accepted = Some((trial, tg, tn));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((nx, ng, nn)) = accepted else { break };
        x = nx;
        g = ng;
        gn = nn;
        if !domain.contains(&x, 0.5) {
            return NewtonOutcome { point: None, start_scale };
        }
    }
    let point = (gn <= grad_tol && domain.contains(&x, 0.0)).then_some(x);
    NewtonOutcome { point, start_scale }
}

/// Multi-start damped Newton search for critical points inside `domain`.
///
/// Starts lie on a Halton grid shifted by a random offset drawn from `rng`.
/// Converged points are merged within `merge_radius` and returned sorted by
/// location, independent of scheduling.
pub fn find_critical_points<T: Scalar>(
    field: &dyn ScalarField<T>,
    domain: &BoxDomain,
    params: &SearchParams,
    rng: &mut SeededRng,
) -> Result<CriticalPointSearch> {
    let d = domain.dim();
    if field.dim() != d {
        return Err(Error::Dimension(format!("field has dimension {} but the box has {d}", field.dim())));
    }
    if params.starts == 0 {
        return Err(Error::Input("need at least one start".into()));
    }
    let shift: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
    let starts: Vec<Vec<f64>> = (0..params.starts)
        .map(|i| {
            halton(i, d)
                .iter()
                .zip(&shift)
                .enumerate()
                .map(|(k, (&u, &s))| domain.lo[k] + (u + s).fract() * (domain.hi[k] - domain.lo[k]))
                .collect()
        })
        .collect();
    let outcomes: Vec<NewtonOutcome> = starts.into_par_iter().map(|s| newton(field, s, domain, params.grad_tol)).collect();
    let hessian_scale = outcomes.iter().fold(0.0f64, |m, o| m.max(o.start_scale));
    let mut found: Vec<Vec<f64>> = outcomes.iter().filter_map(|o| o.point.clone()).collect();
    let dropped = params.starts - found.len();
    found.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));

    let mut points: Vec<CriticalPoint> = Vec::new();
    for x in found {
        let Some((_, gn)) = grad_norm(field, &x) else { continue };
        let merged = points.iter_mut().find(|p| {
            let dist: f64 = p.location.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            dist <= params.merge_radius
        });
        if let Some(p) = merged {
            if gn < p.gradient_norm {
                p.location = x;
                p.gradient_norm = gn;
            }
            continue;
        }
        points.push(CriticalPoint {
            location: x,
            gradient_norm: gn,
            hessian_eigenvalues: Vec::new(),
            min_abs_eigenvalue: 0.0,
            degenerate: false,
        });
    }
    for p in &mut points {
        let h = field.hessian(&to_t::<T>(&p.location))?.cast::<f64>();
        let eig = sym_eigen(&h)?;
        let local = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        p.min_abs_eigenvalue = eig.values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        p.degenerate = p.min_abs_eigenvalue <= params.degen_tol * local.max(hessian_scale);
        p.hessian_eigenvalues = eig.values;
    }
    points.sort_by(|a, b| a.location.partial_cmp(&b.location).unwrap_or(std::cmp::Ordering::Equal));
    Ok(CriticalPointSearch { points, dropped, hessian_scale })
}

fn grid_min_gradient<T: Scalar>(field: &dyn ScalarField<T>, domain: &BoxDomain) -> f64 {
    let d = domain.dim();
    let per_axis = (GRID_BUDGET.powf(1.0 / d as f64).floor() as usize).max(3);
    let total = per_axis.pow(d as u32);
    (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let x: Vec<f64> = (0..d)
                .map(|k| {
                    let i = idx % per_axis;
                    idx /= per_axis;
                    domain.lo[k] + (domain.hi[k] - domain.lo[k]) * i as f64 / (per_axis - 1) as f64
                })
                .collect();
            grad_norm(field, &x).map_or(f64::INFINITY, |(_, n)| n)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Decides the C1/C2/C3 class of a field on a search box.
pub fn classify_function<T: Scalar>(
    field: &dyn ScalarField<T>,
    domain: &BoxDomain,
    params: &SearchParams,
    rng: &mut SeededRng,
) -> Result<FunctionClassReport> {
    let search = find_critical_points(field, domain, params, rng)?;
    let grid_min = grid_min_gradient(field, domain);
    let verdict = if search.points.iter().any(|p| p.degenerate) {
        FunctionClass::C3
    } else if !search.points.is_empty() {
        FunctionClass::C2
    } else if grid_min > params.grad_floor {
        FunctionClass::C1
    } else {
        FunctionClass::Inconclusive
    };
    Ok(FunctionClassReport {
        verdict,
        critical_points: search.points,
        search_domain: domain.clone(),
        params: *params,
        grid_min_gradient: grid_min,
        dropped_starts: search.dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morse::named_field;

    fn classify(id: &str, r: f64) -> FunctionClassReport {
        let f = named_field(id).unwrap();
        let domain = BoxDomain::cube(f.dim(), r);
        classify_function(f.as_ref(), &domain, &SearchParams::default(), &mut SeededRng::new(3)).unwrap()
    }

    #[test]
    fn circle_and_xor() {
        let r = classify("circle", 2.0);
        assert_eq!(r.verdict, FunctionClass::C2);
        assert_eq!(r.critical_points.len(), 1);
        assert!(norm2(&r.critical_points[0].location) < 1e-6);
        assert!(r.critical_points[0].hessian_eigenvalues.iter().all(|&l| (l - 2.0).abs() < 1e-6));

        let r = classify("xor", 2.0);
        assert_eq!(r.critical_points.len(), 1);
        let ev = &r.critical_points[0].hessian_eigenvalues;
        assert!((ev[0] + 2.0).abs() < 1e-6 && (ev[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn one_dimensional_probes() {
        assert_eq!(classify("square", 1.0).verdict, FunctionClass::C2);
        assert_eq!(classify("cube", 1.0).verdict, FunctionClass::C3);
        assert_eq!(classify("tanh", 1.0).verdict, FunctionClass::C1);
        let affine = classify("affine", 2.0);
        assert!(affine.critical_points.is_empty());
        assert_eq!(affine.verdict, FunctionClass::C1);
    }

    #[test]
    fn table_has_summary_row() {
        let t = classify("circle", 2.0).to_table();
        assert_eq!(t.len(), 2);
        assert_eq!(t.headers()[0], "row_type");
    }
}
