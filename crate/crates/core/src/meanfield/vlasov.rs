use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::model::wrap_angle;
use crate::numerics::quadrature::gauss_legendre_on;
use crate::numerics::SeededRng;
use crate::table::{Cell, Table};
use crate::{Error, Result};

const MASS_TOL: f64 = 1e-9;
/// Courant number enforced at every step.
pub const CFL_NUMBER: f64 = 0.5;

/// Cell averages of phase densities on a periodic grid over `[0, 2π)`, one
/// density per frequency atom `(ω_r, ζ_r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    n_cells: usize,
    frequencies: Vec<(f64, f64)>,
    u: Vec<Vec<f64>>,
}

impl DensityGrid {
    pub fn new(n_cells: usize, frequencies: Vec<(f64, f64)>, u: Vec<Vec<f64>>) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::Input("density grid needs at least two cells".into()));
        }
        if frequencies.is_empty() || frequencies.len() != u.len() {
            return Err(Error::Dimension("need one density per frequency atom".into()));
        }
        if frequencies.iter().any(|&(w, z)| !w.is_finite() || !(z >= 0.0) || !z.is_finite()) {
            return Err(Error::Input("frequencies must be finite with nonnegative weights".into()));
        }
        let total: f64 = frequencies.iter().map(|f| f.1).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Input(format!("frequency weights sum to {total}, not 1")));
        }
        let dx = TAU / n_cells as f64;
        for (r, ur) in u.iter().enumerate() {
            if ur.len() != n_cells {
                return Err(Error::Dimension(format!("component {r} has {} cells, expected {n_cells}", ur.len())));
            }
            if ur.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::Input(format!("component {r} has negative or non-finite entries")));
            }
            let mass: f64 = ur.iter().sum::<f64>() * dx;
            if (mass - 1.0).abs() > MASS_TOL {
                return Err(Error::Input(format!("component {r} has mass {mass}, not 1")));
            }
        }
        Ok(Self { n_cells, frequencies, u })
    }

    /// Normalised cell averages of a nonnegative profile `f` (Gauss–Legendre
    /// of order 4 per cell), the same for every frequency atom.
    pub fn from_profile(n_cells: usize, frequencies: Vec<(f64, f64)>, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::Input("density grid needs at least two cells".into()));
        }
        let dx = TAU / n_cells as f64;
        let mut cells = Vec::with_capacity(n_cells);
        for k in 0..n_cells {
            let rule = gauss_legendre_on(4, k as f64 * dx, (k + 1) as f64 * dx)?;
            cells.push(rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * f(*x)).sum::<f64>() / dx);
        }
        let mass: f64 = cells.iter().sum::<f64>() * dx;
        if !(mass > 0.0) || !mass.is_finite() || cells.iter().any(|v| *v < 0.0) {
            return Err(Error::Input("density profile must be nonnegative with positive finite mass".into()));
        }
        let cells: Vec<f64> = cells.iter().map(|v| v / mass).collect();
        let u = vec![cells; frequencies.len()];
        Self::new(n_cells, frequencies, u)
    }

    pub fn uniform(n_cells: usize, frequencies: Vec<(f64, f64)>) -> Result<Self> {
        let u = vec![vec![1.0 / TAU; n_cells]; frequencies.len()];
        Self::new(n_cells, frequencies, u)
    }

    /// Von Mises bump `∝ exp(κ cos(x − center))`.
    pub fn bump(n_cells: usize, frequencies: Vec<(f64, f64)>, center: f64, kappa: f64) -> Result<Self> {
        Self::from_profile(n_cells, frequencies, |x| (kappa * ((x - center).cos() - 1.0)).exp())
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        TAU / self.n_cells as f64
    }

    pub fn frequencies(&self) -> &[(f64, f64)] {
        &self.frequencies
    }

    pub fn component(&self, r: usize) -> &[f64] {
        &self.u[r]
    }

    pub fn mass(&self, r: usize) -> f64 {
        self.u[r].iter().sum::<f64>() * self.dx()
    }

    /// `Σ_r ζ_r u_r`, the phase density averaged over frequencies.
    pub fn marginal(&self) -> Vec<f64> {
        (0..self.n_cells).map(|k| self.frequencies.iter().zip(&self.u).map(|(f, ur)| f.1 * ur[k]).sum()).collect()
    }

    pub fn cell_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dx()
    }

    /// `(∫ sin x ρ, ∫ cos x ρ)` for the marginal `ρ`, with exact cell integrals.
    pub fn first_moments(&self) -> (f64, f64) {
        first_moments(&self.marginal(), self.n_cells)
    }

    /// Modulus of the first circular moment.
    pub fn order_parameter(&self) -> f64 {
        let (s, c) = self.first_moments();
        s.hypot(c).min(1.0)
    }

    /// Columns `x,u` (cell centres) for component `r`.
    pub fn to_table(&self, r: usize) -> Table {
        let mut t = Table::new(["x", "u"]);
        for (k, v) in self.u[r].iter().enumerate() {
            t.push(vec![Cell::from(self.cell_center(k)), Cell::from(*v)]).expect("two columns");
        }
        t
    }

    /// `m` i.i.d. draws `(phase, ω)` from `Σ_r ζ_r u_r(x) δ_{ω_r}`.
    pub fn sample(&self, m: usize, rng: &mut SeededRng) -> (Vec<f64>, Vec<f64>) {
        let dx = self.dx();
        let mut cdf = Vec::with_capacity(self.n_cells * self.u.len());
        let mut acc = 0.0;
        for (f, ur) in self.frequencies.iter().zip(&self.u) {
            for v in ur {
                acc += f.1 * v * dx;
                cdf.push(acc);
            }
        }
        let mut phases = Vec::with_capacity(m);
        let mut omegas = Vec::with_capacity(m);
        for _ in 0..m {
            let p = rng.uniform() * acc;
            let idx = cdf.partition_point(|&c| c <= p).min(cdf.len() - 1);
            let (r, k) = (idx / self.n_cells, idx % self.n_cells);
            phases.push((k as f64 + rng.uniform()) * dx);
            omegas.push(self.frequencies[r].0);
        }
        (phases, omegas)
    }

    /// Phases at the marginal quantiles `(i + ½)/m`.
    pub fn quantile_phases(&self, m: usize) -> Vec<f64> {
        let dx = self.dx();
        let rho = self.marginal();
        let mut out = Vec::with_capacity(m);
        let mut k = 0;
        let mut below = 0.0;
        for i in 0..m {
            let q = (i as f64 + 0.5) / m as f64;
            while k + 1 < self.n_cells && below + rho[k] * dx < q {
                below += rho[k] * dx;
                k += 1;
            }
            let frac = if rho[k] > 0.0 { ((q - below) / (rho[k] * dx)).clamp(0.0, 1.0) } else { 0.5 };
            out.push((k as f64 + frac) * dx);
        }
        out
    }
}

fn first_moments(rho: &[f64], n: usize) -> (f64, f64) {
    let dx = TAU / n as f64;
    let (mut s, mut c) = (0.0, 0.0);
    for (k, v) in rho.iter().enumerate() {
        let (a, b) = (k as f64 * dx, (k + 1) as f64 * dx);
        s += v * (a.cos() - b.cos());
        c += v * (b.sin() - a.sin());
    }
    (s, c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VlasovParams {
    pub k: f64,
    pub t_end: f64,
    /// Requested step; shrunk so that a whole number of steps reaches `t_end`.
    pub dt: f64,
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VlasovRun {
    pub times: Vec<f64>,
    pub densities: Vec<DensityGrid>,
    pub steps: usize,
    pub dt: f64,
    /// Largest per-step change of any component's mass.
    pub max_mass_drift: f64,
}

impl VlasovRun {
    /// Columns `t,order_parameter`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["t", "order_parameter"]);
        for (s, d) in self.times.iter().zip(&self.densities) {
            t.push(vec![Cell::from(*s), Cell::from(d.order_parameter())]).expect("two columns");
        }
        t
    }
}

/// First-order upwind finite volumes for `∂_t u = −∂_x(u V[u])` with
/// `V[u](x, ω) = ω + K ∫ sin(x̃ − x) ρ(x̃) dx̃`, forward Euler in time.
///
/// The kernel expands as `cos x · ∫ sin x̃ ρ − sin x · ∫ cos x̃ ρ`, so the
/// velocity costs two sums per step. Fails with [`Error::Cfl`] as soon as a
/// step would exceed Courant number ½.
pub fn vlasov_kuramoto_solve(grid: &DensityGrid, params: &VlasovParams) -> Result<VlasovRun> {
    let VlasovParams { k, t_end, dt, record_every } = *params;
    if !(dt > 0.0) || !(t_end >= 0.0) || !k.is_finite() || !t_end.is_finite() || record_every == 0 {
        return Err(Error::Input(format!("need dt > 0, T ≥ 0, finite K and record_every ≥ 1, got dt = {dt}, T = {t_end}")));
    }
    let n = grid.n_cells;
    let dx = grid.dx();
    let steps = (t_end / dt * (1.0 - 1e-12)).ceil() as usize;
    let h = if steps == 0 { dt } else { t_end / steps as f64 };
    let faces: Vec<(f64, f64)> = (0..n).map(|f| ((f + 1) as f64 * dx).sin_cos()).collect();
    let mut cur = grid.clone();
    let mut times = vec![0.0];
    let mut densities = vec![grid.clone()];
    let mut max_mass_drift: f64 = 0.0;
    let mut flux = vec![0.0; n];
    let mut vel = vec![0.0; n];
    for step in 0..steps {
        let (s, c) = cur.first_moments();
        // velocity at the right face of each cell, without ω
        for (v, &(sf, cf)) in vel.iter_mut().zip(&faces) {
            *v = k * (cf * s - sf * c);
        }
        let vmax = cur.frequencies.iter().map(|f| vel.iter().map(|v| (v + f.0).abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
        if h * vmax > CFL_NUMBER * dx {
            return Err(Error::Cfl { time: step as f64 * h, dt: h, suggested_dt: CFL_NUMBER * dx / vmax });
        }
        let ratio = h / dx;
        for (r, ur) in cur.u.iter_mut().enumerate() {
            let omega = cur.frequencies[r].0;
            let before: f64 = ur.iter().sum::<f64>() * dx;
            for f in 0..n {
                let v = vel[f] + omega;
                let right = if f + 1 == n { 0 } else { f + 1 };
                flux[f] = if v >= 0.0 { v * ur[f] } else { v * ur[right] };
            }
            for kc in 0..n {
                let left = if kc == 0 { n - 1 } else { kc - 1 };
                ur[kc] -= ratio * (flux[kc] - flux[left]);
            }
            let after: f64 = ur.iter().sum::<f64>() * dx;
            max_mass_drift = max_mass_drift.max((after - before).abs());
        }
        if cur.u.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: step + 1, message: format!("non-finite density at t = {}", (step + 1) as f64 * h) });
        }
        if (step + 1) % record_every == 0 || step + 1 == steps {
            times.push((step + 1) as f64 * h);
            densities.push(cur.clone());
        }
    }
    Ok(VlasovRun { times, densities, steps, dt: h, max_mass_drift })
}

/// `∫` over a segment of length `len` of `|ℓ|`, `ℓ` linear from `a` to `b`.
fn abs_linear_integral(len: f64, a: f64, b: f64) -> f64 {
    if (a >= 0.0 && b >= 0.0) || (a <= 0.0 && b <= 0.0) {
        len * (a + b).abs() / 2.0
    } else {
        len * (a * a + b * b) / (2.0 * (a.abs() + b.abs()))
    }
}

/// Piecewise-linear CDF difference on `[0, 2π)` as `(length, start, end)` segments.
struct CdfDifference {
    segments: Vec<(f64, f64, f64)>,
}

impl CdfDifference {
    /// `F_ρ − F_atoms`, where `ρ` has cell averages `rho` and the atoms are
    /// `(phase, weight)` pairs.
    fn new(rho: &[f64], other_rho: Option<&[f64]>, atoms: &[(f64, f64)]) -> Self {
        let n = rho.len();
        let dx = TAU / n as f64;
        let mut atoms: Vec<(f64, f64)> = atoms.iter().map(|&(x, w)| (wrap_angle(x), w)).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let slope = |k: usize| rho[k] - other_rho.map_or(0.0, |o| o[k]);
        let mut segments = Vec::with_capacity(n + atoms.len());
        let mut d = 0.0;
        let mut j = 0;
        for k in 0..n {
            let end = (k + 1) as f64 * dx;
            let mut x = k as f64 * dx;
            loop {
                while j < atoms.len() && atoms[j].0 <= x {
                    d -= atoms[j].1;
                    j += 1;
                }
                let next = if j < atoms.len() && atoms[j].0 < end { atoms[j].0 } else { end };
                let len = next - x;
                let d1 = d + slope(k) * len;
                if len > 0.0 {
                    segments.push((len, d, d1));
                }
                d = d1;
                x = next;
                if next >= end {
                    break;
                }
            }
        }
        Self { segments }
    }

    fn cost(&self, shift: f64) -> f64 {
        self.segments.iter().map(|&(len, a, b)| abs_linear_integral(len, a - shift, b - shift)).sum()
    }

    /// `min_s ∫ |D − s|` by golden-section search (the cost is convex in `s`).
    fn circle_w1(&self) -> f64 {
        let (mut lo, mut hi) = self.segments.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s.1).min(s.2), hi.max(s.1).max(s.2))
        });
        if !(hi > lo) {
            return self.cost(lo);
        }
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let (mut f1, mut f2) = (self.cost(x1), self.cost(x2));
        for _ in 0..200 {
            if hi - lo <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
                break;
            }
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = self.cost(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = self.cost(x2);
            }
        }
        f1.min(f2)
    }
}

/// Circular Wasserstein-1 distance between the density marginal and
/// atoms `(phase, weight)` of total mass one.
pub fn w1_density_atoms(grid: &DensityGrid, atoms: &[(f64, f64)]) -> Result<f64> {
    let mass: f64 = atoms.iter().map(|a| a.1).sum();
    if (mass - 1.0).abs() > MASS_TOL || atoms.iter().any(|a| !(a.1 >= 0.0) || !a.0.is_finite()) {
        return Err(Error::Input(format!("atoms must be a probability measure, total mass {mass}")));
    }
    Ok(CdfDifference::new(&grid.marginal(), None, atoms).circle_w1())
}

/// Circular Wasserstein-1 distance between two density marginals on the same grid.
pub fn w1_densities(a: &DensityGrid, b: &DensityGrid) -> Result<f64> {
    if a.n_cells != b.n_cells {
        return Err(Error::Dimension(format!("grids have {} and {} cells", a.n_cells, b.n_cells)));
    }
    Ok(CdfDifference::new(&a.marginal(), Some(&b.marginal()), &[]).circle_w1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{wasserstein1, Geometry, MeasureAtoms};

    #[test]
    fn abs_integral_of_sign_change() {
        assert!((abs_linear_integral(2.0, -1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((abs_linear_integral(1.0, 1.0, 3.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_density_has_zero_order_parameter() {
        let g = DensityGrid::uniform(64, vec![(0.0, 1.0)]).unwrap();
        assert!(g.order_parameter() < 1e-14);
        assert!((g.mass(0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn density_w1_matches_fine_atoms() {
        let g = DensityGrid::bump(40, vec![(0.0, 1.0)], 1.0, 2.0).unwrap();
        let atoms = [(0.3, 0.5), (4.0, 0.5)];
        let exact = w1_density_atoms(&g, &atoms).unwrap();
        // represent the density by many sub-atoms per cell
        let sub = 200;
        let dx = g.dx();
        let rho = g.marginal();
        let mut pts = Vec::new();
        let mut ws = Vec::new();
        for (k, v) in rho.iter().enumerate() {
            for s in 0..sub {
                pts.push((k as f64 + (s as f64 + 0.5) / sub as f64) * dx);
                ws.push(v * dx / sub as f64);
            }
        }
        let fine = MeasureAtoms::on_line(&pts, ws).unwrap();
        let other = MeasureAtoms::on_line(&[0.3, 4.0], vec![0.5, 0.5]).unwrap();
        let approx = wasserstein1(&fine, &other, Geometry::Circle(TAU)).unwrap();
        assert!((exact - approx).abs() < dx / sub as f64, "{exact} {approx}");
    }

    #[test]
    fn quantiles_of_uniform_are_equally_spaced() {
        let g = DensityGrid::uniform(16, vec![(0.0, 1.0)]).unwrap();
        let q = g.quantile_phases(4);
        for (i, x) in q.iter().enumerate() {
            assert!((x - (i as f64 + 0.5) * TAU / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cfl_violation_suggests_step() {
        let g = DensityGrid::uniform(100, vec![(10.0, 1.0)]).unwrap();
        let e = vlasov_kuramoto_solve(&g, &VlasovParams { k: 0.0, t_end: 1.0, dt: 0.1, record_every: 1 }).unwrap_err();
        match e {
            Error::Cfl { suggested_dt, .. } => assert!((suggested_dt - 0.5 * TAU / 100.0 / 10.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
