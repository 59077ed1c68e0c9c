use std::f64::consts::{PI, TAU};
use std::sync::Arc;
use std::time::Instant;

use dyn_nn_lab::meanfield::*;
use dyn_nn_lab::{Matrix64, SeededRng};
use proptest::prelude::*;

fn rk4(dt: f64, t: f64) -> SimParams {
    SimParams::new(dt, t)
}

#[test]
fn kuramoto_two_body_closed_form() {
    let m = kuramoto(1.0, vec![0.0]).unwrap();
    let tr = simulate_ips(&m, &GraphSpec::AllToAll(1.0), &[0.0, PI / 2.0], &rk4(0.01, 1.0)).unwrap();
    let x = &tr.lifted[tr.lifted.len() - 1];
    let psi = x[1] - x[0];
    let expect = 2.0 * (-1f64).exp().atan();
    assert!((psi - expect).abs() < 1e-5, "{psi} vs {expect}");
    assert!((expect - 0.705026).abs() < 1e-6);
}

#[test]
fn zero_coupling_gives_independent_flows() {
    let m = IpsModel::new("decay", PhaseSpace::Euclidean(1), Arc::new(|_, _, x| vec![-x[0]]), Arc::new(|_, _, out| out[0] = 0.0));
    let x0 = [1.0, -2.0, 0.5];
    let tr = simulate_ips(&m, &GraphSpec::AllToAll(7.0), &x0, &rk4(0.01, 2.0)).unwrap();
    for (a, b) in tr.final_state().iter().zip(&x0) {
        assert!((a - b * (-2f64).exp()).abs() < 1e-9);
    }
}

#[test]
fn kuramoto_without_coupling_rotates() {
    let m = kuramoto(0.0, vec![1.0, -0.5]).unwrap();
    let tr = simulate_ips(&m, &GraphSpec::AllToAll(1.0), &[0.0, 1.0], &rk4(0.1, 3.0)).unwrap();
    let x = &tr.lifted[tr.lifted.len() - 1];
    assert!((x[0] - 3.0).abs() < 1e-12 && (x[1] - (1.0 - 1.5)).abs() < 1e-12);
    assert!(tr.final_state().iter().all(|p| (0.0..TAU).contains(p)));
}

#[test]
fn synchrony_is_invariant() {
    let models = [
        kuramoto(2.0, vec![0.3]).unwrap(),
        desai_zwanzig(double_well_derivative(), 1.0).unwrap(),
        hegselmann_krause(1.0, 0.5, 0.5).unwrap(),
        cucker_smale(1.0, 1.5).unwrap(),
    ];
    for m in &models {
        let d = m.dim();
        let x0: Vec<f64> = (0..5).flat_map(|_| (0..d).map(|k| 0.4 + k as f64)).collect();
        let tr = simulate_ips(m, &GraphSpec::graphon(Graphon::Product), &x0, &rk4(0.01, 2.0)).unwrap();
        let last = tr.final_state();
        for p in last.chunks(d) {
            assert_eq!(p, &last[..d], "{}", m.name);
        }
    }
}

#[test]
fn mean_phase_drifts_at_mean_frequency() {
    let mut rng = SeededRng::new(4);
    let omega: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
    let x0: Vec<f64> = (0..50).map(|_| rng.uniform_in(0.0, TAU)).collect();
    let m = kuramoto(1.5, omega.clone()).unwrap();
    let tr = simulate_ips(&m, &GraphSpec::AllToAll(1.0), &x0, &rk4(0.01, 10.0).with_record_every(1000)).unwrap();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let drift = mean(&tr.lifted[tr.lifted.len() - 1]) - mean(&x0);
    assert!((drift - 10.0 * mean(&omega)).abs() < 1e-8, "{drift}");
}

#[test]
fn hegselmann_krause_without_thresholds_is_linear_attraction() {
    let hk = hegselmann_krause(0.7, f64::INFINITY, f64::INFINITY).unwrap();
    let dz = desai_zwanzig(Arc::new(|_| 0.0), 0.7).unwrap();
    let x0 = [0.1, 0.9, 0.4, 0.35];
    let a = simulate_ips(&hk, &GraphSpec::AllToAll(1.0), &x0, &rk4(0.05, 3.0)).unwrap();
    let b = simulate_ips(&dz, &GraphSpec::AllToAll(1.0), &x0, &rk4(0.05, 3.0)).unwrap();
    assert_eq!(a.lifted, b.lifted);
}

#[test]
fn transformer_with_zero_queries_averages_values() {
    let m3 = Matrix64::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.5]]).unwrap();
    let m = transformer_ode(Matrix64::zeros(1, 2), Matrix64::zeros(1, 2), m3.clone()).unwrap();
    let x0 = [1.0, 0.0, -0.5, 2.0, 0.3, 0.3];
    let w = attention_weights(&m, &x0, 1).unwrap();
    assert!(w.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    // one Euler step: every particle moves by dt·mean_j M3 x_j
    let tr = simulate_ips(&m, &GraphSpec::AllToAll(1.0), &x0, &SimParams::new(0.1, 0.1).with_scheme(Scheme::Euler)).unwrap();
    let mean: Vec<f64> = (0..2).map(|k| x0.chunks(2).map(|x| m3.matvec(x).unwrap()[k]).sum::<f64>() / 3.0).collect();
    for (i, p) in tr.final_state().chunks(2).enumerate() {
        for k in 0..2 {
            assert!((p[k] - x0[2 * i + k] - 0.1 * mean[k]).abs() < 1e-15);
        }
    }
}

#[test]
fn hopfield_relaxes_to_fixed_point() {
    // one neuron with no coupling: x' = −αx + b → b/α
    let m = hopfield_cts(2.0, vec![1.0]).unwrap();
    let tr = simulate_ips(&m, &GraphSpec::Explicit(Matrix64::zeros(1, 1)), &[0.0], &rk4(0.01, 20.0)).unwrap();
    assert!((tr.final_state()[0] - 0.5).abs() < 1e-12);
}

#[test]
fn divergence_is_reported_with_time() {
    let m = IpsModel::new("blowup", PhaseSpace::Euclidean(1), Arc::new(|_, _, x| vec![x[0] * x[0]]), Arc::new(|_, _, o| o[0] = 0.0));
    let e = simulate_ips(&m, &GraphSpec::AllToAll(1.0), &[1.0], &rk4(0.01, 5.0)).unwrap_err();
    assert!(e.to_string().contains("t = "), "{e}");
}

fn noisy(f: Intrinsic, h: Pairwise) -> IpsModel {
    IpsModel::new("sde", PhaseSpace::Euclidean(1), f, Arc::new(|_, _, o| o[0] = 0.0)).with_noise(h)
}

#[test]
fn sde_without_noise_is_euler() {
    let m = kuramoto(1.0, vec![0.2]).unwrap().with_noise(Arc::new(|_, _, o| o[0] = 0.0));
    let x0 = [0.0, 1.0, 2.5, 4.0];
    let p = SimParams::new(0.01, 1.0).with_scheme(Scheme::Euler);
    let det = simulate_ips(&m, &GraphSpec::AllToAll(1.0), &x0, &p).unwrap();
    let sde = simulate_sde_ips(&m, &GraphSpec::AllToAll(1.0), &GraphSpec::AllToAll(1.0), &x0, &p, &SeededRng::new(3)).unwrap();
    assert_eq!(det.lifted, sde.lifted);
}

#[test]
fn sde_brownian_marginal_variance() {
    let m = noisy(Arc::new(|_, _, _| vec![0.0]), Arc::new(|_, _, o| o[0] = 1.0));
    let n = 10_000;
    let x0 = vec![0.0; n];
    let tr = simulate_sde_ips(&m, &GraphSpec::AllToAll(0.0), &GraphSpec::AllToAll(1.0), &x0, &SimParams::new(0.5, 2.0), &SeededRng::new(9))
        .unwrap();
    let x = tr.final_state();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((var - 2.0).abs() < 0.1, "variance {var}");
}

#[test]
fn sde_strong_order_one_half() {
    // geometric Brownian motion per particle: dx = μx dt + σx dW
    let (mu, sigma, n) = (0.5, 1.0, 4000);
    let gbm = noisy(Arc::new(move |_, _, x| vec![mu * x[0]]), Arc::new(move |x, _, o| o[0] = sigma * x[0]));
    // same streams and step count reproduce the Brownian path itself
    let bm = noisy(Arc::new(|_, _, _| vec![0.0]), Arc::new(|_, _, o| o[0] = 1.0));
    let x0 = vec![1.0; n];
    // `â` rows must sum to M so that (1/M) Σ_j â_ij h = h(x_i)
    let ones = GraphSpec::AllToAll(1.0);
    let err = |dt: f64| {
        let p = SimParams::new(dt, 1.0);
        let rng = SeededRng::new(21);
        let x = simulate_sde_ips(&gbm, &GraphSpec::AllToAll(0.0), &ones, &x0, &p, &rng).unwrap().final_state();
        let w = simulate_sde_ips(&bm, &GraphSpec::AllToAll(0.0), &ones, &vec![0.0; n], &p, &rng).unwrap().final_state();
        x.iter().zip(&w).map(|(xe, wt)| (xe - ((mu - 0.5 * sigma * sigma) + sigma * wt).exp()).abs()).sum::<f64>() / n as f64
    };
    let (e1, e2) = (err(1.0 / 64.0), err(1.0 / 128.0));
    let ratio = e1 / e2;
    assert!(ratio > 1.2 && ratio < 1.7, "strong error ratio {ratio} ({e1}, {e2})");
}

#[test]
fn sde_reproducible() {
    let m = kuramoto(1.0, vec![0.0]).unwrap().with_noise(Arc::new(|_, _, o| o[0] = 0.3));
    let x0 = [0.0, 1.0, 2.0];
    let p = SimParams::new(0.01, 1.0);
    let a = simulate_sde_ips(&m, &GraphSpec::AllToAll(1.0), &GraphSpec::AllToAll(1.0), &x0, &p, &SeededRng::new(5)).unwrap();
    let b = simulate_sde_ips(&m, &GraphSpec::AllToAll(1.0), &GraphSpec::AllToAll(1.0), &x0, &p, &SeededRng::new(5)).unwrap();
    assert_eq!(a, b);
}

fn single(omega: f64) -> Vec<(f64, f64)> {
    vec![(omega, 1.0)]
}

#[test]
fn vlasov_uniform_density_is_stationary() {
    for k in [0.0, 1.0, 5.0] {
        let g = DensityGrid::uniform(256, single(0.0)).unwrap();
        let run = vlasov_kuramoto_solve(&g, &VlasovParams { k, t_end: 5.0, dt: 0.01, record_every: 50 }).unwrap();
        let last = run.densities.last().unwrap();
        let drift = last.component(0).iter().map(|u| (u - 1.0 / TAU).abs()).fold(0.0, f64::max);
        assert!(drift <= 1e-9, "K = {k}: drift {drift}");
        assert!(run.max_mass_drift <= 1e-12);
    }
}

#[test]
fn vlasov_conserves_mass_and_positivity() {
    let g = DensityGrid::new(
        128,
        vec![(-0.5, 0.25), (0.5, 0.75)],
        vec![DensityGrid::bump(128, single(0.0), 1.0, 3.0).unwrap().component(0).to_vec(), vec![1.0 / TAU; 128]],
    )
    .unwrap();
    let run = vlasov_kuramoto_solve(&g, &VlasovParams { k: 2.0, t_end: 3.0, dt: 0.005, record_every: 100 }).unwrap();
    assert!(run.max_mass_drift <= 1e-12, "{}", run.max_mass_drift);
    for d in &run.densities {
        for r in 0..2 {
            assert!((d.mass(r) - 1.0).abs() < 1e-11);
            assert!(d.component(r).iter().all(|&u| u >= 0.0));
        }
    }
}

/// L1 error of pure advection at speed 1 after time 1 against exact shifted cell averages.
fn advection_error(n: usize) -> f64 {
    let profile = |x: f64| (2.0 * ((x - 1.0).cos() - 1.0)).exp();
    let g = DensityGrid::from_profile(n, single(1.0), profile).unwrap();
    let dx = g.dx();
    let run = vlasov_kuramoto_solve(&g, &VlasovParams { k: 0.0, t_end: 1.0, dt: 0.4 * dx, record_every: usize::MAX }).unwrap();
    let exact = DensityGrid::from_profile(n, single(1.0), |x| profile(x - 1.0)).unwrap();
    let num = run.densities.last().unwrap();
    num.component(0).iter().zip(exact.component(0)).map(|(a, b)| (a - b).abs() * dx).sum()
}

#[test]
fn vlasov_advection_is_first_order() {
    let errs: Vec<f64> = [200, 400, 800].iter().map(|&n| advection_error(n)).collect();
    for w in errs.windows(2) {
        let r = w[0] / w[1];
        assert!(r > 1.8 && r < 2.2, "refinement ratio {r} from {errs:?}");
    }
    assert!(errs[2] < 0.02);
}

#[test]
fn strong_coupling_synchronises_density() {
    let g = DensityGrid::bump(256, single(0.0), 2.0, 1.0).unwrap();
    let run = vlasov_kuramoto_solve(&g, &VlasovParams { k: 5.0, t_end: 4.0, dt: 0.002, record_every: 20 }).unwrap();
    let r: Vec<f64> = run.densities.iter().map(DensityGrid::order_parameter).collect();
    assert!(r.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{r:?}");
    assert!(*r.last().unwrap() > 0.9, "{}", r.last().unwrap());
}

#[test]
fn quantile_particles_track_advected_density() {
    let g = DensityGrid::bump(512, single(0.7), 3.0, 1.5).unwrap();
    let m = 200;
    let x0 = g.quantile_phases(m);
    let run = vlasov_kuramoto_solve(&g, &VlasovParams { k: 0.0, t_end: 2.0, dt: 0.005, record_every: 40 }).unwrap();
    let tr = simulate_ips(&kuramoto(0.0, vec![0.7]).unwrap(), &GraphSpec::AllToAll(1.0), &x0, &rk4(0.01, 2.0).with_record_every(20))
        .unwrap();
    let w = 1.0 / m as f64;
    // one grid cell plus one quantile spacing
    let bound = g.dx() + TAU / m as f64;
    for (x, d) in tr.lifted.iter().zip(&run.densities) {
        let atoms: Vec<(f64, f64)> = x.iter().map(|&p| (p, w)).collect();
        let d1 = w1_density_atoms(d, &atoms).unwrap();
        assert!(d1 <= bound, "{d1} > {bound}");
        assert!(d1 <= PI);
    }
}

fn convergence_setup(seeds: usize) -> ConvergenceStudy {
    ConvergenceStudy {
        ms: vec![100, 400, 1600],
        seeds,
        k: 1.0,
        t_end: 2.0,
        dt: 0.01,
        sample_every: 10,
        initial: DensityGrid::bump(2048, single(0.0), PI, 1.0).unwrap(),
    }
}

#[test]
fn meanfield_convergence_trend() {
    let start = Instant::now();
    let rep = meanfield_convergence_study(&convergence_setup(10), &SeededRng::new(2024)).unwrap();
    let w: Vec<f64> = rep.rows.iter().map(|r| r.sup_w1).collect();
    assert!(w[0] > w[1] && w[1] > w[2], "{w:?}");
    assert!(w[2] <= 0.6 * w[0], "{w:?}");
    assert!(rep.trend_ok());
    assert!(start.elapsed().as_secs() < 300);
    assert_eq!(rep.to_table().headers(), &["M", "sup_w1"]);
}

#[test]
fn dobrushin_bound_for_shifted_bumps() {
    let a = DensityGrid::bump(1024, single(0.0), 2.0, 2.0).unwrap();
    let b = DensityGrid::bump(1024, single(0.0), 2.6, 2.0).unwrap();
    let p = VlasovParams { k: 1.0, t_end: 2.0, dt: 0.002, record_every: 50 };
    let rep = dobrushin_check(&a, &b, &p, 1.0).unwrap();
    assert!(rep.holds && !rep.degenerate, "{rep:?}");
    for r in &rep.rows {
        assert!(r.w1 <= r.bound * 1.05);
    }
    let same = dobrushin_check(&a, &a, &p, 1.0).unwrap();
    assert!(same.degenerate && same.holds);
    assert!(same.rows.iter().all(|r| r.w1 <= 1e-9));
}

/// Largest relative change of W1 between two shifted bumps under pure advection.
fn advection_w1_deviation(n: usize) -> f64 {
    let p = VlasovParams { k: 0.0, t_end: 2.0, dt: 3.0 / n as f64, record_every: 50 };
    let a = DensityGrid::bump(n, single(1.0), 1.0, 2.0).unwrap();
    let b = DensityGrid::bump(n, single(1.0), 1.5, 2.0).unwrap();
    let rep = dobrushin_check(&a, &b, &p, 0.0).unwrap();
    assert!(rep.holds);
    rep.rows.iter().map(|r| (r.w1 - rep.w1_initial).abs() / rep.w1_initial).fold(0.0, f64::max)
}

#[test]
fn advection_preserves_distance() {
    // exact transport is an isometry; only scheme diffusion moves W1
    let coarse = advection_w1_deviation(1024);
    let fine = advection_w1_deviation(2048);
    assert!(coarse <= 1e-2 && fine < 0.6 * coarse, "{coarse} {fine}");
}

#[test]
fn digraph_measure_examples() {
    let mut rng = SeededRng::new(1);
    let a = Matrix64::new(5, 5, (0..25).map(|_| rng.uniform()).collect()).unwrap();
    let x = digraph_measure_of(&GraphSpec::Explicit(a.clone()), 5).unwrap();
    let y = digraph_measure_of(&GraphSpec::Explicit(a), 5).unwrap();
    assert_eq!(dgm_distance(&x, &y, 50).unwrap(), 0.0);

    let c = 0.8;
    for m in [3, 10, 25] {
        let g = GraphSpec::graphon(Graphon::Constant { c });
        let d = dgm_distance(&digraph_measure_of(&g, m).unwrap(), &digraph_measure_of(&g, 2 * m).unwrap(), 40).unwrap();
        assert!(d <= c / (2.0 * m as f64) + 1e-9, "M = {m}: {d}");
    }

    let full = digraph_measure_of(&GraphSpec::AllToAll(c), 6).unwrap();
    let empty = digraph_measure_of(&GraphSpec::Explicit(Matrix64::zeros(6, 6)), 6).unwrap();
    assert!((full.fiber_mass(2) - c).abs() < 1e-15);
    assert!((dgm_distance(&full, &empty, 12).unwrap() - c).abs() < 1e-9);
}

#[test]
fn graphon_sequences_converge() {
    let g = GraphSpec::graphon(Graphon::Product);
    let fine = digraph_measure_of(&g, 64).unwrap();
    let d: Vec<f64> =
        [4, 8, 16].iter().map(|&m| dgm_distance(&digraph_measure_of(&g, m).unwrap(), &fine, 64).unwrap()).collect();
    assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn attention_weights_sum_to_one(seed in 0u64..1000, m in 1usize..8) {
        let mut rng = SeededRng::new(seed);
        let mut mat = |r: usize, c: usize| Matrix64::new(r, c, (0..r * c).map(|_| 3.0 * rng.normal()).collect()).unwrap();
        let model = transformer_ode(mat(2, 3), mat(2, 3), mat(3, 3)).unwrap();
        let x: Vec<f64> = (0..3 * m).map(|k| (k as f64 * 1.7).sin() * 4.0).collect();
        for i in 0..m {
            let w = attention_weights(&model, &x, i).unwrap();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_w1_bounded_by_half_period(seed in 0u64..1000, m in 1usize..30) {
        let mut rng = SeededRng::new(seed);
        let g = DensityGrid::bump(64, single(0.0), rng.uniform_in(0.0, TAU), rng.uniform_in(0.0, 20.0)).unwrap();
        let atoms: Vec<(f64, f64)> = (0..m).map(|_| (rng.uniform_in(-10.0, 10.0), 1.0 / m as f64)).collect();
        let d = w1_density_atoms(&g, &atoms).unwrap();
        prop_assert!((0.0..=PI + 1e-12).contains(&d), "{}", d);
    }

    #[test]
    fn identical_states_stay_identical(seed in 0u64..1000, m in 2usize..6) {
        let mut rng = SeededRng::new(seed);
        let x = rng.uniform_in(-1.0, 1.0);
        let v = rng.uniform_in(-1.0, 1.0);
        let model = cucker_smale(rng.uniform_in(0.1, 3.0), rng.uniform_in(0.5, 3.0)).unwrap();
        let x0: Vec<f64> = (0..m).flat_map(|_| [x, v]).collect();
        let tr = simulate_ips(&model, &GraphSpec::AllToAll(1.0), &x0, &SimParams::new(0.05, 1.0)).unwrap();
        let last = tr.final_state();
        for p in last.chunks(2) {
            prop_assert_eq!(p, &last[..2]);
        }
    }
}
