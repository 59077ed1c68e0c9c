use std::sync::Arc;

use dyn_nn_lab::networks::{Activation, MlpLayer, MlpSpec};
use dyn_nn_lab::numerics::{finite_diff_gradient, spectral_radius, Matrix};
use dyn_nn_lab::training::*;
use dyn_nn_lab::SeededRng;
use proptest::prelude::*;

fn mlp_loss(seed: u64) -> LossModel<f64> {
    let mut rng = SeededRng::new(seed);
    let mut g = |r: usize, c: usize| Matrix::new(r, c, (0..r * c).map(|_| rng.normal()).collect()).unwrap();
    let spec = MlpSpec::new(vec![
        MlpLayer::new(g(3, 2), vec![0.1; 3], g(3, 3), vec![0.0; 3], Activation::Tanh),
        MlpLayer::new(g(1, 3), vec![0.2], g(1, 1), vec![-0.1], Activation::Softplus),
    ])
    .unwrap();
    let mut rng = SeededRng::new(seed + 1);
    let xs = (0..5).map(|_| vec![rng.normal(), rng.normal()]).collect();
    let ys = (0..5).map(|_| vec![rng.normal()]).collect();
    LossModel::new(Arc::new(MlpModel::new(spec)), Dataset::new(xs, ys).unwrap(), LossKind::HalfSquared).unwrap()
}

fn models() -> Vec<LossModel<f64>> {
    let mut rng = SeededRng::new(99);
    let lin = LossModel::new(
        Arc::new(LinearModel { dim: 3 }),
        Dataset::new((0..4).map(|_| (0..3).map(|_| rng.normal()).collect()).collect(), (0..4).map(|_| vec![rng.normal()]).collect())
            .unwrap(),
        LossKind::Squared,
    )
    .unwrap();
    vec![
        LossModel::<f64>::prod2(LossKind::Squared),
        LossModel::<f64>::prod2(LossKind::HalfSquared),
        LossModel::<f64>::scalar_linear(&[(1.0, 0.0), (2.0, 0.0)], LossKind::HalfSquared).unwrap(),
        lin,
        LossModel::<f64>::quadratic(&Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap()).unwrap(),
        mlp_loss(3),
    ]
}

#[test]
fn reverse_gradient_matches_differences() {
    let models = models();
    let mut rng = SeededRng::new(5);
    for k in 0..200 {
        let m = &models[k % models.len()];
        let theta: Vec<f64> = (0..m.param_dim()).map(|_| rng.normal()).collect();
        let g = grad_loss(m, &theta).unwrap();
        let fd = finite_diff_gradient(|p| loss(m, p).unwrap(), &theta, 1e-5).unwrap();
        let err = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-6);
        assert!(err / scale <= 1e-5, "draw {k}: relative error {}", err / scale);
    }
}

#[test]
fn gd_stability_dichotomy() {
    let m = LossModel::<f64>::quadratic(&Matrix::from_diag(&[4.0])).unwrap();
    let t = gd_run(&m, &[1.0], &GdConfig::new(0.45, 200)).unwrap();
    assert!(t.final_theta()[0].abs() < 1e-8);
    let t = gd_run(&m, &[1.0], &GdConfig::new(0.55, 1000)).unwrap();
    assert!(t.diverged());
}

#[test]
fn sharpness_along_the_hyperbola() {
    let m = LossModel::<f64>::prod2(LossKind::Squared);
    for a in [0.5f64, 1.0, 2.0] {
        let th = [a, 1.0 / a];
        let s = sharpness(&m, &th).unwrap();
        assert!((s - 2.0 * (a * a + 1.0 / (a * a))).abs() <= 1e-6);
        let split = tangent_normal_split(&m, &th, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(split.tangent_dim(), 1);
        assert!(!split.dim_mismatch);
    }
}

#[test]
fn edge_of_stability_run() {
    let m = LossModel::<f64>::prod2(LossKind::Squared);
    let tr = edge_of_stability_trace(&m, &[2.5, 0.41], &GdConfig::new(0.2, 20_000).with_stop_grad_tol(1e-14), 50).unwrap();
    let end = tr.trajectory.final_theta();
    assert!(m.interpolation_residual(end).unwrap() <= 1e-9);
    assert!(end[0].abs() > 0.4568 && end[0].abs() < 2.1889, "{end:?}");
    assert!(tr.terminal_sharpness() <= 10.0 + 1e-6);
    let t = tr.to_table();
    assert_eq!(t.headers(), ["step", "loss", "grad_norm", "sharpness", "threshold"]);
}

#[test]
fn unstable_region_is_left() {
    let m = LossModel::<f64>::prod2(LossKind::Squared);
    let tr = edge_of_stability_trace(&m, &[2.5, 0.41], &GdConfig::new(0.5, 2000), 10).unwrap();
    let far = tr.trajectory.points.iter().any(|p| (p.theta[0] - 2.5).abs() > 0.5 || p.theta[0].abs() > 1e3);
    assert!(far || tr.trajectory.diverged());
}

#[test]
fn scalar_lyapunov_closed_forms() {
    for (eta, expect) in [(0.4, 0.6f64.ln()), (1.5, 0.5 * 2.5f64.ln())] {
        let law = FiniteMatrixLaw::<f64>::scalars(&[1.0 - eta, 1.0 - 4.0 * eta]).unwrap();
        let e = lyapunov_exponent(&law, 100_000, 20, &SeededRng::new(8)).unwrap();
        assert!((e.estimate - expect).abs() <= 3.0 * e.stderr, "η={eta}: {e:?}");
    }
}

#[test]
fn deterministic_lyapunov_is_log_spectral_radius() {
    let mut rng = SeededRng::new(21);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let d = 2 + k % 3;
        let a = Matrix::new(d, d, (0..d * d).map(|_| rng.normal()).collect()).unwrap();
        let rho = spectral_radius(&a).unwrap();
        let e = lyapunov_exponent(&FiniteMatrixLaw::deterministic(a).unwrap(), 10_000, 20, &rng.child(k as u64)).unwrap();
        let z = (e.estimate - rho.ln()).abs() / e.stderr;
        worst = worst.max(z);
        assert!(z <= 3.0, "matrix {k}: est {} se {} vs {}", e.estimate, e.stderr, rho.ln());
    }
    eprintln!("worst z = {worst}");
}

#[test]
fn sgd_milnor_probe_matches_lyapunov_sign() {
    let m = LossModel::<f64>::scalar_linear(&[(1.0, 0.0), (2.0, 0.0)], LossKind::HalfSquared).unwrap();
    let probe = |eta| {
        let cfg = GdConfig::new(eta, 300).with_batch(1);
        milnor_probe(&m, &[0.0], 0.1, 500, &cfg, ProbeTarget::Isolated { tol: 1e-6 }, &SeededRng::new(17)).unwrap().fraction
    };
    assert!(probe(0.4) >= 0.95);
    assert!(probe(1.5) <= 0.05);
}

#[test]
fn sgd_is_reproducible_and_converges() {
    let m = LossModel::<f64>::scalar_linear(&[(1.0, 0.0), (2.0, 0.0)], LossKind::HalfSquared).unwrap();
    let cfg = GdConfig::new(0.4, 100).with_batch(1);
    let a = sgd_run(&m, &[1.0], &cfg, &mut SeededRng::new(7)).unwrap();
    let b = sgd_run(&m, &[1.0], &cfg, &mut SeededRng::new(7)).unwrap();
    assert_eq!(a, b);
    assert!(a.final_theta()[0].abs() < 1e-20);
}

#[test]
fn sgd_with_identical_examples_equals_gd() {
    let m = LossModel::<f64>::scalar_linear(&[(1.5, 1.0), (1.5, 1.0), (1.5, 1.0)], LossKind::HalfSquared).unwrap();
    let cfg = GdConfig::new(0.3, 50);
    let gd = gd_run(&m, &[0.2], &cfg).unwrap();
    let sgd = sgd_run(&m, &[0.2], &cfg.with_batch(2), &mut SeededRng::new(1)).unwrap();
    let th = |t: &Trajectory<f64>| t.points.iter().map(|p| p.theta.clone()).collect::<Vec<_>>();
    assert_eq!(th(&gd), th(&sgd));
}

#[test]
fn reverse_mode_matches_differences_through_ode() {
    use dyn_nn_lab::networks::{BuiltinField, VectorField};
    let field: Arc<dyn VectorField<f64>> = Arc::new(BuiltinField::from_id("tanh-net:2", 3).unwrap());
    let stages = ode_stages(field, 1.0, 20).unwrap();
    let x0 = [0.1, -0.4, 0.9];
    let c = [1.0, -2.0, 0.5];
    let r = variational_propagate(&stages, &x0, &Propagation::Reverse(c.to_vec())).unwrap();
    let f = |x: &[f64]| {
        let y = variational_propagate(&stages, x, &Propagation::Forward(vec![0.0; 3])).unwrap().output;
        y.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>()
    };
    let fd = finite_diff_gradient(f, &x0, 1e-5).unwrap();
    for (a, b) in r.derivative.iter().zip(&fd) {
        assert!((a - b).abs() <= 1e-5 * a.abs().max(1e-3));
    }
    for i in 0..3 {
        let mut e = vec![0.0; 3];
        e[i] = 1.0;
        let fwd = variational_propagate(&stages, &x0, &Propagation::Forward(e)).unwrap();
        let dot: f64 = fwd.derivative.iter().zip(&c).map(|(a, b)| a * b).sum();
        assert!((dot - r.derivative[i]).abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sgd_cocycle(seed in any::<u64>(), n in 1usize..30, k in 1usize..30) {
        let m = LossModel::<f64>::scalar_linear(&[(1.0, 0.3), (2.0, 0.1), (0.5, -0.2)], LossKind::HalfSquared).unwrap();
        let cfg = |s| GdConfig::new(0.2, s).with_batch(2);
        let whole = sgd_run(&m, &[0.7], &cfg(n + k), &mut SeededRng::new(seed)).unwrap();
        let mut rng = SeededRng::new(seed);
        let first = sgd_run(&m, &[0.7], &cfg(k), &mut rng).unwrap();
        let second = sgd_run(&m, first.final_theta(), &cfg(n), &mut rng).unwrap();
        prop_assert_eq!(whole.final_theta(), second.final_theta());
        let mut batches = first.batches.clone();
        batches.extend(second.batches.clone());
        prop_assert_eq!(whole.batches, batches);
    }

    #[test]
    fn fixed_points_stay_put(a in 0.2f64..5.0, eta in 0.01f64..1.0) {
        let m = LossModel::<f64>::prod2(LossKind::HalfSquared);
        let th = [a, 1.0 / a];
        prop_assume!(grad_loss(&m, &th).unwrap().iter().all(|g| *g == 0.0));
        let t = gd_run(&m, &th, &GdConfig::new(eta, 25)).unwrap();
        prop_assert!(t.points.iter().all(|p| p.theta == th.to_vec()));
    }

    #[test]
    fn stability_flag_scales(a in 0.3f64..3.0, eta in 0.01f64..1.0, k in -4i32..5) {
        let m = LossModel::<f64>::prod2(LossKind::Squared);
        let c = 2f64.powi(k);
        let th = [a, 1.0 / a];
        let base = spectral_stability(&m, &th, eta).unwrap();
        let scaled = spectral_stability(&m.scaled(c).unwrap(), &th, eta / c).unwrap();
        prop_assert_eq!(base.gd_stable(), scaled.gd_stable());
    }

    #[test]
    fn bases_are_orthonormal(a in 0.3f64..3.0, s in 0.1f64..4.0) {
        let mut rng = SeededRng::new(a.to_bits());
        let m = LossModel::new(
            Arc::new(LinearModel { dim: 3 }),
            Dataset::new(vec![vec![s, rng.normal(), rng.normal()]], vec![vec![0.0]]).unwrap(),
            LossKind::HalfSquared,
        ).unwrap();
        for (model, th) in [(LossModel::<f64>::prod2(LossKind::Squared), vec![a, 1.0 / a]), (m, vec![0.0; 3])] {
            let sp = tangent_normal_split(&model, &th, DEFAULT_RANK_TOL).unwrap();
            let mut cols: Vec<Vec<f64>> = (0..sp.tangent_dim()).map(|j| sp.tangent.column(j)).collect();
            cols.extend((0..sp.normal_dim()).map(|j| sp.normal.column(j)));
            for i in 0..cols.len() {
                for j in 0..cols.len() {
                    let d: f64 = cols[i].iter().zip(&cols[j]).map(|(x, y)| x * y).sum();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((d - expect).abs() <= 1e-10);
                }
            }
            prop_assert!(!sp.dim_mismatch);
            let h = hessian(&model, &th).unwrap();
            for t in &cols[..sp.tangent_dim()] {
                let ht = h.matvec(t).unwrap();
                let q: f64 = t.iter().zip(&ht).map(|(x, y)| x * y).sum();
                prop_assert!(q.abs() <= DEFAULT_RANK_TOL * h.max_abs().max(1.0));
            }
        }
    }
}
