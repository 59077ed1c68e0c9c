use std::sync::Arc;

use dyn_nn_lab::networks::{
    memory_report, ndde_forward, ndde_trajectory, node_forward, rk4_trajectory, BuiltinField, Delayed, FnField, Instantaneous,
    NetworkSpec, NeuralDdeSpec, NeuralOdeSpec, VectorField,
};
use dyn_nn_lab::{Matrix64, SeededRng};
use proptest::prelude::*;

fn random_matrix(r: usize, c: usize, rng: &mut SeededRng) -> Matrix64 {
    Matrix64::new(r, c, (0..r * c).map(|_| rng.normal()).collect()).unwrap()
}

/// Random ODE spec and the matching zero-delay DDE spec.
fn random_pair(seed: u64) -> (NeuralOdeSpec<f64>, NeuralDdeSpec<f64>, Vec<f64>) {
    let mut rng = SeededRng::new(seed);
    let d = 1 + rng.below(3);
    let m = d + rng.below(3);
    let q = 1 + rng.below(3);
    let field: Arc<dyn VectorField<f64>> = Arc::new(BuiltinField::from_id(&format!("tanh-net:{seed}"), m).unwrap());
    let (w, b) = (random_matrix(m, d, &mut rng), (0..m).map(|_| rng.normal()).collect::<Vec<_>>());
    let (wt, bt) = (random_matrix(q, m, &mut rng), (0..q).map(|_| rng.normal()).collect::<Vec<_>>());
    let t_end = rng.uniform_in(0.1, 3.0);
    let steps = 1 + rng.below(200);
    let ode = NeuralOdeSpec::new(w.clone(), b.clone(), wt.clone(), bt.clone(), field.clone(), t_end, steps).unwrap();
    let dde = NeuralDdeSpec::new(w, b, wt, bt, Arc::new(Instantaneous(field)), 0.0, t_end, steps).unwrap();
    let x = (0..d).map(|_| rng.normal()).collect();
    (ode, dde, x)
}

#[test]
fn exponential_problem_at_hundred_steps() {
    let f = BuiltinField::<f64>::from_id("linear:1", 1).unwrap();
    let h = rk4_trajectory(&f, &[1.0], 1.0, 100).unwrap();
    let err = (h[100][0] - 1f64.exp()).abs();
    assert!(err <= 1e-6, "{err}");
}

#[test]
fn zero_delay_equals_ode_on_random_specs() {
    for seed in 0..100 {
        let (ode, dde, x) = random_pair(seed);
        let a = node_forward(&ode, &x).unwrap();
        let b = ndde_forward(&dde, &x).unwrap();
        let gap = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(gap <= 1e-12, "spec {seed}: {gap}");
    }
}

/// Least-squares slope of log2(error) against log2(steps), negated.
fn observed_order(errors: &[(usize, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = errors.iter().map(|&(n, e)| ((n as f64).log2(), e.log2())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -sxy / sxx
}

#[test]
fn rk4_is_fourth_order() {
    // logistic growth with a closed-form solution
    let f = FnField::new(1, |_t: f64, h: &[f64]| vec![h[0] * (1.0 - h[0])]);
    let (h0, t) = (0.1f64, 3.0f64);
    let exact = 1.0 / (1.0 + (1.0 - h0) / h0 * (-t).exp());
    let errors: Vec<(usize, f64)> =
        [8, 16, 32, 64].iter().map(|&n| (n, (rk4_trajectory(&f, &[h0], t, n).unwrap()[n][0] - exact).abs())).collect();
    let p = observed_order(&errors);
    assert!(p >= 3.9, "order {p} from {errors:?}");
}

#[test]
fn delayed_decay_matches_method_of_steps_by_hand() {
    // x' = -x(t - 1), x = 1 on [-1, 0]: x(t) = 1 - t on [0, 1], then 1 - t + (t - 1)^2 / 2 on [1, 2]
    let field = Arc::new(Delayed(Arc::new(BuiltinField::<f64>::from_id("decay:1", 1).unwrap())));
    let spec = NeuralDdeSpec::identity_affine(field, 1.0, 2.0, 400).unwrap();
    let path = ndde_trajectory(&spec, &[1.0]).unwrap();
    let n = spec.effective_steps();
    for (k, h) in path.iter().enumerate() {
        let t = 2.0 * k as f64 / n as f64;
        let exact = if t <= 1.0 { 1.0 - t } else { 1.0 - t + 0.5 * (t - 1.0).powi(2) };
        assert!((h[0] - exact).abs() < 1e-10, "t = {t}: {} vs {exact}", h[0]);
    }
}

#[test]
fn json_node_matches_builtin() {
    let doc = r#"{"layer_dims": [2, 2, 2], "vector_field_id": "linear:0.5", "T": 2.0, "steps": 50}"#;
    let NetworkSpec::Node(spec) = NetworkSpec::<f64>::from_json_str(doc).unwrap() else { panic!("expected a neural ODE") };
    let f: Arc<dyn VectorField<f64>> = Arc::new(BuiltinField::from_id("linear:0.5", 2).unwrap());
    let direct = NeuralOdeSpec::identity_affine(f, 2.0, 50).unwrap();
    let x = [1.0, -2.0];
    assert_eq!(node_forward(&spec, &x).unwrap(), node_forward(&direct, &x).unwrap());
    assert!((node_forward(&spec, &x).unwrap()[1] + 2.0 * 1f64.exp()).abs() < 1e-6);
}

#[test]
fn memory_product_example() {
    let r = memory_report(2.0, 0.1, None).unwrap();
    assert!((r.product() - 0.2).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_delay_equals_ode(seed in any::<u64>()) {
        let (ode, dde, x) = random_pair(seed);
        let a = node_forward(&ode, &x).unwrap();
        let b = ndde_forward(&dde, &x).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
    }

    #[test]
    fn linear_flow_is_exponential(a in -2.0f64..2.0, h0 in -3.0f64..3.0, t in 0.1f64..2.0) {
        let f = BuiltinField::<f64>::from_id(&format!("linear:{a}"), 1).unwrap();
        let h = rk4_trajectory(&f, &[h0], t, 200).unwrap();
        let exact = h0 * (a * t).exp();
        prop_assert!((h[200][0] - exact).abs() <= 1e-8 * exact.abs().max(1.0));
    }

    #[test]
    fn zero_field_is_identity_map(seed in any::<u64>(), d in 1usize..5) {
        let mut rng = SeededRng::new(seed);
        let f: Arc<dyn VectorField<f64>> = Arc::new(BuiltinField::from_id("zero", d).unwrap());
        let spec = NeuralOdeSpec::identity_affine(f, 1.0, 10).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        prop_assert_eq!(node_forward(&spec, &x).unwrap(), x);
    }

    #[test]
    fn halving_the_step_shrinks_the_error(a in 0.2f64..1.5) {
        let f = BuiltinField::<f64>::from_id(&format!("decay:{a}"), 1).unwrap();
        let exact = (-a * 2.0f64).exp();
        let e1 = (rk4_trajectory(&f, &[1.0], 2.0, 10).unwrap()[10][0] - exact).abs();
        let e2 = (rk4_trajectory(&f, &[1.0], 2.0, 20).unwrap()[20][0] - exact).abs();
        prop_assert!(e2 < e1 / 10.0);
    }
}
