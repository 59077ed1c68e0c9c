use dyn_nn_lab::morse::{
    classify_function, find_critical_points, named_field, verify_classification_row, ArchSample, BoxDomain,
    FnScalarField, FunctionClass, ScalarField, SearchParams, TableRow,
};
use dyn_nn_lab::networks::Activation;
use dyn_nn_lab::SeededRng;
use proptest::prelude::*;

fn params() -> SearchParams {
    SearchParams::default()
}

#[test]
fn non_augmented_mlps_are_c1() {
    let s = ArchSample::Mlp { dims: vec![3, 2, 1], activation: Activation::Tanh };
    let r = verify_classification_row(&s, TableRow::NonAugmented, &mut SeededRng::new(11), 50, 2.0, &params()).unwrap();
    assert_eq!(r.c1, 50, "{r:?}");
}

#[test]
fn augmented_mlps_are_c1_or_c2() {
    let s = ArchSample::Mlp { dims: vec![1, 3, 1], activation: Activation::Tanh };
    let r = verify_classification_row(&s, TableRow::Augmented, &mut SeededRng::new(12), 50, 2.0, &params()).unwrap();
    assert!(r.all_passed(), "{r:?}");
}

#[test]
fn non_augmented_node_is_c1() {
    let s = ArchSample::Node { d: 2, m: 2, t_end: 1.0, steps: 20, degenerate: false };
    let r = verify_classification_row(&s, TableRow::NonAugmented, &mut SeededRng::new(13), 5, 1.0, &params()).unwrap();
    assert!(r.all_passed(), "{r:?}");
}

#[test]
fn reported_points_have_small_gradient() {
    let f = FnScalarField::new(2, |x: &[f64]| (x[0] * x[0] - 0.25) * (x[1] * x[1] - 0.25) + 0.1 * x[0]);
    let p = params();
    let s = find_critical_points(&f, &BoxDomain::cube(2, 1.0), &p, &mut SeededRng::new(4)).unwrap();
    assert!(!s.points.is_empty());
    for pt in &s.points {
        let g = f.gradient(&pt.location).unwrap();
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() <= p.grad_tol);
    }
    for w in s.points.windows(2) {
        assert!(w[0].location < w[1].location);
    }
}

#[test]
fn search_is_reproducible() {
    let f = named_field("xor").unwrap();
    let d = BoxDomain::cube(2, 2.0);
    let a = classify_function(f.as_ref(), &d, &params(), &mut SeededRng::new(9)).unwrap();
    let b = classify_function(f.as_ref(), &d, &params(), &mut SeededRng::new(9)).unwrap();
    assert_eq!(a, b);
}

fn quartic(c: f64, shift: f64, angle: f64) -> impl ScalarField<f64> {
    let (s, co) = angle.sin_cos();
    FnScalarField::new(2, move |x: &[f64]| {
        let u = co * x[0] - s * x[1];
        let v = s * x[0] + co * x[1];
        c * (u * u * u * u - u * u + 0.5 * v * v + 0.3 * u) + shift
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn verdict_invariant_under_shift_scale_rotation(c in 0.2f64..5.0, shift in -10.0f64..10.0, angle in 0.0f64..std::f64::consts::TAU) {
        let d = BoxDomain::cube(2, 1.5);
        let base = classify_function(&quartic(1.0, 0.0, 0.0), &d, &params(), &mut SeededRng::new(1)).unwrap();
        let moved = classify_function(&quartic(c, shift, 0.0), &d, &params(), &mut SeededRng::new(1)).unwrap();
        prop_assert_eq!(base.verdict, moved.verdict);
        prop_assert_eq!(base.critical_points.len(), moved.critical_points.len());
        for (a, b) in base.critical_points.iter().zip(&moved.critical_points) {
            let dist = a.location.iter().zip(&b.location).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            prop_assert!(dist <= params().merge_radius);
        }
        let big = BoxDomain::cube(2, 2.0);
        let r0 = classify_function(&quartic(1.0, 0.0, 0.0), &big, &params(), &mut SeededRng::new(2)).unwrap();
        let r1 = classify_function(&quartic(1.0, 0.0, angle), &big, &params(), &mut SeededRng::new(2)).unwrap();
        prop_assert_eq!(r0.verdict, r1.verdict);
    }

    #[test]
    fn monomial_degree_decides_class(n in 2i32..7) {
        let f = FnScalarField::new(1, move |x: &[f64]| x[0].powi(n));
        let r = classify_function(&f, &BoxDomain::cube(1, 1.0), &params(), &mut SeededRng::new(5)).unwrap();
        let expected = if n == 2 { FunctionClass::C2 } else { FunctionClass::C3 };
        prop_assert_eq!(r.verdict, expected);
    }
}
