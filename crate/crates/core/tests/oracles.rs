use std::sync::Arc;

use proptest::prelude::*;

use floatlab::floating_body::total_mass;
use floatlab::floating_function::{FloatingEvaluator, PointwiseFloating};
use floatlab::function::ConvexFunctionSpec;
use floatlab::geometry::{cap_weighted_volume, ellipsoid_cap_bounds, ConvexBodySpec, Halfspace};
use floatlab::quadrature::QuadratureSpec;
use floatlab::weights::WeightSpec;

mod common;
use common::{ellipsoid_sandwich, raster_floating_value, raster_tolerance};

#[test]
fn raster_oracle_matches_floating_function() {
    let delta = 1e-3;
    let psi = ConvexFunctionSpec::half_norm_squared(1).unwrap();
    let pf = PointwiseFloating::new(&psi, &WeightSpec::constant(2, 1.0).unwrap(), delta, &QuadratureSpec::default()).unwrap();
    let tol = raster_tolerance();
    for k in 0..11 {
        let x = -1.0 + 0.2 * k as f64;
        let oracle = raster_floating_value(x, delta);
        let value = pf.value(&[x]).unwrap();
        assert!((oracle - value).abs() <= tol, "x = {x}: raster {oracle} vs {value} (tol {tol})");
    }
}

#[test]
fn ellipsoid_cap_sandwich() {
    let run = ellipsoid_sandwich(1000, 51);
    assert!(run.slice_gap <= 1e-7, "slice integration differs by {}", run.slice_gap);
    assert!(run.violations.is_empty(), "{} violations, first {:?}", run.violations.len(), run.violations.first());
}

#[test]
fn lemma_example_values() {
    let (lo, hi) = ellipsoid_cap_bounds(&[1.0, 1.0], 0.5).unwrap();
    // C h^{3/2} with C = 2^{3/2} · 2 / 3, lower factor (1 - h/2)^{1/2}
    let upper = 2f64.powf(1.5) * 2.0 / 3.0 * 0.5f64.powf(1.5);
    assert!((hi - upper).abs() < 1e-12 && (hi - 2.0 / 3.0).abs() < 1e-12, "{hi}");
    assert!((lo - upper * 0.75f64.sqrt()).abs() < 1e-12, "{lo}");
    // circular segment of height ½
    let theta = 2.0 * (0.5f64).acos();
    let segment = 0.5 * (theta - theta.sin());
    assert!(lo <= segment && segment <= hi);
    assert!((segment - 0.61418).abs() < 1e-5);
}

fn radial_weight(dim: usize, k: f64) -> WeightSpec {
    WeightSpec::custom(dim, Arc::new(move |z: &[f64]| 1.0 + k * z.iter().map(|x| x * x).sum::<f64>()), Some(1.0), true).unwrap()
}

fn pentagon() -> ConvexBodySpec {
    ConvexBodySpec::vpolytope(vec![vec![1.0, 0.0], vec![0.3, 0.9], vec![-0.8, 0.6], vec![-0.7, -0.7], vec![0.4, -0.9]]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn caps_and_complements_add_up(angle in 0.0f64..std::f64::consts::TAU, a in -0.6f64..0.6, k in 0.0f64..2.0) {
        let q = QuadratureSpec::default();
        let body = pentagon();
        let w = radial_weight(2, k);
        let u = vec![angle.cos(), angle.sin()];
        let cap = cap_weighted_volume(&body, &Halfspace::new(u.clone(), a).unwrap(), &w, &q).unwrap();
        let rest = cap_weighted_volume(&body, &Halfspace::new(u.iter().map(|x| -x).collect(), -a).unwrap(), &w, &q).unwrap();
        let total = total_mass(&body, &w, &q).unwrap();
        let tol = 2.0 * (cap.error + rest.error + q.rel_tol * total);
        prop_assert!((cap.value + rest.value - total).abs() <= tol.max(1e-9), "{} + {} vs {}", cap.value, rest.value, total);
    }

    #[test]
    fn cap_mass_decreases_with_offset(angle in 0.0f64..std::f64::consts::TAU, a in -0.9f64..0.9, step in 1e-3f64..0.3, k in 0.0f64..2.0) {
        let q = QuadratureSpec::default();
        let body = pentagon();
        let w = radial_weight(2, k);
        let u = vec![angle.cos(), angle.sin()];
        let m1 = cap_weighted_volume(&body, &Halfspace::new(u.clone(), a).unwrap(), &w, &q).unwrap().value;
        let m2 = cap_weighted_volume(&body, &Halfspace::new(u, a + step).unwrap(), &w, &q).unwrap().value;
        prop_assert!(m2 <= m1 + 1e-12, "{} > {}", m2, m1);
    }

    #[test]
    fn ball_caps_are_rotation_invariant(theta in 0.0f64..std::f64::consts::PI, phi in 0.0f64..std::f64::consts::TAU, a in -0.8f64..0.8, k in 0.0f64..2.0) {
        let q = QuadratureSpec::default();
        let ball = ConvexBodySpec::unit_ball(3).unwrap();
        let w = radial_weight(3, k);
        let u = vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        let m = cap_weighted_volume(&ball, &Halfspace::new(u, a).unwrap(), &w, &q).unwrap();
        let r = cap_weighted_volume(&ball, &Halfspace::new(vec![0.0, 0.0, 1.0], a).unwrap(), &w, &q).unwrap();
        prop_assert!((m.value - r.value).abs() <= 1e-7 * r.value, "{} vs {}", m.value, r.value);
    }
}
