use std::sync::Arc;

use approx::assert_relative_eq;
use proptest::prelude::*;

use floatlab::convergence::extrapolate;
use floatlab::floating_body::{total_mass, weighted_floating_body, DirectionGrid};
use floatlab::floating_function::{deficit_integrals, FloatingEvaluator, PointwiseFloating, DEFAULT_TRUNCATION};
use floatlab::function::ConvexFunctionSpec;
use floatlab::geometry::{unit_ball_volume, ConvexBodySpec};
use floatlab::quadrature::{gauss_legendre, QuadratureSpec};
use floatlab::sconcave::{meridian_floating_function, SConcaveEvaluator, SConcaveFunctionSpec};
use floatlab::weights::WeightSpec;
use nalgebra::DMatrix;

fn quad() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn parabola(a: f64, b: f64, c: f64) -> ConvexFunctionSpec {
    ConvexFunctionSpec::quadratic(DMatrix::from_element(1, 1, a), vec![b], c).unwrap()
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn floating_bodies_are_nested(
        a in 0.6f64..1.8,
        b in 0.6f64..1.8,
        d in 1e-4f64..2e-2,
        grow in 1.05f64..4.0,
    ) {
        let k = ConvexBodySpec::ellipsoid(vec![0.0, 0.0], vec![a, b]).unwrap();
        let w = WeightSpec::constant(2, 1.0).unwrap();
        let grid = DirectionGrid::circle(48).unwrap();
        let small = weighted_floating_body(&k, &w, d, &grid, &quad()).unwrap();
        let large = weighted_floating_body(&k, &w, d * grow, &grid, &quad()).unwrap();
        for v in &large.vertices {
            prop_assert!(small.contains_tol(v, 1e-9));
        }
        prop_assert!(large.volume.value <= small.volume.value);
    }

    #[test]
    fn constant_weight_rescales_delta_for_bodies(eta in 0.2f64..5.0, d in 1e-4f64..1e-2, r in 0.5f64..2.0) {
        let k = ConvexBodySpec::ball(vec![0.1, -0.2], r).unwrap();
        let grid = DirectionGrid::circle(24).unwrap();
        let weighted = weighted_floating_body(&k, &WeightSpec::constant(2, eta).unwrap(), d, &grid, &quad()).unwrap();
        let plain = weighted_floating_body(&k, &WeightSpec::constant(2, 1.0).unwrap(), d / eta, &grid, &quad()).unwrap();
        for (x, y) in weighted.offsets.iter().zip(&plain.offsets) {
            prop_assert!((x - y).abs() < 1e-9, "{} vs {}", x, y);
        }
    }

    #[test]
    fn rotationally_symmetric_weight_gives_equal_offsets(d in 1e-3f64..5e-2, k2 in 0.0f64..2.0) {
        let ball = ConvexBodySpec::unit_ball(2).unwrap();
        let w = WeightSpec::custom(2, Arc::new(move |z: &[f64]| 1.0 + k2 * (z[0] * z[0] + z[1] * z[1])), Some(1.0), true).unwrap();
        let fb = weighted_floating_body(&ball, &w, d, &DirectionGrid::circle(12).unwrap(), &quad()).unwrap();
        let first = fb.offsets[0];
        for o in &fb.offsets {
            prop_assert!((o - first).abs() < 1e-7, "{} vs {}", o, first);
        }
    }

    #[test]
    fn floating_function_dominates_and_grows_with_delta(
        a in 0.5f64..3.0,
        b in -1.0f64..1.0,
        x in -1.5f64..1.5,
        d in 1e-4f64..5e-3,
        exponential in any::<bool>(),
    ) {
        let psi = parabola(a, b, 0.0);
        let w = if exponential { WeightSpec::exponential_height(2).unwrap() } else { WeightSpec::constant(2, 1.0).unwrap() };
        let small = PointwiseFloating::new(&psi, &w, d, &quad()).unwrap();
        let large = PointwiseFloating::new(&psi, &w, 2.0 * d, &quad()).unwrap();
        let (g1, g2) = (small.gap(&[x]).unwrap(), large.gap(&[x]).unwrap());
        prop_assert!(g1 >= 0.0);
        prop_assert!(g2 >= g1 - 1e-9 * g1.max(1.0), "{} < {}", g2, g1);
    }

    #[test]
    fn constant_weight_rescales_delta_for_functions(a in 0.5f64..3.0, eta in 0.25f64..4.0, x in -1.0f64..1.0, d in 1e-4f64..2e-3) {
        let psi = parabola(a, 0.2, 0.1);
        let weighted = PointwiseFloating::new(&psi, &WeightSpec::constant(2, eta).unwrap(), d, &quad()).unwrap();
        let plain = PointwiseFloating::new(&psi, &WeightSpec::constant(2, 1.0).unwrap(), d / eta, &quad()).unwrap();
        let (g1, g2) = (weighted.gap(&[x]).unwrap(), plain.gap(&[x]).unwrap());
        prop_assert!((g1 - g2).abs() <= 1e-8 * g2.max(1e-3), "{} vs {}", g1, g2);
    }

    #[test]
    fn function_deficit_below_weighted_l1(a in 0.5f64..3.0, b in -1.0f64..1.0, eta in 0.5f64..3.0, d in 1e-4f64..5e-3) {
        let psi = parabola(a, b, 0.0);
        let pf = PointwiseFloating::new(&psi, &WeightSpec::constant(2, eta).unwrap(), d, &quad()).unwrap();
        let di = deficit_integrals(&pf, &quad(), DEFAULT_TRUNCATION).unwrap();
        prop_assert!(di.i_f > 0.0);
        prop_assert!(di.i_f <= di.i_psi * (1.0 + 1e-9), "{} > {}", di.i_f, di.i_psi);
    }

    #[test]
    fn extrapolation_recovers_synthetic_limits(l in 0.1f64..10.0, a in -3.0f64..3.0, beta in 0.2f64..1.8) {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| {
            let d = 1e-2 * 0.25f64.powi(i);
            (d, l + a * d.powf(beta))
        }).collect();
        let fit = extrapolate(&pts).unwrap();
        prop_assert!((fit.limit - l).abs() / l < 1e-4, "{:?}", fit);
    }
}

#[test]
fn extrapolation_grid() {
    for l in [0.5, 2.0, 7.0] {
        for a in [-2.0, 0.5, 3.0] {
            for beta in [0.3, 0.7, 1.5] {
                let pts: Vec<(f64, f64)> = (0..5).map(|i| {
                    let d = 1e-2 * 0.25f64.powi(i);
                    (d, l + a * d.powf(beta))
                }).collect();
                let fit = extrapolate(&pts).unwrap();
                assert!((fit.limit - l).abs() / l < 1e-4, "L={l} a={a} beta={beta}: {fit:?}");
            }
        }
    }
}

/// `∫ f` by Gauss-Legendre in the radial variable.
fn integral_oracle(f: &SConcaveFunctionSpec) -> f64 {
    let rule = gauss_legendre(40);
    let n = f.dim();
    let shell = n as f64 * unit_ball_volume(n);
    rule.iter().map(|(t, w)| {
        let r = 0.5 * (t + 1.0);
        let mut x = vec![0.0; n];
        x[0] = r;
        0.5 * w * shell * r.powi(n as i32 - 1) * f.value(&x)
    }).sum::<f64>()
}

#[test]
fn lifted_volume_identity() {
    let q = quad();
    for (n, s) in [(1, 1), (1, 2), (2, 1)] {
        for f in [SConcaveFunctionSpec::paraboloid(n, s).unwrap(), SConcaveFunctionSpec::cone(n, s).unwrap()] {
            let lift = f.lift();
            let w = WeightSpec::constant(n + s, 1.0).unwrap();
            let sliced = total_mass(&lift, &w, &q).unwrap();
            let expected = unit_ball_volume(s) * integral_oracle(&f);
            assert_relative_eq!(sliced, expected, max_relative = 1e-5);
            assert_relative_eq!(lift.volume(&q).unwrap().value, expected, max_relative = 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn sconcave_floating_function_below_f(x in -0.95f64..0.95, d in 1e-4f64..5e-3, s in 1usize..=2) {
        let f = SConcaveFunctionSpec::paraboloid(1, s).unwrap();
        let w = WeightSpec::rotational_constant(1 + s, s, 1.0).unwrap();
        let small = meridian_floating_function(&f, &w, d, 64, true, &quad()).unwrap();
        let large = meridian_floating_function(&f, &w, 2.0 * d, 64, true, &quad()).unwrap();
        let (vs, vl) = (small.value(&[x]).unwrap(), large.value(&[x]).unwrap());
        prop_assert!(vs <= f.value(&[x]) + 1e-12);
        prop_assert!(vl <= vs + 1e-12);
    }

    #[test]
    fn meridian_offsets_are_symmetric(theta in 0.0f64..std::f64::consts::FRAC_PI_2, d in 1e-4f64..1e-2) {
        let f = SConcaveFunctionSpec::paraboloid(1, 1).unwrap();
        let w = WeightSpec::rotational_constant(2, 1, 1.0).unwrap();
        let m = meridian_floating_function(&f, &w, d, 16, false, &quad()).unwrap();
        let a = m.offset(theta).unwrap();
        let b = m.offset(std::f64::consts::PI - theta).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }
}
