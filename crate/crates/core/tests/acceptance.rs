//! Acceptance run: one PASS/FAIL line per criterion. Targets are recomputed
//! here from closed forms, independently of the library constants.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use rand::RngExt;
use rayon::prelude::*;

use floatlab::asa::{asa_body_p, asa_lambda_sconcave, asa_sconcave, gauge_identity_check};
use floatlab::convergence::{
    extrapolate, random_polytope_deficit, run_experiment, theorem_verdict, ConvergenceReport, ExperimentSpec, Fit,
    FitMethod, FunctionDeficit, SweepPoint, SweepSpec,
};
use floatlab::floating_body::{total_mass, weighted_floating_body, DirectionGrid};
use floatlab::floating_function::{deficit_integrals, FloatingEvaluator, PointwiseFloating, DEFAULT_TRUNCATION};
use floatlab::function::ConvexFunctionSpec;
use floatlab::geometry::{unit_ball_volume, ConvexBodySpec};
use floatlab::quadrature::{gauss_legendre, stream_rng, QuadratureSpec};
use floatlab::sconcave::{meridian_floating_function, SConcaveFunctionSpec};
use floatlab::weights::WeightSpec;
use nalgebra::DMatrix;

mod common;

const DISK_TOL: f64 = 0.01;
const DISK_CLOSED_FORM_TOL: f64 = 1e-6;
const DISK_SECONDS: f64 = 10.0;
const GAUSSIAN_TOL: f64 = 0.02;
const GAUSSIAN_2D_TOL: f64 = 0.03;
/// Under `Φ_e` in one dimension the ratio is still pre-asymptotic above
/// `δ ≈ 1e-4`; the sweep starts below it.
const EXPONENTIAL_1D_SWEEP: SweepSpec = SweepSpec { delta0: 1e-2 / 256.0, q: 0.25, k: 6 };
const THEOREM_31_SECONDS: f64 = 60.0;
const THEOREM_32_SECONDS: f64 = 300.0;
const SCONCAVE_TOL: f64 = 0.03;
const SCONCAVE_SECONDS: f64 = 60.0;
const GAUGE_BALL_TOL: f64 = 0.005;
const GAUGE_ELLIPSE_TOL: f64 = 0.01;
const LAMBDA_TOL: f64 = 0.005;
const SANDWICH_CASES: u64 = 1000;
const SANDWICH_SLICE_TOL: f64 = 1e-7;
const EXTRAPOLATION_TOL: f64 = 1e-4;
const RANDOM_N: usize = 100_000;
const RANDOM_TRIALS: usize = 200;
const RANDOM_SEED: u64 = 2024;
const RANDOM_TOL: f64 = 0.1;

/// Values quoted in the criteria, printed next to the recomputed targets.
const QUOTED_DISK: f64 = 4.11706;
const QUOTED_T31: f64 = 1.64249;
const QUOTED_T32_1: f64 = 2.84486;
const QUOTED_T32_2: f64 = 7.08982;
const QUOTED_T33: f64 = 0.76967;

/// `c_2 = ½ (3 / vol_1(B^1))^{2/3}` with `vol_1(B^1) = 2`.
fn c2() -> f64 {
    0.5 * 1.5f64.powf(2.0 / 3.0)
}

/// `c_3 = ½ (4 / vol_2(B^2))^{1/2}` with `vol_2(B^2) = π`.
fn c3() -> f64 {
    0.5 * (4.0 / PI).sqrt()
}

/// `(s/2) ((n+s+1) / ((n+s) vol(B^{n+s})))^{2/(n+s+1)}` at `n = s = 1`.
fn c11() -> f64 {
    0.5 * (3.0 / (2.0 * PI)).powf(2.0 / 3.0)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome, String> {
    Ok(Outcome { pass, detail })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn quad() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn describe(r: &ConvergenceReport) -> String {
    let ratios: Vec<String> = r.points.iter().map(|p| format!("{:.5}", p.ratio)).collect();
    format!(
        "L={:.6} T={:.6} rel={:.2e} tol={} fit={:?} ratios=[{}]",
        r.fit.limit,
        r.target.value,
        r.relative_error,
        r.tolerance,
        r.fit.method,
        ratios.join(", ")
    )
}

/// Height `t` of the chord of the unit disk that cuts a segment of area `δ`,
/// from `acos t - t √(1 - t²) = δ` by bisection.
fn disk_chord_height(delta: f64) -> f64 {
    let area = |t: f64| t.acos() - t * (1.0 - t * t).sqrt();
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if area(mid) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_1() -> Result<Outcome, String> {
    let start = Instant::now();
    let spec = ExperimentSpec::Body {
        body: ConvexBodySpec::unit_ball(2).map_err(|e| e.to_string())?,
        weight: WeightSpec::constant(2, 1.0).map_err(|e| e.to_string())?,
        directions: 256,
    };
    let r = run_experiment(&spec, &SweepSpec::default(), &quad(), DISK_TOL).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let target = c2() * 2.0 * PI;
    let gap = r
        .points
        .iter()
        .map(|p| {
            let t = disk_chord_height(p.delta);
            rel(p.ratio, PI * (1.0 - t * t) / p.delta.powf(2.0 / 3.0))
        })
        .fold(0.0, f64::max);
    let err = rel(r.fit.limit, target);
    outcome(
        err < DISK_TOL && gap < DISK_CLOSED_FORM_TOL && secs < DISK_SECONDS,
        format!(
            "{} | c_2·2π={target:.6} (quoted {QUOTED_DISK}) rel={err:.2e} | closed form gap {gap:.1e} (tol {DISK_CLOSED_FORM_TOL}) | {secs:.1}s (< {DISK_SECONDS}s)",
            describe(&r)
        ),
    )
}

/// `I_f` and `I_ψ` reports from a single sweep of the pointwise floating
/// function.
fn function_reports(
    psi: &ConvexFunctionSpec,
    w: &WeightSpec,
    sweep: SweepSpec,
    tol: f64,
) -> Result<(ConvergenceReport, ConvergenceReport), String> {
    let start = Instant::now();
    let q = quad();
    let spec = |deficit| ExperimentSpec::Function { psi: psi.clone(), weight: w.clone(), deficit, truncation: DEFAULT_TRUNCATION };
    let (sf, sp) = (spec(FunctionDeficit::Integral), spec(FunctionDeficit::WeightedL1));
    let e = sf.exponent();
    let pairs = sweep
        .deltas()
        .par_iter()
        .map(|&delta| {
            let qd = q.clone().with_tolerances(q.abs_tol.min(1e-3 * delta), q.rel_tol);
            let pf = PointwiseFloating::new(psi, w, delta, &qd)?;
            let d = deficit_integrals(&pf, &qd, DEFAULT_TRUNCATION)?;
            let norm = delta.powf(e);
            let point = |v: f64| SweepPoint { delta, deficit: v, ratio: v / norm, ratio_err: d.tail_bound / norm };
            Ok((point(d.i_f), point(d.i_psi)))
        })
        .collect::<floatlab::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let report = |spec: &ExperimentSpec, points: Vec<SweepPoint>| -> Result<ConvergenceReport, String> {
        let data: Vec<(f64, f64)> = points.iter().map(|p| (p.delta, p.ratio)).collect();
        let fit = if data.iter().any(|p| !p.1.is_finite()) {
            Fit { limit: f64::INFINITY, amplitude: f64::NAN, exponent: f64::NAN, residual: f64::INFINITY, method: FitMethod::Constant }
        } else {
            extrapolate(&data).map_err(|e| e.to_string())?
        };
        let target = spec.target(&q).map_err(|e| e.to_string())?;
        Ok(theorem_verdict(spec.tag(), sweep, e, points, fit, target, tol, q.clone(), secs))
    };
    let (pf, pp): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok((report(&sf, pf)?, report(&sp, pp)?))
}

struct FunctionRuns {
    /// `(label, independent target, tolerance, I_f report, I_ψ report)`.
    runs: Vec<(&'static str, f64, f64, ConvergenceReport, ConvergenceReport)>,
    constant_seconds: f64,
    exponential_seconds: f64,
}

fn function_runs() -> Result<FunctionRuns, String> {
    let p1 = ConvexFunctionSpec::half_norm_squared(1).map_err(|e| e.to_string())?;
    let p2 = ConvexFunctionSpec::half_norm_squared(2).map_err(|e| e.to_string())?;
    let w = |eta: f64| WeightSpec::constant(2, eta).map_err(|e| e.to_string());
    let exp = |n: usize| WeightSpec::exponential_height(n + 1).map_err(|e| e.to_string());
    let t31 = c2() * (2.0 * PI).sqrt();
    let mut runs = Vec::new();
    let start = Instant::now();
    for (label, eta) in [("Φ≡1", 1.0), ("Φ≡4", 4.0)] {
        let (a, b) = function_reports(&p1, &w(eta)?, SweepSpec::default(), GAUSSIAN_TOL)?;
        runs.push((label, t31 * eta.powf(-2.0 / 3.0), GAUSSIAN_TOL, a, b));
    }
    let constant_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let (a, b) = function_reports(&p1, &exp(1)?, EXPONENTIAL_1D_SWEEP, GAUSSIAN_TOL)?;
    runs.push(("Φ_e n=1", c2() * (6.0 * PI).sqrt(), GAUSSIAN_TOL, a, b));
    let (a, b) = function_reports(&p2, &exp(2)?, SweepSpec::default(), GAUSSIAN_2D_TOL)?;
    runs.push(("Φ_e n=2", c3() * 4.0 * PI, GAUSSIAN_2D_TOL, a, b));
    Ok(FunctionRuns { runs, constant_seconds, exponential_seconds: start.elapsed().as_secs_f64() })
}

fn function_criterion(runs: &Result<FunctionRuns, String>, criterion: usize) -> Result<Outcome, String> {
    let runs = runs.as_ref().map_err(|e| e.clone())?;
    let (lo, hi, quoted, seconds, budget) = match criterion {
        2 => (0, 2, vec![QUOTED_T31, QUOTED_T31 * 4f64.powf(-2.0 / 3.0)], runs.constant_seconds, THEOREM_31_SECONDS),
        3 => (2, 4, vec![QUOTED_T32_1, QUOTED_T32_2], runs.exponential_seconds, THEOREM_32_SECONDS),
        _ => (0, 4, vec![QUOTED_T31, QUOTED_T31 * 4f64.powf(-2.0 / 3.0), QUOTED_T32_1, QUOTED_T32_2], f64::NAN, f64::INFINITY),
    };
    let mut pass = seconds.is_nan() || seconds < budget;
    let mut parts = Vec::new();
    for ((label, target, tol, r_f, r_psi), q) in runs.runs[lo..hi].iter().zip(&quoted) {
        let r = if criterion == 4 { r_psi } else { r_f };
        let err = rel(r.fit.limit, *target);
        let ok = err < *tol;
        pass &= ok;
        parts.push(format!("{label}: {} T_indep={target:.6} (quoted {q}) {}", describe(r), if ok { "ok" } else { "MISS" }));
    }
    if !seconds.is_nan() {
        parts.push(format!("{seconds:.1}s (< {budget}s)"));
    }
    outcome(pass, parts.join(" | "))
}

fn criterion_5() -> Result<Outcome, String> {
    let start = Instant::now();
    let spec = ExperimentSpec::SConcave {
        f: SConcaveFunctionSpec::paraboloid(1, 1).map_err(|e| e.to_string())?,
        weight: WeightSpec::rotational_constant(2, 1, 1.0).map_err(|e| e.to_string())?,
        angles: 64,
        refine: true,
    };
    let r = run_experiment(&spec, &SweepSpec::default(), &quad(), SCONCAVE_TOL).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    // as^1(1 - x²) = ∫ 2^{1/3} dx over [-1, 1]
    let target = c11() * 2.0 * 2f64.powf(1.0 / 3.0);
    let err = rel(r.fit.limit, target);
    outcome(
        err < SCONCAVE_TOL && secs < SCONCAVE_SECONDS,
        format!("{} | T_indep={target:.6} (quoted {QUOTED_T33}) rel={err:.2e} | {secs:.1}s (< {SCONCAVE_SECONDS}s)", describe(&r)),
    )
}

fn criterion_6() -> Result<Outcome, String> {
    let q = quad();
    let ball = ConvexBodySpec::unit_ball(2).map_err(|e| e.to_string())?;
    let ellipse = ConvexBodySpec::ellipsoid(vec![0.0, 0.0], vec![2.0, 1.0]).map_err(|e| e.to_string())?;
    let (bl, br) = gauge_identity_check(&ball, &q).map_err(|e| e.to_string())?;
    let (el, er) = gauge_identity_check(&ellipse, &q).map_err(|e| e.to_string())?;
    let four_pi = 4.0 * PI;
    let (e1, e2, e3) = (rel(bl.value, four_pi), rel(br.value, four_pi), rel(el.value, er.value));
    outcome(
        e1 < GAUGE_BALL_TOL && e2 < GAUGE_BALL_TOL && e3 < GAUGE_ELLIPSE_TOL,
        format!(
            "disk lhs={:.6} rhs={:.6} vs 4π (rel {e1:.1e}, {e2:.1e}; tol {GAUGE_BALL_TOL}) | ellipse (2,1) lhs={:.6} rhs={:.6} rel {e3:.1e} (tol {GAUGE_ELLIPSE_TOL})",
            bl.value, br.value, el.value, er.value
        ),
    )
}

fn criterion_7() -> Result<Outcome, String> {
    let q = quad();
    let f = SConcaveFunctionSpec::paraboloid(1, 1).map_err(|e| e.to_string())?;
    let w = WeightSpec::rotational_constant(2, 1, 1.0).map_err(|e| e.to_string())?;
    let a = asa_lambda_sconcave(&f, 1.0 / 3.0, &q).map_err(|e| e.to_string())?.value;
    let b = 0.5 * asa_sconcave(&f, &w, &q).map_err(|e| e.to_string())?.value;
    let lift = f.lift().to_body().map_err(|e| e.to_string())?;
    let c = 0.25 * asa_body_p(&lift, 1.0, &q).map_err(|e| e.to_string())?.value;
    let expect = 2f64.powf(1.0 / 3.0);
    let worst = [rel(a, b), rel(a, c), rel(b, c), rel(a, expect)].into_iter().fold(0.0, f64::max);
    outcome(
        worst < LAMBDA_TOL,
        format!("as_λ={a:.6} ½as^1={b:.6} ¼as_1(K_f)={c:.6} 2^(1/3)={expect:.6} worst rel {worst:.1e} (tol {LAMBDA_TOL})"),
    )
}

fn criterion_8() -> Result<Outcome, String> {
    let run = common::ellipsoid_sandwich(SANDWICH_CASES, 51);
    outcome(
        run.violations.is_empty() && run.slice_gap <= SANDWICH_SLICE_TOL,
        format!(
            "{} caps, {} violations, slice cross-check gap {:.1e} (tol {SANDWICH_SLICE_TOL})",
            run.cases,
            run.violations.len(),
            run.slice_gap
        ),
    )
}

fn parabola(a: f64, b: f64, c: f64) -> ConvexFunctionSpec {
    ConvexFunctionSpec::quadratic(DMatrix::from_element(1, 1, a), vec![b], c).unwrap()
}

/// `∫ f` by Gauss-Legendre in the radial variable.
fn radial_integral(f: &SConcaveFunctionSpec) -> f64 {
    let n = f.dim();
    let shell = n as f64 * unit_ball_volume(n);
    gauss_legendre(40)
        .iter()
        .map(|(t, w)| {
            let r = 0.5 * (t + 1.0);
            let mut x = vec![0.0; n];
            x[0] = r;
            0.5 * w * shell * r.powi(n as i32 - 1) * f.value(&x)
        })
        .sum()
}

fn criterion_9() -> Result<Outcome, String> {
    let q = quad();
    let mut failures: Vec<String> = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    let unit = |n: usize| WeightSpec::constant(n, 1.0).unwrap();
    for case in 0..6u64 {
        let mut rng = stream_rng(901, case);
        let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
        let (a, b, d, grow) = (u(0.6, 1.8), u(0.6, 1.8), u(1e-4, 2e-2), u(1.05, 4.0));
        let k = ConvexBodySpec::ellipsoid(vec![0.0, 0.0], vec![a, b]).unwrap();
        let grid = DirectionGrid::circle(48).unwrap();
        let small = weighted_floating_body(&k, &unit(2), d, &grid, &q).unwrap();
        let large = weighted_floating_body(&k, &unit(2), d * grow, &grid, &q).unwrap();
        check("nesting", large.vertices.iter().all(|v| small.contains_tol(v, 1e-9)) && large.volume.value <= small.volume.value);

        let (eta, r) = (u(0.2, 5.0), u(0.5, 2.0));
        let ball = ConvexBodySpec::ball(vec![0.1, -0.2], r).unwrap();
        let g24 = DirectionGrid::circle(24).unwrap();
        let wb = weighted_floating_body(&ball, &WeightSpec::constant(2, eta).unwrap(), d, &g24, &q).unwrap();
        let pb = weighted_floating_body(&ball, &unit(2), d / eta, &g24, &q).unwrap();
        check("body scaling", wb.offsets.iter().zip(&pb.offsets).all(|(x, y)| (x - y).abs() < 1e-9));

        let (a, bb, x, df) = (u(0.5, 3.0), u(-1.0, 1.0), u(-1.5, 1.5), u(1e-4, 2e-3));
        let psi = parabola(a, bb, 0.1);
        let wf = PointwiseFloating::new(&psi, &WeightSpec::constant(2, eta).unwrap(), df, &q).unwrap();
        let pf = PointwiseFloating::new(&psi, &unit(2), df / eta, &q).unwrap();
        let (g1, g2) = (wf.gap(&[x]).unwrap(), pf.gap(&[x]).unwrap());
        check("function scaling", (g1 - g2).abs() <= 1e-8 * g2.max(1e-3));

        for w in [unit(2), WeightSpec::exponential_height(2).unwrap()] {
            let lo = PointwiseFloating::new(&psi, &w, df, &q).unwrap().gap(&[x]).unwrap();
            let hi = PointwiseFloating::new(&psi, &w, 2.0 * df, &q).unwrap().gap(&[x]).unwrap();
            check("ψ_δ ≥ ψ", lo >= 0.0 && hi >= lo - 1e-9 * lo.max(1.0));
        }

        if case < 3 {
            let pf = PointwiseFloating::new(&psi, &WeightSpec::constant(2, eta).unwrap(), df, &q).unwrap();
            let di = deficit_integrals(&pf, &q, DEFAULT_TRUNCATION).unwrap();
            check("I_f ≤ I_ψ", di.i_f > 0.0 && di.i_f <= di.i_psi * (1.0 + 1e-9));
        }

        let k2 = u(0.0, 2.0);
        let w = WeightSpec::custom(2, Arc::new(move |z: &[f64]| 1.0 + k2 * (z[0] * z[0] + z[1] * z[1])), Some(1.0), true).unwrap();
        let fb = weighted_floating_body(&ConvexBodySpec::unit_ball(2).unwrap(), &w, u(1e-3, 5e-2), &DirectionGrid::circle(12).unwrap(), &q)
            .unwrap();
        check("rotational offsets", fb.offsets.iter().all(|o| (o - fb.offsets[0]).abs() < 1e-7));

        let theta = u(0.0, std::f64::consts::FRAC_PI_2);
        let f = SConcaveFunctionSpec::paraboloid(1, 1).unwrap();
        let m = meridian_floating_function(&f, &WeightSpec::rotational_constant(2, 1, 1.0).unwrap(), u(1e-4, 1e-2), 16, false, &q).unwrap();
        check("rotational offsets", (m.offset(theta).unwrap() - m.offset(PI - theta).unwrap()).abs() < 1e-9);
    }
    for (n, s) in [(1, 1), (1, 2), (2, 1)] {
        for f in [SConcaveFunctionSpec::paraboloid(n, s).unwrap(), SConcaveFunctionSpec::cone(n, s).unwrap()] {
            let lift = f.lift();
            let expected = unit_ball_volume(s) * radial_integral(&f);
            let sliced = total_mass(&lift, &unit(n + s), &q).unwrap();
            check("s-concave volume identity", rel(sliced, expected) < 1e-5 && rel(lift.volume(&q).unwrap().value, expected) < 1e-8);
        }
    }
    let mut worst: f64 = 0.0;
    for l in [0.5, 2.0, 7.0] {
        for a in [-2.0, 0.5, 3.0] {
            for beta in [0.3, 0.7, 1.5] {
                let pts: Vec<(f64, f64)> = SweepSpec::default().deltas().into_iter().map(|d| (d, l + a * d.powf(beta))).collect();
                worst = worst.max(rel(extrapolate(&pts).map_err(|e| e.to_string())?.limit, l));
            }
        }
    }
    check("extrapolator grid", worst < EXTRAPOLATION_TOL);
    failures.dedup();
    let detail = if failures.is_empty() {
        format!("all suites hold; extrapolator worst rel {worst:.1e} (tol {EXTRAPOLATION_TOL})")
    } else {
        format!("failing: {}", failures.join(", "))
    };
    outcome(failures.is_empty(), detail)
}

fn criterion_10() -> Result<Outcome, String> {
    let delta = 1e-3;
    let psi = ConvexFunctionSpec::half_norm_squared(1).map_err(|e| e.to_string())?;
    let pf = PointwiseFloating::new(&psi, &WeightSpec::constant(2, 1.0).map_err(|e| e.to_string())?, delta, &quad())
        .map_err(|e| e.to_string())?;
    let tol = common::raster_tolerance();
    let worst = (0..11)
        .into_par_iter()
        .map(|k| {
            let x = -1.0 + 0.2 * k as f64;
            Ok((common::raster_floating_value(x, delta) - pf.value(&[x])?).abs())
        })
        .collect::<floatlab::Result<Vec<f64>>>()
        .map_err(|e| e.to_string())?
        .into_iter()
        .fold(0.0, f64::max);
    outcome(worst <= tol, format!("11 probes, worst |raster - ψ_δ| = {worst:.2e} (tol {tol:.2e})"))
}

fn criterion_11() -> Result<Outcome, String> {
    let start = Instant::now();
    let disk = ConvexBodySpec::unit_ball(2).map_err(|e| e.to_string())?;
    let est = random_polytope_deficit(&disk, RANDOM_N, RANDOM_TRIALS, RANDOM_SEED, &quad()).map_err(|e| e.to_string())?;
    let target = c2() * 2.0 * PI;
    let err = rel(est.ratio, target);
    let covers = (est.ratio - target).abs() <= est.half_width;
    outcome(
        err < RANDOM_TOL && covers,
        format!(
            "N={RANDOM_N} trials={RANDOM_TRIALS} ratio={:.4} ± {:.4} T={target:.6} (quoted {QUOTED_DISK}) rel={err:.2e} (tol {RANDOM_TOL}) CI covers: {covers} | {:.1}s",
            est.ratio,
            est.half_width,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Result<Outcome, String>)> = Vec::new();
    let mut record = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Result<Outcome, String>| {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let line = match &r {
            Ok(o) => format!("criterion {id:>2} [{name}]: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail),
            Err(e) => format!("criterion {id:>2} [{name}]: FAIL error: {e}"),
        };
        println!("{line}");
        results.push((id, name, r));
    };
    record(1, "eq 1.2 unit disk", &mut criterion_1);
    let runs = function_runs();
    record(2, "theorem 3.1", &mut || function_criterion(&runs, 2));
    record(3, "theorem 3.2", &mut || function_criterion(&runs, 3));
    record(4, "propositions 3.1/3.2", &mut || function_criterion(&runs, 4));
    record(5, "theorem 3.3", &mut criterion_5);
    record(6, "gauge identity", &mut criterion_6);
    record(7, "lambda consistency", &mut criterion_7);
    record(8, "cap sandwich", &mut criterion_8);
    record(9, "property suites", &mut criterion_9);
    record(10, "raster oracle", &mut criterion_10);
    record(11, "random polytopes", &mut criterion_11);
    let failed: Vec<String> =
        results.iter().filter(|(_, _, r)| !matches!(r, Ok(o) if o.pass)).map(|(id, _, _)| id.to_string()).collect();
    println!("acceptance: {} of {} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
