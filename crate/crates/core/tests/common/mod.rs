//! Oracles shared by the oracle and acceptance targets.
#![allow(dead_code)]

use rand::RngExt;

use floatlab::geometry::{cap_weighted_volume, ellipsoid_cap_bounds, slice_cap_mass, ConvexBodySpec, Halfspace};
use floatlab::quadrature::{stream_rng, QuadratureSpec};
use floatlab::weights::WeightSpec;

/// Pixel side of the raster.
pub const PIXEL: f64 = 2e-5;
pub const SLOPE_STEP: f64 = 5e-4;
pub const SLOPE_HALF_WIDTH: f64 = 0.05;

/// Each column miscounts at most one pixel at either end; the gap moves by
/// Δm / chord and the chord spans the same columns, so |Δg| <= 2 p. The slope
/// grid loses at most `step² / 8`.
pub fn raster_tolerance() -> f64 {
    2.0 * PIXEL + 0.125 * SLOPE_STEP * SLOPE_STEP + 1e-8
}

/// Pixel count of the region of `epi(x²/2)` below the tangent at `v` lifted by
/// `g`, on the lattice of pixel centres `((i + ½) p, (j + ½) p)`.
pub fn raster_mass(v: f64, g: f64) -> f64 {
    let line = |x: f64| v * x - 0.5 * v * v + g;
    let half = (2.0 * g).sqrt();
    let i0 = ((v - half) / PIXEL - 0.5).floor() as i64 - 1;
    let i1 = ((v + half) / PIXEL - 0.5).ceil() as i64 + 1;
    let mut count = 0i64;
    for i in i0..=i1 {
        let x = (i as f64 + 0.5) * PIXEL;
        let (lo, hi) = (0.5 * x * x, line(x));
        if hi < lo {
            continue;
        }
        let j0 = (lo / PIXEL - 0.5).ceil() as i64;
        let j1 = (hi / PIXEL - 0.5).floor() as i64;
        count += (j1 - j0 + 1).max(0);
    }
    count as f64 * PIXEL * PIXEL
}

/// Largest lift `g` of the tangent line at slope `v` whose raster cut mass
/// stays at most `delta`.
pub fn raster_lift(v: f64, delta: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if raster_mass(v, mid) <= delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Upper envelope at `x` of the admissible lines with slopes near `x`.
pub fn raster_floating_value(x: f64, delta: f64) -> f64 {
    let steps = (2.0 * SLOPE_HALF_WIDTH / SLOPE_STEP).round() as i64;
    (0..=steps)
        .map(|k| {
            let v = x - SLOPE_HALF_WIDTH + k as f64 * SLOPE_STEP;
            v * x - 0.5 * v * v + raster_lift(v, delta)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// A random ellipsoid cap `(axes, h, lower, volume, upper)` that escaped the
/// sandwich bounds.
pub type Violation = (Vec<f64>, f64, f64, f64, f64);

pub struct SandwichRun {
    pub cases: u64,
    pub violations: Vec<Violation>,
    /// Largest relative gap between the cap quadrature and slice integration.
    pub slice_gap: f64,
}

/// Random ellipsoid caps in dimension 2 or 3 against the cap-volume bounds;
/// every 50th case is also integrated slice by slice.
pub fn ellipsoid_sandwich(cases: u64, seed: u64) -> SandwichRun {
    let q = QuadratureSpec::default();
    let mut violations = Vec::new();
    let mut slice_gap: f64 = 0.0;
    for case in 0..cases {
        let mut rng = stream_rng(seed, case);
        let n = if rng.random::<bool>() { 2 } else { 3 };
        let axes: Vec<f64> = (0..n).map(|_| 0.2 + 2.8 * rng.random::<f64>()).collect();
        let an = axes[n - 1];
        let h = an * rng.random::<f64>().max(1e-6);
        let e = ConvexBodySpec::ellipsoid(vec![0.0; n], axes.clone()).unwrap();
        let mut u = vec![0.0; n];
        u[n - 1] = 1.0;
        let cut = Halfspace::new(u, an - h).unwrap();
        let w = WeightSpec::constant(n, 1.0).unwrap();
        let v = cap_weighted_volume(&e, &cut, &w, &q).unwrap();
        let (lo, hi) = ellipsoid_cap_bounds(&axes, h).unwrap();
        let slack = v.error + q.rel_tol * v.value.abs() + q.abs_tol;
        if v.value < lo - slack || v.value > hi + slack {
            violations.push((axes.clone(), h, lo, v.value, hi));
        }
        if case % 50 == 0 {
            let sliced = slice_cap_mass(&e, &cut, &w, &q).unwrap();
            slice_gap = slice_gap.max((sliced.value - v.value).abs() / v.value.max(1e-12));
        }
    }
    SandwichRun { cases, violations, slice_gap }
}
