//! δ-sweeps of the deficit ratios, extrapolation to `δ → 0`, verdicts against
//! the affine surface area limits and the random polytope Monte-Carlo check.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asa::{asa_body_p, asa_exponential, asa_sconcave, asa_weighted, constant, ConstantKind};
use crate::error::{invalid, Error, Result};
use crate::floating_body::{weighted_floating_body, DirectionGrid};
use crate::floating_function::{deficit_integrals, PointwiseFloating};
use crate::function::ConvexFunctionSpec;
use crate::geometry::{convex_hull_2d, polygon_area, ConvexBodySpec, ConvexSet, Hull3};
use crate::quadrature::{mean_estimate, stream_rng, Estimate, QuadratureSpec};
use crate::roots::{bisect, brent_min, RootOptions};
use crate::sconcave::{meridian_floating_function, sconcave_deficit, sconcave_floating_function, SConcaveFunctionSpec};
use crate::weights::{WeightKind, WeightSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentTag {
    /// Volume deficit of the (weighted) floating body of a convex body.
    Eq12,
    Theorem31,
    Theorem32,
    Proposition31,
    Proposition32,
    Theorem33,
    /// Random polytopes.
    EqRandom,
}

impl ExperimentTag {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Eq12 => "eq 1.2",
            Self::Theorem31 => "theorem 3.1",
            Self::Theorem32 => "theorem 3.2",
            Self::Proposition31 => "proposition 3.1",
            Self::Proposition32 => "proposition 3.2",
            Self::Theorem33 => "theorem 3.3",
            Self::EqRandom => "eq random",
        }
    }
}

/// Which deficit of a log-concave function is swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionDeficit {
    /// `∫ (f - f_δ)`
    Integral,
    /// `∫ |ψ_δ - ψ| e^{-ψ}`
    WeightedL1,
}

#[derive(Clone, Debug)]
pub enum ExperimentSpec {
    Body { body: ConvexBodySpec, weight: WeightSpec, directions: usize },
    Function { psi: ConvexFunctionSpec, weight: WeightSpec, deficit: FunctionDeficit, truncation: f64 },
    SConcave { f: SConcaveFunctionSpec, weight: WeightSpec, angles: usize, refine: bool },
}

/// Analytic limit `constant × functional`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub constant: f64,
    pub functional: f64,
    pub functional_error: f64,
    pub value: f64,
}

impl ExperimentSpec {
    pub fn tag(&self) -> ExperimentTag {
        match self {
            Self::Body { .. } => ExperimentTag::Eq12,
            Self::Function { weight, deficit, .. } => match (weight.is_exponential_height(), deficit) {
                (false, FunctionDeficit::Integral) => ExperimentTag::Theorem31,
                (true, FunctionDeficit::Integral) => ExperimentTag::Theorem32,
                (false, FunctionDeficit::WeightedL1) => ExperimentTag::Proposition31,
                (true, FunctionDeficit::WeightedL1) => ExperimentTag::Proposition32,
            },
            Self::SConcave { .. } => ExperimentTag::Theorem33,
        }
    }

    /// Exponent `e` of the normalisation `δ^e`.
    pub fn exponent(&self) -> f64 {
        match self {
            Self::Body { body, .. } => 2.0 / (body.dim() as f64 + 1.0),
            Self::Function { psi, .. } => 2.0 / (psi.dim() as f64 + 2.0),
            Self::SConcave { f, .. } => 2.0 / (f.dim() + f.order() + 1) as f64,
        }
    }

    /// Checks dimensions and weight compatibility.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Body { body, weight, directions } => {
                if weight.ambient_dim() != body.dim() {
                    return invalid("weight and body dimensions differ");
                }
                if weight.is_exponential_height() || matches!(weight.kind(), WeightKind::Rotational { .. }) {
                    return Err(Error::IncompatibleWeight("body experiments take constant or custom weights".into()));
                }
                if !(2..=3).contains(&body.dim()) || *directions < 6 {
                    return invalid("body experiments need dimension 2 or 3 and at least 6 directions");
                }
            }
            Self::Function { psi, weight, truncation, .. } => {
                if weight.ambient_dim() != psi.dim() + 1 {
                    return invalid("weight must live on R^{n+1}");
                }
                if matches!(weight.kind(), WeightKind::Rotational { .. }) {
                    return Err(Error::IncompatibleWeight("rotational weights belong to s-concave experiments".into()));
                }
                if !(*truncation > 0.0) {
                    return invalid("truncation must be positive");
                }
            }
            Self::SConcave { f, weight, angles, .. } => {
                if weight.is_exponential_height() || !weight.is_rotational(f.order()) {
                    return Err(Error::IncompatibleWeight("s-concave experiments need a rotational weight".into()));
                }
                if weight.ambient_dim() != f.dim() + f.order() {
                    return invalid("weight must live on R^{n+s}");
                }
                if *angles < 4 {
                    return invalid("at least 4 meridian angles are needed");
                }
            }
        }
        Ok(())
    }

    /// Deficit at `delta`.
    pub fn deficit(&self, delta: f64, quad: &QuadratureSpec) -> Result<Estimate> {
        match self {
            Self::Body { body, weight, directions } => {
                let grid = DirectionGrid::new(body.dim(), *directions)?;
                let fb = weighted_floating_body(body, weight, delta, &grid, quad)?;
                let vol = weighted_volume(body, weight, quad)?;
                let inner = if weight.constant_value().is_some() { fb.smooth_volume() } else { fb.volume };
                Ok(Estimate { value: vol.value - inner.value, error: vol.error + inner.error })
            }
            Self::Function { psi, weight, deficit, truncation } => {
                let pf = PointwiseFloating::new(psi, weight, delta, quad)?;
                let d = deficit_integrals(&pf, quad, *truncation)?;
                Ok(match deficit {
                    FunctionDeficit::Integral => Estimate { value: d.i_f, error: d.tail_bound },
                    FunctionDeficit::WeightedL1 => Estimate { value: d.i_psi, error: d.tail_bound },
                })
            }
            Self::SConcave { f, weight, angles, refine } => {
                let meridian = f.dim() == 1 || (f.is_radial() && weight.constant_value().is_some());
                if meridian {
                    let m = meridian_floating_function(f, weight, delta, *angles, *refine, quad)?;
                    sconcave_deficit(&m, quad)
                } else {
                    let grid = DirectionGrid::new(f.dim() + f.order(), *angles)?;
                    let p = sconcave_floating_function(f, weight, delta, &grid, quad)?;
                    sconcave_deficit(&p, quad)
                }
            }
        }
    }

    /// `T = c × as`, with the constant and functional matching the experiment.
    pub fn target(&self, quad: &QuadratureSpec) -> Result<Target> {
        let (c, e) = match self {
            Self::Body { body, weight, .. } => {
                let n = body.dim();
                let eta = weight
                    .constant_value()
                    .ok_or_else(|| Error::Unsupported("limit of weighted bodies with non-constant weight".into()))?;
                let asa = if body.is_polytope() {
                    Estimate::exact(0.0)
                } else {
                    let r = asa_body_p(body, 1.0, quad)?;
                    Estimate { value: r.value, error: r.error }
                };
                let scale = eta.powf(-2.0 / (n as f64 + 1.0));
                (constant(ConstantKind::Body, n, 0), Estimate { value: scale * asa.value, error: scale * asa.error })
            }
            Self::Function { psi, weight, .. } => {
                let r = if weight.is_exponential_height() { asa_exponential(psi, quad)? } else { asa_weighted(psi, weight, quad)? };
                (constant(ConstantKind::Function, psi.dim(), 0), Estimate { value: r.value, error: r.error })
            }
            Self::SConcave { f, weight, .. } => {
                let r = asa_sconcave(f, weight, quad)?;
                (constant(ConstantKind::SConcave, f.dim(), f.order()), Estimate { value: r.value, error: r.error })
            }
        };
        Ok(Target { constant: c, functional: e.value, functional_error: e.error, value: c * e.value })
    }
}

fn weighted_volume(body: &ConvexBodySpec, w: &WeightSpec, quad: &QuadratureSpec) -> Result<Estimate> {
    match w.constant_value() {
        Some(eta) => {
            let v = body.volume(quad)?;
            Ok(Estimate { value: eta * v.value, error: eta * v.error })
        }
        None => crate::floating_body::total_mass(body, w, quad).map(Estimate::exact),
    }
}

/// Geometric δ-sequence `δ_i = δ₀ q^i`, `i < k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub delta0: f64,
    pub q: f64,
    pub k: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { delta0: 1e-2, q: 0.25, k: 5 }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return invalid(format!("sweep.delta0 must be positive, got {}", self.delta0));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return invalid(format!("sweep.q must lie in (0, 1), got {}", self.q));
        }
        if self.k < 3 {
            return invalid(format!("sweep.k must be at least 3, got {}", self.k));
        }
        Ok(())
    }

    pub fn deltas(&self) -> Vec<f64> {
        (0..self.k).map(|i| self.delta0 * self.q.powi(i as i32)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub delta: f64,
    pub deficit: f64,
    pub ratio: f64,
    pub ratio_err: f64,
}

/// Runs the deficit computation at every δ of the sweep. The absolute
/// quadrature tolerance is tightened to `1e-3 δ` at each point.
///
/// A failure at some δ aborts the sweep; the points computed before it are
/// returned inside [`Error::SweepAborted`].
pub fn delta_sweep(spec: &ExperimentSpec, sweep: &SweepSpec, quad: &QuadratureSpec) -> Result<Vec<SweepPoint>> {
    sweep.validate()?;
    spec.validate()?;
    let e = spec.exponent();
    let results: Vec<Result<SweepPoint>> = sweep
        .deltas()
        .par_iter()
        .map(|&delta| {
            let q = quad.clone().with_tolerances(quad.abs_tol.min(1e-3 * delta), quad.rel_tol);
            let d = spec.deficit(delta, &q)?;
            let norm = delta.powf(e);
            Ok(SweepPoint { delta, deficit: d.value, ratio: d.value / norm, ratio_err: d.error / norm })
        })
        .collect();
    let mut points = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => points.push(p),
            Err(source) => {
                return Err(Error::SweepAborted {
                    delta: sweep.deltas()[i],
                    completed: points.len(),
                    partial: points,
                    source: Box::new(source),
                })
            }
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    LeastSquares,
    Richardson,
    Constant,
}

/// `R(δ) ≈ limit + amplitude · δ^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub limit: f64,
    pub amplitude: f64,
    pub exponent: f64,
    /// Root mean square of the fit residuals.
    pub residual: f64,
    pub method: FitMethod,
}

fn linear_fit(points: &[(f64, f64)], beta: f64) -> (f64, f64, f64) {
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.powf(beta)).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let l = my - a * mx;
    let ss: f64 = xs.iter().zip(points).map(|(x, p)| (p.1 - l - a * x).powi(2)).sum();
    (l, a, (ss / m).sqrt())
}

const BETA_MIN: f64 = 0.1;
const BETA_MAX: f64 = 2.0;

/// Least-squares fit of `R = L + a δ^β`: a scan over `β ∈ [0.1, 2]` with a
/// linear solve for `(L, a)` at each `β`, refined by Brent's method. When the
/// residual does not depend on `β`, the last three points are used for a
/// Richardson step instead.
pub fn extrapolate(points: &[(f64, f64)]) -> Result<Fit> {
    if points.len() < 3 {
        return invalid(format!("extrapolation needs at least 3 points, got {}", points.len()));
    }
    if points.iter().any(|p| !(p.0 > 0.0) || !p.1.is_finite()) {
        return invalid("extrapolation needs positive deltas and finite ratios");
    }
    let scale = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let spread = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
        - points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    if spread <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
        let mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
        return Ok(Fit { limit: mean, amplitude: 0.0, exponent: 1.0, residual: 0.0, method: FitMethod::Constant });
    }
    let steps = 191;
    let grid: Vec<(f64, f64)> = (0..steps)
        .map(|i| {
            let b = BETA_MIN + (BETA_MAX - BETA_MIN) * i as f64 / (steps - 1) as f64;
            (b, linear_fit(points, b).2)
        })
        .collect();
    let (imin, _) = grid.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).unwrap();
    let rmax = grid.iter().map(|g| g.1).fold(0.0, f64::max);
    let rmin = grid[imin].1;
    if rmax - rmin <= 1e-9 * (rmin + 1e-300) {
        return Ok(richardson(points));
    }
    let lo = grid[imin.saturating_sub(1)].0;
    let hi = grid[(imin + 1).min(steps - 1)].0;
    let (beta, _) = brent_min(|b| Ok(linear_fit(points, b).2), lo, hi, 1e-13, 300)?;
    let beta = if linear_fit(points, beta).2 <= rmin { beta } else { grid[imin].0 };
    let (limit, amplitude, residual) = linear_fit(points, beta);
    Ok(Fit { limit, amplitude, exponent: beta, residual, method: FitMethod::LeastSquares })
}

/// Richardson step from the last three points of a geometric sequence.
fn richardson(points: &[(f64, f64)]) -> Fit {
    let m = points.len();
    let (p1, p2, p3) = (points[m - 3], points[m - 2], points[m - 1]);
    let rho = (p3.1 - p2.1) / (p2.1 - p1.1);
    let q = p3.0 / p2.0;
    if !(rho > 0.0 && rho < 1.0) || !(q > 0.0 && q < 1.0) {
        return Fit { limit: p3.1, amplitude: 0.0, exponent: f64::NAN, residual: (p3.1 - p2.1).abs(), method: FitMethod::Richardson };
    }
    let limit = (p3.1 - rho * p2.1) / (1.0 - rho);
    let exponent = rho.ln() / q.ln();
    let amplitude = (p3.1 - limit) / p3.0.powf(exponent);
    let residual = linear_fit(points, exponent).2;
    Fit { limit, amplitude, exponent, residual, method: FitMethod::Richardson }
}

/// Sweep, fit and verdict of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub tag: ExperimentTag,
    pub sweep: SweepSpec,
    pub exponent: f64,
    pub points: Vec<SweepPoint>,
    pub fit: Fit,
    pub target: Target,
    pub relative_error: f64,
    /// Fit residual relative to the target.
    pub uncertainty: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Deficits are nonnegative and nondecreasing in δ.
    pub monotone: bool,
    pub budgets: QuadratureSpec,
    pub wall_clock_s: f64,
}

/// Assembles the report: relative error `|L - T| / T` (absolute error when
/// `T = 0`) and pass/fail at `tolerance`.
pub fn theorem_verdict(
    tag: ExperimentTag,
    sweep: SweepSpec,
    exponent: f64,
    points: Vec<SweepPoint>,
    fit: Fit,
    target: Target,
    tolerance: f64,
    budgets: QuadratureSpec,
    wall_clock_s: f64,
) -> ConvergenceReport {
    let t = target.value;
    let denom = if t.abs() > 0.0 { t.abs() } else { 1.0 };
    let relative_error = (fit.limit - t).abs() / denom;
    let uncertainty = fit.residual / denom;
    let monotone = monotone_deficits(&points);
    ConvergenceReport {
        tag,
        sweep,
        exponent,
        points,
        fit,
        target,
        relative_error,
        uncertainty,
        tolerance,
        pass: relative_error.is_finite() && relative_error < tolerance,
        monotone,
        budgets,
        wall_clock_s,
    }
}

/// Nonnegative deficits that do not decrease with δ (the sweep runs from the
/// largest δ down).
pub fn monotone_deficits(points: &[SweepPoint]) -> bool {
    let mut sorted: Vec<&SweepPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    sorted.iter().all(|p| p.deficit >= 0.0) && sorted.windows(2).all(|w| w[1].deficit >= w[0].deficit)
}

/// Full pipeline: sweep, extrapolation, target and verdict.
pub fn run_experiment(spec: &ExperimentSpec, sweep: &SweepSpec, quad: &QuadratureSpec, tolerance: f64) -> Result<ConvergenceReport> {
    let start = Instant::now();
    let points = delta_sweep(spec, sweep, quad)?;
    let target = spec.target(quad)?;
    let data: Vec<(f64, f64)> = points.iter().map(|p| (p.delta, p.ratio)).collect();
    let fit = match extrapolate(&data) {
        Ok(f) => f,
        // infinite deficits: report the divergence instead of a fit
        Err(_) if data.iter().any(|p| p.1.is_infinite()) => {
            Fit { limit: f64::INFINITY, amplitude: f64::NAN, exponent: f64::NAN, residual: f64::INFINITY, method: FitMethod::Constant }
        }
        Err(e) => return Err(e),
    };
    Ok(theorem_verdict(spec.tag(), *sweep, spec.exponent(), points, fit, target, tolerance, quad.clone(), start.elapsed().as_secs_f64()))
}

/// Radius of the floating body of the unit disk: the chord at distance `r`
/// cuts a segment of area `arccos r - r √(1 - r²) = δ`.
pub fn disk_floating_radius(delta: f64) -> Result<f64> {
    if !(delta >= 0.0 && delta < 0.5 * std::f64::consts::PI) {
        return invalid(format!("disk floating body needs 0 <= δ < π/2, got {delta}"));
    }
    if delta == 0.0 {
        return Ok(1.0);
    }
    let seg = |r: f64| Ok(r.acos() - r * (1.0 - r * r).max(0.0).sqrt() - delta);
    bisect(seg, 0.0, 1.0, RootOptions { x_tol: 1e-16, f_tol: 0.0, max_iter: 200 })
}

/// Closed-form `(π - π r(δ)²) / δ^{2/3}` for the unit disk.
pub fn disk_ratio(delta: f64) -> Result<f64> {
    let r = disk_floating_radius(delta)?;
    Ok(std::f64::consts::PI * (1.0 - r) * (1.0 + r) / delta.powf(2.0 / 3.0))
}

/// Monte-Carlo estimate of `(vol K - E vol [K]_N) / (vol K / N)^{2/(n+1)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomPolytopeEstimate {
    pub ratio: f64,
    /// Normal-approximation 95% half-width of the ratio.
    pub half_width: f64,
    pub mean_deficit: f64,
    pub volume: f64,
    pub n_points: usize,
    pub trials: usize,
}

/// Samples `n_points` uniform points in `body` (rejection from the bounding
/// box) per trial and averages the missed volume of their convex hull. Trial
/// `i` draws from ChaCha stream `i` of `seed`; degenerate hulls are resampled.
pub fn random_polytope_deficit(
    body: &ConvexBodySpec,
    n_points: usize,
    trials: usize,
    seed: u64,
    quad: &QuadratureSpec,
) -> Result<RandomPolytopeEstimate> {
    use rand::RngExt;
    let n = body.dim();
    if !(2..=3).contains(&n) {
        return invalid("random polytopes are supported in dimensions 2 and 3");
    }
    if n_points < n + 1 {
        return invalid(format!("need at least {} points, got {n_points}", n + 1));
    }
    if trials < 2 {
        return invalid("need at least 2 trials");
    }
    let volume = body.volume(quad)?.value;
    let bbox = body.bounding_box();
    let deficits = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            for _attempt in 0..100 {
                let mut pts = Vec::with_capacity(n_points);
                while pts.len() < n_points {
                    let x: Vec<f64> = (0..n).map(|k| bbox.lo[k] + (bbox.hi[k] - bbox.lo[k]) * rng.random::<f64>()).collect();
                    if body.contains(&x) {
                        pts.push(x);
                    }
                }
                let v = if n == 2 {
                    polygon_area(&convex_hull_2d(&pts))
                } else {
                    match Hull3::new(&pts) {
                        Ok(h) => h.volume(),
                        Err(_) => 0.0,
                    }
                };
                if v > 0.0 {
                    return Ok(volume - v);
                }
            }
            Err(Error::InvalidInput("random hulls kept degenerating".into()))
        })
        .collect::<Result<Vec<f64>>>()?;
    let norm = (volume / n_points as f64).powf(2.0 / (n as f64 + 1.0));
    let ratios: Vec<f64> = deficits.iter().map(|d| d / norm).collect();
    let est = mean_estimate(&ratios);
    Ok(RandomPolytopeEstimate {
        ratio: est.value,
        half_width: 1.96 * est.error,
        mean_deficit: est.value * norm,
        volume,
        n_points,
        trials,
    })
}
