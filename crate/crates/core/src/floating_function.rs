//! Weighted floating functions `ψ_δ` of convex functions and their deficits.

use std::sync::Arc;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asa::constant_c;
use crate::error::{invalid, Error, Result};
use crate::function::{AffinePiece, ConvexFunctionSpec, FunctionKind};
use crate::geometry::{convex_hull_2d, sphere_area, Hull3};
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::gamma_ur;

use crate::quadrature::{composite_rule, gauss_legendre, integrate_adaptive, integrate_adaptive_vec, integrate_piecewise, QuadratureSpec};
use crate::roots::{illinois, newton_bracketed, scan_min, RootOptions};
use crate::weights::WeightSpec;

/// Default truncation level `T`: the domain is cut to `{ψ <= ψ_min + T}`.
pub const DEFAULT_TRUNCATION: f64 = 40.0;

/// Integrals over the cut region `R = {ℓ > ψ}` of the line `ℓ = <v, ·> - c`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutIntegrals {
    /// `∫_R ∫_ψ^ℓ Φ(x, y) dy dx`
    pub mass: f64,
    /// `∫_R Φ(x, ℓ(x)) dx`, which equals `-∂mass/∂c`
    pub section_mass: f64,
    /// `∫_R x Φ(x, ℓ(x)) dx`
    pub section_moment: Vec<f64>,
    /// Section barycentre from weights rescaled by their maximum, which
    /// survives when `Φ(x, ℓ(x))` underflows on all of `R`.
    scaled_barycenter: Option<Vec<f64>>,
}

impl CutIntegrals {
    fn zero(n: usize) -> Self {
        Self { mass: 0.0, section_mass: 0.0, section_moment: vec![0.0; n], scaled_barycenter: None }
    }

    /// Φ-barycentre of the section of the epigraph by the cutting hyperplane.
    pub fn barycenter(&self) -> Option<Vec<f64>> {
        if self.section_mass > 0.0 && self.section_mass.is_normal() {
            return Some(self.section_moment.iter().map(|m| m / self.section_mass).collect());
        }
        self.scaled_barycenter.clone()
    }
}

/// A cutting line with its mass and section barycentre.
#[derive(Debug, Clone, PartialEq)]
pub struct CutSolution {
    pub piece: AffinePiece,
    pub integrals: CutIntegrals,
}

/// Cut-region integration for a fixed function and weight.
#[derive(Clone)]
pub struct CutSolver {
    psi: ConvexFunctionSpec,
    w: WeightSpec,
    quad: QuadratureSpec,
    limit: f64,
    dirs: Vec<(Vec<f64>, f64)>,
    radial: Arc<[(f64, f64)]>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl CutSolver {
    pub fn new(psi: &ConvexFunctionSpec, w: &WeightSpec, quad: &QuadratureSpec) -> Result<Self> {
        let n = psi.dim();
        if w.ambient_dim() != n + 1 {
            return Err(Error::InvalidWeight(format!("weight lives on R^{} but ψ on R^{n}", w.ambient_dim())));
        }
        quad.validate()?;
        let k = quad.points_per_axis.max(16);
        let dirs = match n {
            1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
            2 => (0..k)
                .map(|i| {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                    (vec![t.cos(), t.sin()], 2.0 * std::f64::consts::PI / k as f64)
                })
                .collect(),
            3 => {
                let mu = gauss_legendre(k / 2);
                let mut d = Vec::new();
                for &(m, wm) in mu.iter() {
                    let s = (1.0 - m * m).sqrt();
                    for j in 0..k {
                        let p = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                        d.push((vec![s * p.cos(), s * p.sin(), m], wm * 2.0 * std::f64::consts::PI / k as f64));
                    }
                }
                d
            }
            _ => return Err(Error::Unsupported(format!("cut integrals in dimension {n}"))),
        };
        Ok(Self {
            psi: psi.clone(),
            w: w.clone(),
            quad: quad.clone(),
            limit: psi.certificate_radius(1e3) + 1.0,
            dirs,
            radial: gauss_legendre(16),
        })
    }

    pub fn psi(&self) -> &ConvexFunctionSpec {
        &self.psi
    }

    pub fn weight(&self) -> &WeightSpec {
        &self.w
    }

    /// Maximiser of `<v, x> - ψ(x)` and the maximum `ψ*(v)`.
    pub fn peak(&self, v: &[f64]) -> Result<(Vec<f64>, f64)> {
        let n = self.psi.dim();
        let x = match self.psi.kind() {
            FunctionKind::Quadratic { a, b, .. } => {
                let rhs = DVector::from_iterator(n, v.iter().zip(b).map(|(p, q)| p - q));
                a.clone().lu().solve(&rhs).ok_or_else(|| Error::InvalidInput("singular quadratic".into()))?.as_slice().to_vec()
            }
            FunctionKind::PiecewiseAffine { pieces } => {
                // max <v, x> - t  subject to  t >= <s_i, x> - c_i
                let mut lp = Problem::new(OptimizationDirection::Maximize);
                let xs: Vec<_> = v.iter().map(|c| lp.add_var(*c, (-1e9, 1e9))).collect();
                let t = lp.add_var(-1.0, (f64::NEG_INFINITY, f64::INFINITY));
                for p in pieces {
                    let mut row: Vec<_> = xs.iter().zip(&p.slope).map(|(x, s)| (*x, -*s)).collect();
                    row.push((t, 1.0));
                    lp.add_constraint(row.as_slice(), ComparisonOp::Ge, -p.offset);
                }
                let sol = lp
                    .solve()
                    .map_err(|_| Error::DeltaUnreachable { sup: f64::INFINITY })?
                    .into_solution()
                    .map_err(|_| Error::InvalidInput("linear program interrupted".into()))?;
                let x: Vec<f64> = xs.iter().map(|x| sol.var_value(*x)).collect();
                if x.iter().any(|t| t.abs() > 5e8) {
                    return Err(Error::InfiniteCutMass);
                }
                x
            }
            _ if self.psi.is_smooth() => self.newton_peak(v)?,
            _ if n == 1 => {
                let r = self.limit;
                let (x, _) = scan_min(|t| Ok(self.psi.value(&[t]) - v[0] * t), -r, r, 4001, 1e-14)?;
                vec![x]
            }
            _ => self.compass_peak(v),
        };
        let val = dot(v, &x) - self.psi.value(&x);
        Ok((x, val))
    }

    fn newton_peak(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.psi.minimum().0.to_vec();
        let obj = |x: &[f64]| dot(v, x) - self.psi.value(x);
        let mut f = obj(&x);
        for _ in 0..100 {
            let g: Vec<f64> = self.psi.subgradient(&x).iter().zip(v).map(|(a, b)| b - a).collect();
            if g.iter().map(|t| t * t).sum::<f64>().sqrt() <= 1e-13 * (1.0 + dot(v, v).sqrt()) {
                break;
            }
            let h = self.psi.hessian(&x);
            let step = match h.clone().cholesky() {
                Some(ch) => ch.solve(&DVector::from_column_slice(&g)),
                None => DVector::from_column_slice(&g),
            };
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let y: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
                let fy = obj(&y);
                if fy >= f {
                    moved = fy > f || t == 1.0;
                    x = y;
                    f = fy;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        Ok(x)
    }

    fn compass_peak(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let obj = |x: &[f64]| self.psi.value(x) - dot(v, x);
        let mut x = self.psi.minimum().0.to_vec();
        let mut best = obj(&x);
        let mut step = 1.0;
        while step > 1e-13 {
            let mut improved = false;
            for i in 0..n {
                for s in [step, -step] {
                    x[i] += s;
                    let f = obj(&x);
                    if f < best {
                        best = f;
                        improved = true;
                    } else {
                        x[i] -= s;
                    }
                }
            }
            if improved {
                step *= 2.0;
            } else {
                step *= 0.5;
            }
        }
        x
    }

    #[inline]
    fn inner(&self, x: &[f64], lo: f64, hi: f64) -> f64 {
        self.w.vertical_integral(x, lo, hi)
    }

    #[inline]
    fn section_weight(&self, x: &[f64], y: f64, z: &mut Vec<f64>) -> f64 {
        z.clear();
        z.extend_from_slice(x);
        z.push(y);
        self.w.eval(z)
    }

    #[inline]
    fn log_section_weight(&self, x: &[f64], y: f64, z: &mut Vec<f64>) -> f64 {
        if self.w.is_exponential_height() {
            -y
        } else {
            self.section_weight(x, y, z).ln()
        }
    }

    /// Cut integrals for the line `<v, ·> - c` given its peak.
    pub fn integrals_with_peak(&self, v: &[f64], c: f64, peak: &(Vec<f64>, f64)) -> Result<CutIntegrals> {
        let n = v.len();
        let (xs, conj) = peak;
        let gap0 = conj - c;
        if !(gap0 > 0.0) {
            return Ok(CutIntegrals::zero(n));
        }
        let bounded_below = self.w.lower_bound().is_some();
        let gap = |x: &[f64]| dot(v, x) - c - self.psi.value(x);
        let argmin = self.psi.minimum().0;
        let reach = self.limit + xs.iter().zip(argmin).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        // root of the gap along o + t d, where gap(o) = g0 > 0
        let ray_root_from = |o: &[f64], g0: f64, d: &[f64], guess: f64| -> Result<f64> {
            let point = |t: f64| -> Vec<f64> { o.iter().zip(d).map(|(a, b)| a + t * b).collect() };
            let h = |t: f64| Ok(gap(&point(t)));
            let mut t = guess.max(1e-300);
            let mut ht = h(t)?;
            let (lo, hi, flo, fhi);
            if ht > 0.0 {
                let mut prev = (t, ht);
                loop {
                    t *= 2.0;
                    if t > reach {
                        if bounded_below {
                            return Err(Error::InfiniteCutMass);
                        }
                        return Ok(reach);
                    }
                    ht = h(t)?;
                    if ht <= 0.0 {
                        break;
                    }
                    prev = (t, ht);
                }
                (lo, flo, hi, fhi) = (prev.0, prev.1, t, ht);
            } else {
                let mut prev = (t, ht);
                loop {
                    t *= 0.5;
                    ht = if t < 1e-300 { g0 } else { h(t)? };
                    if ht > 0.0 || t < 1e-300 {
                        break;
                    }
                    prev = (t, ht);
                }
                (lo, flo, hi, fhi) = (t, ht, prev.0, prev.1);
            }
            illinois(h, lo, hi, flo, fhi, 1e-15, 200)
        };
        let ray_root = |d: &[f64], guess: f64| ray_root_from(xs, gap0, d, guess);
        let mut z = Vec::with_capacity(n + 1);
        let mut out = CutIntegrals::zero(n);
        if n == 1 {
            let d = 1.0 / (1.0 + self.psi.hessian(xs)[(0, 0)]).max(1e-300);
            let guess = (2.0 * gap0 * d).sqrt().max(1e-12);
            let tp = ray_root(&[1.0], guess)?;
            let tm = ray_root(&[-1.0], guess)?;
            // the log weight is maximal at one of the endpoints for Φ_e
            let (a, b) = (xs[0] - tm, xs[0] + tp);
            let shift = self.log_section_weight(&[a], v[0] * a - c, &mut z).max(self.log_section_weight(&[b], v[0] * b - c, &mut z));
            let shift = if shift.is_finite() { shift } else { 0.0 };
            let f = |x: f64| {
                let mut z = Vec::with_capacity(2);
                let l = v[0] * x - c;
                let p = self.psi.value(&[x]);
                let s = (self.log_section_weight(&[x], l, &mut z) - shift).exp();
                [self.inner(&[x], p, l), s, x * s]
            };
            let (r1, _) = integrate_adaptive_vec(f, a, xs[0], 1e-300, self.quad.rel_tol, 200);
            let (r2, _) = integrate_adaptive_vec(f, xs[0], b, 1e-300, self.quad.rel_tol, 200);
            let scale = shift.exp();
            out.mass = r1[0] + r2[0];
            out.section_mass = (r1[1] + r2[1]) * scale;
            out.section_moment[0] = (r1[2] + r2[2]) * scale;
            let sm = r1[1] + r2[1];
            out.scaled_barycenter = (sm > 0.0).then(|| vec![(r1[2] + r2[2]) / sm]);
            return Ok(out);
        }
        let h0 = self.psi.hessian(xs);
        let lam = h0.symmetric_eigen().eigenvalues.max().max(1e-12);
        let mut guess = (2.0 * gap0 / lam).sqrt();
        let mut roots = Vec::with_capacity(self.dirs.len());
        for (d, _) in &self.dirs {
            let t = ray_root(d, guess)?;
            guess = t;
            roots.push(t);
        }
        if !bounded_below {
            // a large spread of the weight over the rim defeats the peak-centred rule
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for ((d, _), t) in self.dirs.iter().zip(&roots) {
                let end: Vec<f64> = xs.iter().zip(d).map(|(a, b)| a + t * b).collect();
                let lw = self.log_section_weight(&end, dot(v, &end) - c, &mut z);
                lo = lo.min(lw);
                hi = hi.max(lw);
            }
            if !(hi - lo <= 1.0) {
                return self.integrals_unbounded_weight(v, c, xs, gap0, &ray_root_from);
            }
        }
        let mut x = vec![0.0; n];
        let mut section: Vec<(f64, f64, Vec<f64>)> = Vec::with_capacity(self.dirs.len() * self.radial.len());
        for ((d, wd), &t) in self.dirs.iter().zip(&roots) {
            for &(r, wr) in self.radial.iter() {
                let rr = 0.5 * t * (r + 1.0);
                for i in 0..n {
                    x[i] = xs[i] + rr * d[i];
                }
                let jac = wd * 0.5 * t * wr * rr.powi(n as i32 - 1);
                let l = dot(v, &x) - c;
                let p = self.psi.value(&x);
                out.mass += jac * self.inner(&x, p, l);
                section.push((jac, self.log_section_weight(&x, l, &mut z), x.clone()));
            }
        }
        let shift = section.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let shift = if shift.is_finite() { shift } else { 0.0 };
        let mut sm = 0.0;
        let mut moment = vec![0.0; n];
        for (jac, lw, x) in &section {
            let s = jac * (lw - shift).exp();
            sm += s;
            for i in 0..n {
                moment[i] += s * x[i];
            }
        }
        let scale = shift.exp();
        out.section_mass = sm * scale;
        out.section_moment = moment.iter().map(|m| m * scale).collect();
        out.scaled_barycenter = (sm > 0.0).then(|| moment.iter().map(|m| m / sm).collect());
        Ok(out)
    }

    /// Cut integrals for weights that decay with height. The mass of a large
    /// cut concentrates near the part of its rim closest to the minimiser of
    /// `ψ`, so the polar rule is centred at the densest point on the segment
    /// from the peak towards the minimiser and each ray is integrated
    /// adaptively.
    fn integrals_unbounded_weight(
        &self,
        v: &[f64],
        c: f64,
        xs: &[f64],
        gap0: f64,
        ray_root_from: &dyn Fn(&[f64], f64, &[f64], f64) -> Result<f64>,
    ) -> Result<CutIntegrals> {
        let n = v.len();
        let gap = |x: &[f64]| dot(v, x) - c - self.psi.value(x);
        let argmin = self.psi.minimum().0;
        let seg: Vec<f64> = argmin.iter().zip(xs).map(|(m, p)| m - p).collect();
        let len = dot(&seg, &seg).sqrt();
        let mut z = Vec::with_capacity(n + 1);
        let (mut center, mut g_center) = (xs.to_vec(), gap0);
        if len > 0.0 {
            let dir: Vec<f64> = seg.iter().map(|t| t / len).collect();
            let reach = ray_root_from(xs, gap0, &dir, (0.5 * len).max(1e-12))?.min(len);
            let mut best = f64::NEG_INFINITY;
            for k in 0..=32 {
                let t = reach * k as f64 / 33.0;
                let p: Vec<f64> = xs.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
                let g = gap(&p);
                if g <= 0.0 {
                    continue;
                }
                let dens = self.inner(&p, self.psi.value(&p), self.psi.value(&p) + g);
                if dens > best {
                    best = dens;
                    center = p;
                    g_center = g;
                }
            }
        }
        let mut rays = Vec::with_capacity(self.dirs.len());
        let mut guess = (2.0 * g_center).sqrt();
        let mut shift = f64::NEG_INFINITY;
        for (d, wd) in &self.dirs {
            let t = ray_root_from(&center, g_center, d, guess)?;
            guess = t;
            let end: Vec<f64> = center.iter().zip(d).map(|(a, b)| a + t * b).collect();
            shift = shift.max(self.log_section_weight(&end, dot(v, &end) - c, &mut z));
            rays.push((d, *wd, t));
        }
        shift = shift.max(self.log_section_weight(&center, dot(v, &center) - c, &mut z));
        let shift = if shift.is_finite() { shift } else { 0.0 };
        let mut out = CutIntegrals::zero(n);
        let mut sm = 0.0;
        let mut moment = vec![0.0; n];
        for (d, wd, t) in rays {
            let f = |r: f64| -> [f64; 5] {
                let mut z = Vec::with_capacity(n + 1);
                let x: Vec<f64> = center.iter().zip(d).map(|(a, b)| a + r * b).collect();
                let jac = r.powi(n as i32 - 1);
                let l = dot(v, &x) - c;
                let p = self.psi.value(&x);
                let s = jac * (self.log_section_weight(&x, l, &mut z) - shift).exp();
                let mut o = [jac * self.inner(&x, p, l), s, 0.0, 0.0, 0.0];
                for i in 0..n.min(3) {
                    o[2 + i] = s * x[i];
                }
                o
            };
            let (r, _) = integrate_adaptive_vec(f, 0.0, t, 1e-300, self.quad.rel_tol.max(1e-10), 200);
            out.mass += wd * r[0];
            sm += wd * r[1];
            for i in 0..n {
                moment[i] += wd * r[2 + i];
            }
        }
        let scale = shift.exp();
        out.section_mass = sm * scale;
        out.section_moment = moment.iter().map(|m| m * scale).collect();
        out.scaled_barycenter = (sm > 0.0).then(|| moment.iter().map(|m| m / sm).collect());
        Ok(out)
    }

    pub fn integrals(&self, v: &[f64], c: f64) -> Result<CutIntegrals> {
        let peak = self.peak(v)?;
        self.integrals_with_peak(v, c, &peak)
    }

    /// Offset `c` with cut mass `delta` for slope `v`.
    pub fn solve(&self, v: &[f64], delta: f64) -> Result<CutSolution> {
        let n = v.len();
        if !(delta > 0.0) {
            return invalid("delta must be positive");
        }
        let peak = self.peak(v)?;
        let c_top = peak.1;
        let eta = {
            let mut z = Vec::new();
            self.section_weight(&peak.0, self.psi.value(&peak.0), &mut z).max(1e-300)
        };
        let p = 2.0 / (n as f64 + 2.0);
        let mut h = (delta / eta).powf(p).max(1e-14 * (1.0 + c_top.abs()));
        let mut lo_mass;
        loop {
            lo_mass = self.integrals_with_peak(v, c_top - h, &peak)?.mass;
            if lo_mass >= delta {
                break;
            }
            if h > 1e8 {
                return Err(Error::DeltaUnreachable { sup: lo_mass });
            }
            h *= if lo_mass > 0.0 { (delta / lo_mass).powf(p).clamp(1.5, 16.0) } else { 16.0 };
        }
        let x0 = c_top - h * (delta / lo_mass).powf(p);
        let f = |c: f64| {
            let r = self.integrals_with_peak(v, c, &peak)?;
            Ok((r.mass - delta, -r.section_mass))
        };
        let opts = RootOptions { x_tol: 1e-15, f_tol: 1e-13 * delta, max_iter: 200 };
        let c = newton_bracketed(f, c_top - h, c_top, x0, opts)?;
        let integrals = self.integrals_with_peak(v, c, &peak)?;
        Ok(CutSolution { piece: AffinePiece { slope: v.to_vec(), offset: c }, integrals })
    }
}

/// `Φ(C_{ℓ,ψ})`: weighted volume between `ψ` and the line above it.
pub fn cut_mass(psi: &ConvexFunctionSpec, piece: &AffinePiece, w: &WeightSpec, quad: &QuadratureSpec) -> Result<f64> {
    Ok(CutSolver::new(psi, w, quad)?.integrals(&piece.slope, piece.offset)?.mass)
}

/// Offset `c` such that the cut under `<v, ·> - c` has mass `delta`.
pub fn cut_offset_for_mass(psi: &ConvexFunctionSpec, v: &[f64], w: &WeightSpec, delta: f64, quad: &QuadratureSpec) -> Result<f64> {
    Ok(CutSolver::new(psi, w, quad)?.solve(v, delta)?.piece.offset)
}

/// Evaluates `ψ_δ - ψ` at points.
pub trait FloatingEvaluator: Sync {
    fn psi(&self) -> &ConvexFunctionSpec;
    fn gap(&self, x: &[f64]) -> Result<f64>;
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.psi().value(x) + self.gap(x)?)
    }
    /// Set outside which `ψ_δ = +∞`, if any.
    fn domain(&self) -> Option<&HeightDomain> {
        None
    }
}

/// Uniform grid of slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeGrid {
    pub slopes: Vec<Vec<f64>>,
}

impl SlopeGrid {
    /// Slopes on a uniform grid inside the hull of sampled gradients,
    /// shrunk by 0.95 about its centroid.
    pub fn from_gradient_range(psi: &ConvexFunctionSpec, per_axis: usize, truncation: f64) -> Result<Self> {
        let n = psi.dim();
        let bbox = psi.truncation_box(truncation)?;
        let samples = match n {
            1 => 2001,
            2 => 61,
            _ => 17,
        };
        let mut grads = Vec::new();
        let mut idx = vec![0usize; n];
        'outer: loop {
            let x: Vec<f64> = (0..n).map(|i| bbox.lo[i] + (bbox.hi[i] - bbox.lo[i]) * idx[i] as f64 / (samples - 1) as f64).collect();
            grads.push(psi.subgradient(&x));
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] < samples {
                    break;
                }
                idx[k] = 0;
                k += 1;
                if k == n {
                    break 'outer;
                }
            }
        }
        let centroid: Vec<f64> = (0..n).map(|i| grads.iter().map(|g| g[i]).sum::<f64>() / grads.len() as f64).collect();
        let shrunk: Vec<Vec<f64>> = grads.iter().map(|g| g.iter().zip(&centroid).map(|(a, c)| c + 0.95 * (a - c)).collect()).collect();
        let lo: Vec<f64> = (0..n).map(|i| shrunk.iter().map(|g| g[i]).fold(f64::INFINITY, f64::min)).collect();
        let hi: Vec<f64> = (0..n).map(|i| shrunk.iter().map(|g| g[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
        let inside: Box<dyn Fn(&[f64]) -> bool> = match n {
            1 => Box::new(|_| true),
            2 => {
                let hull = convex_hull_2d(&shrunk);
                Box::new(move |p: &[f64]| {
                    let m = hull.len();
                    (0..m).all(|i| {
                        let (a, b) = (&hull[i], &hull[(i + 1) % m]);
                        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= -1e-12
                    })
                })
            }
            _ => {
                let facets = Hull3::new(&shrunk)?.facets();
                Box::new(move |p: &[f64]| facets.iter().all(|h| dot(&h.normal, p) <= h.offset + 1e-12))
            }
        };
        let per_axis = per_axis.max(2);
        let mut slopes = Vec::new();
        let mut idx = vec![0usize; n];
        'grid: loop {
            let v: Vec<f64> = (0..n).map(|i| lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / (per_axis - 1) as f64).collect();
            if inside(&v) {
                slopes.push(v);
            }
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] < per_axis {
                    break;
                }
                idx[k] = 0;
                k += 1;
                if k == n {
                    break 'grid;
                }
            }
        }
        Ok(Self { slopes })
    }
}

/// `max(ψ, max_i ℓ_i)` over the lines of a slope grid; a lower
/// approximation of `ψ_δ`.
#[derive(Clone)]
pub struct FloatingFunctionApprox {
    psi: ConvexFunctionSpec,
    pub delta: f64,
    pub pieces: Vec<AffinePiece>,
}

impl FloatingEvaluator for FloatingFunctionApprox {
    fn psi(&self) -> &ConvexFunctionSpec {
        &self.psi
    }

    fn gap(&self, x: &[f64]) -> Result<f64> {
        let p = self.psi.value(x);
        Ok(self.pieces.iter().map(|l| l.eval(x) - p).fold(0.0, f64::max))
    }
}

impl FloatingFunctionApprox {
    /// `f_δ = e^{-ψ_δ}`.
    pub fn log_concave_value(&self, x: &[f64]) -> f64 {
        (-(self.psi.value(x) + self.gap(x).unwrap_or(0.0))).exp()
    }
}

/// Floating function from the cutting lines of every slope of the grid.
pub fn floating_function(
    psi: &ConvexFunctionSpec,
    w: &WeightSpec,
    delta: f64,
    grid: &SlopeGrid,
    quad: &QuadratureSpec,
) -> Result<FloatingFunctionApprox> {
    if delta < 0.0 || !delta.is_finite() {
        return invalid("delta must be nonnegative");
    }
    if delta == 0.0 {
        return Ok(FloatingFunctionApprox { psi: psi.clone(), delta, pieces: Vec::new() });
    }
    let solver = CutSolver::new(psi, w, quad)?;
    let pieces = grid
        .slopes
        .par_iter()
        .map(|v| solver.solve(v, delta).map(|s| s.piece))
        .collect::<Result<Vec<_>>>()?;
    Ok(FloatingFunctionApprox { psi: psi.clone(), delta, pieces })
}

/// `ψ_δ(x) = sup_v <v, x> - c(v)` evaluated pointwise by solving for the
/// slope whose section barycentre is `x`.
#[derive(Clone)]
pub struct PointwiseFloating {
    solver: CutSolver,
    pub delta: f64,
    domain: Option<HeightDomain>,
}

/// Effective domain of `ψ^e_δ`.
///
/// Nearly vertical cuts of `epi(ψ)` carry `Φ_e`-mass close to the
/// `e^{-ψ}`-mass of a halfspace of `R^n`, so `ψ^e_δ = +∞` outside the
/// floating body of the measure `e^{-ψ} dx`.
#[derive(Debug, Clone, PartialEq)]
pub enum HeightDomain {
    /// `(x - m)ᵀ A (x - m) <= r²`.
    Ellipsoid { center: Vec<f64>, a: DMatrix<f64>, radius: f64 },
    Interval { lo: f64, hi: f64 },
}

impl HeightDomain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Self::Ellipsoid { center, a, radius } => {
                let d = DVector::from_iterator(x.len(), x.iter().zip(center).map(|(p, q)| p - q));
                d.dot(&(a * &d)) <= radius * radius
            }
            Self::Interval { lo, hi } => x[0] >= *lo && x[0] <= *hi,
        }
    }
}

/// Domain of `ψ^e_δ`: closed form for quadratic `ψ`, quantiles of
/// `e^{-ψ}` on the line.
pub fn exponential_domain(psi: &ConvexFunctionSpec, delta: f64, quad: &QuadratureSpec) -> Result<HeightDomain> {
    let n = psi.dim();
    let (xmin, pmin) = psi.minimum();
    if let FunctionKind::Quadratic { a, .. } = psi.kind() {
        let det = a.determinant();
        let z = (-pmin).exp() * (2.0 * std::f64::consts::PI).powf(n as f64 / 2.0) / det.sqrt();
        if delta >= 0.5 * z {
            return Err(Error::FloatingBodyEmpty { delta });
        }
        let radius = std::f64::consts::SQRT_2 * erfc_inv(2.0 * delta / z);
        return Ok(HeightDomain::Ellipsoid { center: xmin.to_vec(), a: a.clone(), radius });
    }
    if n != 1 {
        return Err(Error::Unsupported("domain of ψ^e_δ for non-quadratic ψ in dimension > 1".into()));
    }
    let bbox = psi.truncation_box(DEFAULT_TRUNCATION)?;
    let (l, r, m) = (bbox.lo[0], bbox.hi[0], xmin[0]);
    let rel = quad.rel_tol.max(1e-12);
    let dens = |x: f64| (pmin - psi.value(&[x])).exp();
    let scale = (-pmin).exp();
    let upper = |t: f64| Ok(integrate_adaptive(dens, t, r, 1e-300, rel).value * scale - delta);
    let lower = |t: f64| Ok(integrate_adaptive(dens, l, t, 1e-300, rel).value * scale - delta);
    let (fu, fl) = (upper(m)?, lower(m)?);
    if fu <= 0.0 || fl <= 0.0 {
        return Err(Error::FloatingBodyEmpty { delta });
    }
    let hi = illinois(upper, m, r, fu, -delta, 1e-14, 200)?;
    let lo = illinois(lower, l, m, -delta, fl, 1e-14, 200)?;
    Ok(HeightDomain::Interval { lo, hi })
}

impl PointwiseFloating {
    pub fn new(psi: &ConvexFunctionSpec, w: &WeightSpec, delta: f64, quad: &QuadratureSpec) -> Result<Self> {
        if !(delta > 0.0) {
            return invalid("delta must be positive");
        }
        let domain = if w.is_exponential_height() { Some(exponential_domain(psi, delta, quad)?) } else { None };
        Ok(Self { solver: CutSolver::new(psi, w, quad)?, delta, domain })
    }

    /// Effective domain of `ψ_δ` when it is not all of `R^n`.
    pub fn domain(&self) -> Option<&HeightDomain> {
        self.domain.as_ref()
    }

    /// Supporting line of `ψ_δ` at `x`.
    pub fn supporting_line(&self, x: &[f64]) -> Result<CutSolution> {
        let psi = self.solver.psi();
        let n = psi.dim();
        let obj = |s: &CutSolution| dot(&s.piece.slope, x) - s.piece.offset;
        let mut v = psi.subgradient(x);
        let mut best = self.solver.solve(&v, self.delta)?;
        let mut fbest = obj(&best);
        if psi.is_smooth() {
            let scale = 1.0 + dot(x, x).sqrt();
            for _ in 0..60 {
                let b = best.integrals.barycenter().ok_or(Error::InvalidInput("empty cut section".into()))?;
                let r: Vec<f64> = x.iter().zip(&b).map(|(p, q)| p - q).collect();
                if dot(&r, &r).sqrt() <= 1e-11 * scale {
                    break;
                }
                let h: DMatrix<f64> = psi.hessian(&b);
                let dv = h * DVector::from_column_slice(&r);
                let mut t = 1.0;
                let mut accepted = false;
                while t > 1e-8 {
                    let cand: Vec<f64> = v.iter().zip(dv.iter()).map(|(a, d)| a + t * d).collect();
                    if let Ok(s) = self.solver.solve(&cand, self.delta) {
                        let f = obj(&s);
                        if f >= fbest - 1e-15 * fbest.abs() {
                            v = cand;
                            best = s;
                            fbest = f;
                            accepted = true;
                            break;
                        }
                    }
                    t *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
            return Ok(best);
        }
        // non-smooth: derivative-free search over slopes
        let mut step = 0.25 * (1.0 + dot(&v, &v).sqrt());
        while step > 1e-10 {
            let mut improved = false;
            for i in 0..n {
                for s in [step, -step] {
                    let mut cand = v.clone();
                    cand[i] += s;
                    if let Ok(sol) = self.solver.solve(&cand, self.delta) {
                        let f = obj(&sol);
                        if f > fbest {
                            v = cand;
                            best = sol;
                            fbest = f;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        Ok(best)
    }
}

impl FloatingEvaluator for PointwiseFloating {
    fn psi(&self) -> &ConvexFunctionSpec {
        self.solver.psi()
    }

    fn gap(&self, x: &[f64]) -> Result<f64> {
        if self.domain.as_ref().is_some_and(|d| !d.contains(x)) {
            return Ok(f64::INFINITY);
        }
        let s = self.supporting_line(x)?;
        Ok((s.piece.eval(x) - self.solver.psi().value(x)).max(0.0))
    }

    fn domain(&self) -> Option<&HeightDomain> {
        self.domain.as_ref()
    }
}

/// `I_f = ∫ (e^{-ψ} - e^{-ψ_δ})` and `I_ψ = ∫ (ψ_δ - ψ) e^{-ψ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeficitIntegrals {
    pub i_f: f64,
    pub i_psi: f64,
    /// Estimate of `∫ e^{-ψ}` outside the truncation box.
    pub tail_bound: f64,
}

/// Tensor Gauss-Legendre quadrature of both deficit integrands over the
/// truncation box of level `truncation`.
///
/// When `ψ_δ` has a bounded domain, `I_ψ = +∞` and `I_f` is integrated
/// adaptively inside the domain (polar coordinates for ellipsoids) with the
/// outside mass in closed form or by quadrature.
pub fn deficit_integrals(eval: &dyn FloatingEvaluator, quad: &QuadratureSpec, truncation: f64) -> Result<DeficitIntegrals> {
    if let Some(dom) = eval.domain() {
        return bounded_deficit(eval, dom, quad, truncation);
    }
    let psi = eval.psi();
    let n = psi.dim();
    let bbox = psi.truncation_box(truncation)?;
    let (_, pmin) = psi.minimum();
    let panels = quad.points_per_axis.div_ceil(8).max(1);
    let rules: Vec<Vec<(f64, f64)>> = (0..n).map(|i| composite_rule(bbox.lo[i], bbox.hi[i], 8, panels)).collect();
    let m = rules[0].len();
    let total = m.pow(n as u32);
    let skip = truncation.min(38.0);
    let nodes: Vec<(Vec<f64>, f64)> = (0..total)
        .filter_map(|k| {
            let mut rem = k;
            let mut x = Vec::with_capacity(n);
            let mut w = 1.0;
            for r in rules.iter() {
                let (xi, wi) = r[rem % m];
                rem /= m;
                x.push(xi);
                w *= wi;
            }
            (psi.value(&x) - pmin <= skip).then_some((x, w))
        })
        .collect();
    let parts = nodes
        .par_iter()
        .map(|(x, w)| {
            let g = eval.gap(x)?;
            let e = (-psi.value(x)).exp();
            Ok((w * e * -(-g).exp_m1(), w * e * g))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let i_f = parts.iter().map(|p| p.0).sum();
    let i_psi = parts.iter().map(|p| p.1).sum();
    let z: f64 = nodes.iter().map(|(x, w)| w * (-psi.value(x)).exp()).sum();
    let tail_bound = z * (-truncation).exp() * (1.0 + truncation).powi(n as i32);
    Ok(DeficitIntegrals { i_f, i_psi, tail_bound })
}

fn bounded_deficit(eval: &dyn FloatingEvaluator, dom: &HeightDomain, quad: &QuadratureSpec, truncation: f64) -> Result<DeficitIntegrals> {
    let psi = eval.psi();
    let n = psi.dim();
    let rel = quad.rel_tol.max(1e-10);
    let failure: std::sync::Mutex<Option<Error>> = std::sync::Mutex::new(None);
    let inner = |x: &[f64]| -> f64 {
        match eval.gap(x) {
            Ok(g) => (-psi.value(x)).exp() * -(-g).exp_m1(),
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                0.0
            }
        }
    };
    let (i_f, tail_bound) = match dom {
        HeightDomain::Interval { lo, hi } => {
            let bbox = psi.truncation_box(truncation)?;
            let (a, b) = (bbox.lo[0].min(*lo), bbox.hi[0].max(*hi));
            let m = psi.minimum().0[0].clamp(*lo, *hi);
            let inside = integrate_piecewise(|x| inner(&[x]), &[*lo, m, *hi], 1e-300, rel);
            let dens = |x: f64| (-psi.value(&[x])).exp();
            let outside = integrate_adaptive(dens, a, *lo, 1e-300, rel).value + integrate_adaptive(dens, *hi, b, 1e-300, rel).value;
            let tail = (-(psi.minimum().1 + truncation)).exp() * (1.0 + truncation);
            (inside.value + outside, tail)
        }
        HeightDomain::Ellipsoid { center, a, radius } => {
            // x = m + A^{-1/2} y maps the ball |y| <= r onto the domain
            let eig = a.clone().symmetric_eigen();
            let inv_sqrt = &eig.eigenvectors
                * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
                * eig.eigenvectors.transpose();
            let jac = 1.0 / eig.eigenvalues.iter().product::<f64>().sqrt();
            let pmin = psi.minimum().1;
            let to_x = |y: &[f64]| -> Vec<f64> {
                let v = &inv_sqrt * DVector::from_column_slice(y);
                center.iter().zip(v.iter()).map(|(c, d)| c + d).collect()
            };
            let outside = (-pmin).exp()
                * (2.0 * std::f64::consts::PI).powf(n as f64 / 2.0)
                * gamma_ur(n as f64 / 2.0, radius * radius / 2.0);
            // Φ_e only sees heights, so in whitened coordinates ψ_δ is the
            // floating function of a radial quadratic and the gap is radial
            let u: Vec<f64> = (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
            let radial = integrate_adaptive(
                |rho| {
                    let y: Vec<f64> = u.iter().map(|t| t * rho).collect();
                    inner(&to_x(&y)) * rho.powi(n as i32 - 1)
                },
                0.0,
                *radius,
                1e-300,
                rel,
            );
            let inside = sphere_area(n) * radial.value;
            (jac * (inside + outside), 0.0)
        }
    };
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(DeficitIntegrals { i_f, i_psi: f64::INFINITY, tail_bound })
}

/// Largest radius of a ball inside the epigraph touching the graph at `x`;
/// zero where ψ has no gradient.
pub fn rolling_function(psi: &ConvexFunctionSpec, x: &[f64], search_tol: f64) -> Result<f64> {
    let n = psi.dim();
    if n > 2 {
        return Err(Error::Unsupported(format!("rolling function in dimension {n}")));
    }
    let Some(g) = psi.gradient(x) else { return Ok(0.0) };
    let s = (1.0 + dot(&g, &g)).sqrt();
    let px = psi.value(x);
    let tol = 1e-13 * (1.0 + px.abs());
    let fits = |rho: f64| -> bool {
        let c: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - rho * b / s).collect();
        let cy = px + rho / s;
        // lower hemisphere minus ψ at horizontal offset d from the centre
        let margin = |u: &[f64]| {
            let d2: f64 = u.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum();
            if d2 > rho * rho {
                return f64::INFINITY;
            }
            let low = cy - rho + d2 / (rho + (rho * rho - d2).sqrt());
            low - psi.value(u)
        };
        if n == 1 {
            let f = |t: f64| Ok(margin(&[c[0] + t]));
            match scan_min(f, -rho, rho, 801, 1e-12 * rho) {
                Ok((_, m)) => m >= -tol,
                Err(_) => false,
            }
        } else {
            let mut worst = (f64::INFINITY, 0.0, 0.0);
            for i in 1..=40 {
                let r = rho * i as f64 / 40.0;
                for j in 0..80 {
                    let a = 2.0 * std::f64::consts::PI * j as f64 / 80.0;
                    let m = margin(&[c[0] + r * a.cos(), c[1] + r * a.sin()]);
                    if m < worst.0 {
                        worst = (m, r * a.cos(), r * a.sin());
                    }
                }
            }
            let (mut best, mut ux, mut uy) = worst;
            let mut step = rho / 40.0;
            while step > 1e-10 * rho {
                let mut improved = false;
                for (dx, dy) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                    let m = margin(&[c[0] + ux + dx, c[1] + uy + dy]);
                    if m < best {
                        (best, ux, uy) = (m, ux + dx, uy + dy);
                        improved = true;
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            best >= -tol
        }
    };
    let mut hi = 1.0;
    if !fits(hi) {
        let mut lo = 0.0;
        let mut h = hi;
        while h - lo > search_tol {
            let m = 0.5 * (lo + h);
            if fits(m) {
                lo = m;
            } else {
                h = m;
            }
            if h < 1e-12 {
                return Ok(0.0);
            }
        }
        return Ok(lo);
    }
    let mut lo = hi;
    while fits(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 {
            return Ok(f64::INFINITY);
        }
    }
    while hi - lo > search_tol {
        let m = 0.5 * (lo + hi);
        if fits(m) {
            lo = m;
        } else {
            hi = m;
        }
    }
    Ok(lo)
}

/// `ρ_ψ(x) = min(r_ψ(x), |ψ(x)|)`.
pub fn modified_rolling(r: f64, psi_x: f64) -> f64 {
    r.min(psi_x.abs())
}

/// Upper bound `2^{(3n+4)/(n+2)} c_{n+1} (1 + |∇ψ(x)|²)^{1/2} η^{-2/(n+2)} r^{-n/(n+2)}`
/// on `(ψ_δ(x) - ψ(x)) / δ^{2/(n+2)}`.
pub fn rolling_gap_bound(psi: &ConvexFunctionSpec, x: &[f64], eta: f64, r: f64) -> f64 {
    let n = psi.dim() as f64;
    let g = psi.subgradient(x);
    2f64.powf((3.0 * n + 4.0) / (n + 2.0)) * constant_c(psi.dim() + 1)
        * (1.0 + dot(&g, &g)).sqrt()
        / (eta.powf(2.0 / (n + 2.0)) * r.powf(n / (n + 2.0)))
}
