//! s-concave functions, the lifted bodies `K_f^s` and s-concave floating
//! functions `f^Φ_δ`.

use std::fmt;
use std::sync::Mutex;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::floating_body::{cap_offset_for_mass, weighted_floating_body, DirectionGrid, FloatingBodyApprox};
use crate::function::{GradFn, HessFn};
use crate::geometry::{
    slice_cap_mass, sphere_area, unit_ball_cap_volume, unit_ball_volume, BoundingBox, ConvexBodySpec, ConvexSet,
    Halfspace,
};
use crate::quadrature::{composite_rule, gauss_legendre, integrate_piecewise, stream_rng, Estimate, QuadratureSpec};
use crate::roots::{brent_min, illinois, scan_min};
use crate::weights::{PointFn, WeightSpec};

#[derive(Clone)]
pub enum SConcaveKind {
    /// `f^{1/s}(x) = 1 - |x|²` on the unit ball.
    Paraboloid,
    /// `f^{1/s}(x) = 1 - |x|` on the unit ball.
    Cone,
    /// `root` is `f^{1/s}` on `support`.
    Custom { root: PointFn, gradient: Option<GradFn>, hessian: Option<HessFn> },
}

/// `f = g^s` with `g` concave and nonnegative on a convex body.
#[derive(Clone)]
pub struct SConcaveFunctionSpec {
    dim: usize,
    s: usize,
    kind: SConcaveKind,
    support: ConvexBodySpec,
}

impl fmt::Debug for SConcaveFunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match &self.kind {
            SConcaveKind::Paraboloid => "paraboloid",
            SConcaveKind::Cone => "cone",
            SConcaveKind::Custom { .. } => "custom",
        };
        write!(f, "SConcaveFunctionSpec({name}, dim {}, s {})", self.dim, self.s)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|t| t * t).sum::<f64>().sqrt()
}

impl SConcaveFunctionSpec {
    fn builtin(dim: usize, s: usize, kind: SConcaveKind) -> Result<Self> {
        if dim == 0 || s == 0 {
            return invalid("s-concave functions need dim >= 1 and s >= 1");
        }
        Ok(Self { dim, s, kind, support: ConvexBodySpec::unit_ball(dim)? })
    }

    /// `(1 - |x|²)^s`.
    pub fn paraboloid(dim: usize, s: usize) -> Result<Self> {
        Self::builtin(dim, s, SConcaveKind::Paraboloid)
    }

    /// `(1 - |x|)^s`.
    pub fn cone(dim: usize, s: usize) -> Result<Self> {
        Self::builtin(dim, s, SConcaveKind::Cone)
    }

    /// `f = root^s` on `support`; missing derivatives use finite differences.
    pub fn custom(
        s: usize,
        support: ConvexBodySpec,
        root: PointFn,
        gradient: Option<GradFn>,
        hessian: Option<HessFn>,
    ) -> Result<Self> {
        if s == 0 {
            return invalid("s must be a positive integer");
        }
        let dim = support.dim();
        let f = Self { dim, s, kind: SConcaveKind::Custom { root, gradient, hessian }, support };
        if !(f.root(&f.support.interior_point()) > 0.0) {
            return invalid("f must be positive at the interior point of its support");
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.s
    }

    pub fn kind(&self) -> &SConcaveKind {
        &self.kind
    }

    pub fn support(&self) -> &ConvexBodySpec {
        &self.support
    }

    /// Whether `f` depends on `|x|` only.
    pub fn is_radial(&self) -> bool {
        !matches!(self.kind, SConcaveKind::Custom { .. })
    }

    fn radial_root(&self, r: f64) -> f64 {
        match self.kind {
            SConcaveKind::Paraboloid => (1.0 - r * r).max(0.0),
            _ => (1.0 - r).max(0.0),
        }
    }

    /// `f^{1/s}(x)`, zero off the support.
    pub fn root(&self, x: &[f64]) -> f64 {
        match &self.kind {
            SConcaveKind::Custom { root, .. } => {
                if self.support.contains(x) {
                    root(x).max(0.0)
                } else {
                    0.0
                }
            }
            _ => self.radial_root(norm(x)),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.root(x).powi(self.s as i32)
    }

    pub fn root_gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            SConcaveKind::Paraboloid => x.iter().map(|t| -2.0 * t).collect(),
            SConcaveKind::Cone => {
                let r = norm(x);
                if r == 0.0 {
                    vec![0.0; self.dim]
                } else {
                    x.iter().map(|t| -t / r).collect()
                }
            }
            SConcaveKind::Custom { gradient: Some(g), .. } => g(x),
            SConcaveKind::Custom { root, .. } => {
                let h = f64::EPSILON.cbrt() * norm(x).max(1.0);
                let mut y = x.to_vec();
                (0..self.dim)
                    .map(|i| {
                        y[i] = x[i] + h;
                        let fp = root(&y);
                        y[i] = x[i] - h;
                        let fm = root(&y);
                        y[i] = x[i];
                        (fp - fm) / (2.0 * h)
                    })
                    .collect()
            }
        }
    }

    pub fn root_hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        match &self.kind {
            SConcaveKind::Paraboloid => DMatrix::from_diagonal_element(n, n, -2.0),
            SConcaveKind::Cone => {
                let r = norm(x);
                if r == 0.0 || n == 1 {
                    return DMatrix::zeros(n, n);
                }
                DMatrix::from_fn(n, n, |i, j| -((i == j) as u8 as f64 - x[i] * x[j] / (r * r)) / r)
            }
            SConcaveKind::Custom { hessian: Some(h), .. } => h(x),
            SConcaveKind::Custom { .. } => {
                let h = f64::EPSILON.cbrt() * norm(x).max(1.0);
                let mut y = x.to_vec();
                let mut m = DMatrix::zeros(n, n);
                for j in 0..n {
                    y[j] = x[j] + h;
                    let gp = self.root_gradient(&y);
                    y[j] = x[j] - h;
                    let gm = self.root_gradient(&y);
                    y[j] = x[j];
                    for i in 0..n {
                        m[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
                    }
                }
                (&m + m.transpose()) * 0.5
            }
        }
    }

    /// `[lo, hi]` of the support when `n = 1`.
    pub fn support_interval(&self) -> Result<(f64, f64)> {
        if self.dim != 1 {
            return invalid("support interval needs dimension 1");
        }
        Ok((-self.support.support_value(&[-1.0])?, self.support.support_value(&[1.0])?))
    }

    /// Points where `f^{1/s}` is not smooth inside the support (`n = 1`).
    fn kinks(&self) -> Vec<f64> {
        match self.kind {
            SConcaveKind::Cone => vec![0.0],
            _ => Vec::new(),
        }
    }

    /// `∫ f`.
    pub fn integral(&self, quad: &QuadratureSpec) -> Result<Estimate> {
        let n = self.dim;
        let rel = quad.rel_tol.min(1e-10);
        if n == 1 {
            let (lo, hi) = self.support_interval()?;
            let mut breaks = vec![lo];
            breaks.extend(self.kinks().into_iter().filter(|k| *k > lo && *k < hi));
            breaks.push(hi);
            return Ok(integrate_piecewise(|x| self.value(&[x]), &breaks, 1e-300, rel));
        }
        if self.is_radial() {
            let e = integrate_piecewise(|r| self.radial_root(r).powi(self.s as i32) * r.powi(n as i32 - 1), &[0.0, 1.0], 1e-300, rel);
            let c = sphere_area(n);
            return Ok(Estimate { value: c * e.value, error: c * e.error });
        }
        if n == 2 {
            // polar quadrature about the interior point
            let c = self.support.interior_point();
            let m = quad.points_per_axis.max(64) * 4;
            let rule = gauss_legendre(32);
            let mut total = 0.0;
            for k in 0..m {
                let t = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                let d = [t.cos(), t.sin()];
                let (_, r_max) = self.support.chord(&c, &d);
                for &(u, w) in rule.iter() {
                    let r = 0.5 * r_max * (u + 1.0);
                    total += w * 0.5 * r_max * r * self.value(&[c[0] + r * d[0], c[1] + r * d[1]]);
                }
            }
            let value = total * 2.0 * std::f64::consts::PI / m as f64;
            return Ok(Estimate { value, error: value * 1e-8 });
        }
        let bbox = self.support.bounding_box();
        let q = quad.clone().with_samples(quad.samples.max(100_000), quad.seed);
        let mut rng = stream_rng(q.seed, 2);
        let vol = bbox.volume();
        let mut x = vec![0.0; n];
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..q.samples {
            use rand::RngExt;
            for k in 0..n {
                x[k] = bbox.lo[k] + (bbox.hi[k] - bbox.lo[k]) * rng.random::<f64>();
            }
            let v = self.value(&x);
            s1 += v;
            s2 += v * v;
        }
        let m = q.samples as f64;
        let mean = s1 / m;
        Ok(Estimate { value: vol * mean, error: vol * ((s2 / m - mean * mean).max(0.0) / m).sqrt() })
    }

    /// Spot checks: nonnegativity, midpoint concavity of `f^{1/s}` and
    /// vanishing outside the support.
    pub fn validate(&self, seed: u64) -> Result<()> {
        use rand::RngExt;
        let bbox = self.support.bounding_box();
        let mut rng = stream_rng(seed, 3);
        let n = self.dim;
        let mut sample = || -> Vec<f64> { (0..n).map(|k| bbox.lo[k] + (bbox.hi[k] - bbox.lo[k]) * rng.random::<f64>()).collect() };
        for _ in 0..256 {
            let a = sample();
            let b = sample();
            if !(self.support.contains(&a) && self.support.contains(&b)) {
                continue;
            }
            let (ga, gb) = (self.root(&a), self.root(&b));
            if ga < 0.0 || gb < 0.0 || !ga.is_finite() || !gb.is_finite() {
                return invalid("f must be finite and nonnegative on its support");
            }
            let m: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
            if self.root(&m) < 0.5 * (ga + gb) - 1e-9 * (1.0 + ga.abs() + gb.abs()) {
                return invalid(format!("f^(1/s) fails midpoint concavity between {a:?} and {b:?}"));
            }
        }
        let outside: Vec<f64> = bbox.hi.iter().map(|h| h + 1.0).collect();
        if self.value(&outside) != 0.0 {
            return invalid("f must vanish outside its support");
        }
        Ok(())
    }

    pub fn lift(&self) -> LiftedBody {
        LiftedBody::new(self)
    }
}

/// `K_f^s = { (x, y) ∈ R^n × R^s : x ∈ supp f, |y| <= f^{1/s}(x) }`.
#[derive(Clone, Debug)]
pub struct LiftedBody {
    f: SConcaveFunctionSpec,
    bbox: BoundingBox,
}

impl LiftedBody {
    fn new(f: &SConcaveFunctionSpec) -> Self {
        let sb = f.support.bounding_box();
        let ymax = if f.is_radial() {
            1.0
        } else {
            let (_, v) = maximize_concave(|x| f.root(x), &f.support.interior_point(), sb.diameter());
            v
        } * (1.0 + 1e-9);
        let mut lo = sb.lo.clone();
        let mut hi = sb.hi.clone();
        lo.extend(std::iter::repeat_n(-ymax, f.s));
        hi.extend(std::iter::repeat_n(ymax, f.s));
        Self { f: f.clone(), bbox: BoundingBox { lo, hi } }
    }

    pub fn function(&self) -> &SConcaveFunctionSpec {
        &self.f
    }

    /// `vol_s(B^s) ∫ f`.
    pub fn volume(&self, quad: &QuadratureSpec) -> Result<Estimate> {
        let e = self.f.integral(quad)?;
        let c = unit_ball_volume(self.f.s);
        Ok(Estimate { value: c * e.value, error: c * e.error })
    }

    /// Gauge of `K_f^s` about the origin (which must be interior).
    pub fn gauge(&self, z: &[f64]) -> f64 {
        let n = self.f.dim;
        let xi = norm(&z[..n]);
        let eta = norm(&z[n..]);
        match self.f.kind {
            // η/t = 1 - ξ²/t²
            SConcaveKind::Paraboloid => 0.5 * (eta + (eta * eta + 4.0 * xi * xi).sqrt()),
            SConcaveKind::Cone => xi + eta,
            SConcaveKind::Custom { .. } => {
                if xi == 0.0 && eta == 0.0 {
                    return 0.0;
                }
                let (mut lo, mut hi) = (0.0, 1.0);
                let inside = |t: f64| {
                    let p: Vec<f64> = z.iter().map(|v| v * t).collect();
                    self.contains(&p)
                };
                while inside(hi) {
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let m = 0.5 * (lo + hi);
                    if m <= lo || m >= hi {
                        break;
                    }
                    if inside(m) {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                1.0 / lo
            }
        }
    }

    /// `K_f^s` as a gauge body, for boundary functionals.
    pub fn to_body(&self) -> Result<ConvexBodySpec> {
        let me = self.clone();
        ConvexBodySpec::gauge(self.dim(), std::sync::Arc::new(move |z: &[f64]| me.gauge(z)), self.bbox.clone())
    }

    /// Maximiser of `<ux, x> + t f^{1/s}(x)` over the support.
    fn support_argmax(&self, ux: &[f64], t: f64) -> Result<(Vec<f64>, f64)> {
        let f = &self.f;
        let obj = |x: &[f64]| crate::geometry::dot(ux, x) + t * f.root(x);
        if f.dim == 1 {
            let (lo, hi) = f.support_interval()?;
            let (x, v) = scan_min(|x| Ok(-obj(&[x])), lo, hi, 201, 1e-15)?;
            return Ok((vec![x], -v));
        }
        if f.is_radial() {
            let r = norm(ux);
            let (rho, v) = scan_min(|p| Ok(-(r * p + t * f.radial_root(p))), 0.0, 1.0, 201, 1e-15)?;
            let x = if r > 0.0 { ux.iter().map(|u| u / r * rho).collect() } else { vec![0.0; f.dim] };
            return Ok((x, -v));
        }
        let (x, v) = maximize_concave(
            |x| if f.support.contains(x) { obj(x) } else { f64::NEG_INFINITY },
            &f.support.interior_point(),
            f.support.bounding_box().diameter(),
        );
        Ok((x, v))
    }

    /// Exact cap mass for `n = 1` and rotational weights: a one-dimensional
    /// adaptive integral of closed-form slice masses.
    fn cap_mass_1d(&self, cut: &Halfspace, w: &WeightSpec, quad: &QuadratureSpec) -> Result<Estimate> {
        let f = &self.f;
        let s = f.s;
        let ux = cut.normal[0];
        let t = norm(&cut.normal[1..]);
        let a = cut.offset;
        let (xl, xr) = f.support_interval()?;
        let g = |x: f64| f.root(&[x]);
        let eta = w.constant_value();
        let full = |x: f64, r: f64| slice_mass(w, eta, s, x, r, -r);
        let mut breaks = vec![xl, xr];
        breaks.extend(f.kinks().into_iter().filter(|k| *k > xl && *k < xr));
        let integrand: Box<dyn Fn(f64) -> f64 + '_> = if t <= 1e-15 * ux.abs() {
            let x0 = a / ux;
            if x0 > xl && x0 < xr {
                breaks.push(x0);
            }
            Box::new(move |x: f64| if ux * x >= a { full(x, g(x)) } else { 0.0 })
        } else {
            // slice nonempty where ux x + t g > a (concave), full where ux x - t g >= a (convex)
            let upper = |x: f64| ux * x + t * g(x) - a;
            let lower = |x: f64| ux * x - t * g(x) - a;
            let (xp, vp) = brent_min(|x| Ok(-upper(x)), xl, xr, 1e-15, 300)?;
            if -vp <= 0.0 {
                return Ok(Estimate::exact(0.0));
            }
            breaks.extend(bracket_roots(upper, xl, xp, xr)?);
            let (xq, _) = brent_min(|x| Ok(lower(x)), xl, xr, 1e-15, 300)?;
            breaks.extend(bracket_roots(lower, xl, xq, xr)?);
            breaks.push(xp);
            Box::new(move |x: f64| {
                let r = g(x);
                if r <= 0.0 {
                    return 0.0;
                }
                slice_mass(w, eta, s, x, r, (a - ux * x) / t)
            })
        };
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        Ok(integrate_piecewise(integrand, &breaks, 1e-300, quad.rel_tol.min(1e-10)))
    }
}

/// Roots of `h` in `[lo, peak]` and `[peak, hi]` where `h` changes sign.
fn bracket_roots(h: impl Fn(f64) -> f64, lo: f64, peak: f64, hi: f64) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let hp = h(peak);
    for (a, b) in [(lo, peak), (peak, hi)] {
        let (ha, hb) = (h(a), if b == peak { hp } else { h(b) });
        if b > a && ha.signum() != hb.signum() && ha != 0.0 && hb != 0.0 {
            out.push(illinois(|x| Ok(h(x)), a, b, ha, hb, 1e-16, 300)?);
        }
    }
    Ok(out)
}

/// `∫_{B^s(r) ∩ {y_1 >= d}} φ(x, |y|) dy`.
fn slice_mass(w: &WeightSpec, eta: Option<f64>, s: usize, x: f64, r: f64, d: f64) -> f64 {
    if d >= r || r <= 0.0 {
        return 0.0;
    }
    let depth = (1.0 - d / r).min(2.0);
    if let Some(eta) = eta {
        return eta * r.powi(s as i32) * unit_ball_cap_volume(s, depth);
    }
    let phi = |rho: f64| w.profile(s, &[x, rho]).unwrap_or(f64::NAN);
    let lo = d.max(-r);
    match s {
        1 => {
            let rule = gauss_legendre(20);
            let seg = |a: f64, b: f64| -> f64 {
                let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
                rule.iter().map(|&(u, wt)| wt * h * phi((m + h * u).abs())).sum()
            };
            if lo < 0.0 {
                seg(lo, 0.0) + seg(0.0, r)
            } else {
                seg(lo, r)
            }
        }
        _ => {
            // y_1 = r cos α, the remaining s-1 coordinates fill a ball of radius r sin α
            let amax = (lo / r).clamp(-1.0, 1.0).acos();
            let rule = gauss_legendre(24);
            let inner = gauss_legendre(24);
            let ha = 0.5 * amax;
            let mut total = 0.0;
            for &(u, wu) in rule.iter() {
                let al = ha * (u + 1.0);
                let (y1, rs) = (r * al.cos(), r * al.sin());
                // ∫_{B^{s-1}(rs)} φ(√(y1² + |z|²)) dz in polar form
                let mut shell = 0.0;
                for &(v, wv) in inner.iter() {
                    let rho = 0.5 * rs * (v + 1.0);
                    shell += wv * 0.5 * rs * sphere_area(s - 1) * rho.powi(s as i32 - 2) * phi((y1 * y1 + rho * rho).sqrt());
                }
                total += wu * ha * r * al.sin() * shell;
            }
            total
        }
    }
}

/// Compass-search maximisation of a concave function.
fn maximize_concave(f: impl Fn(&[f64]) -> f64, x0: &[f64], scale: f64) -> (Vec<f64>, f64) {
    let mut x = x0.to_vec();
    let mut best = f(&x);
    let mut step = 0.25 * scale;
    while step > 1e-13 * scale {
        let mut improved = false;
        for i in 0..x.len() {
            for sgn in [1.0, -1.0] {
                x[i] += sgn * step;
                let v = f(&x);
                if v > best {
                    best = v;
                    improved = true;
                } else {
                    x[i] -= sgn * step;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, best)
}

impl ConvexSet for LiftedBody {
    fn dim(&self) -> usize {
        self.f.dim + self.f.s
    }

    fn contains(&self, z: &[f64]) -> bool {
        let n = self.f.dim;
        let x = &z[..n];
        self.f.support.contains(x) && norm(&z[n..]) <= self.f.root(x)
    }

    fn support_value(&self, u: &[f64]) -> Result<f64> {
        let n = self.f.dim;
        let t = norm(&u[n..]);
        if t == 0.0 {
            return self.f.support.support_value(&u[..n]);
        }
        Ok(self.support_argmax(&u[..n], t)?.1)
    }

    fn support_point(&self, u: &[f64]) -> Result<Vec<f64>> {
        let n = self.f.dim;
        let t = norm(&u[n..]);
        if t == 0.0 {
            let mut p = self.f.support.support_point(&u[..n])?;
            p.extend(std::iter::repeat_n(0.0, self.f.s));
            return Ok(p);
        }
        let (mut x, _) = self.support_argmax(&u[..n], t)?;
        let r = self.f.root(&x);
        x.extend(u[n..].iter().map(|v| v / t * r));
        Ok(x)
    }

    fn bounding_box(&self) -> BoundingBox {
        self.bbox.clone()
    }

    fn interior_point(&self) -> Vec<f64> {
        let mut p = self.f.support.interior_point();
        p.extend(std::iter::repeat_n(0.0, self.f.s));
        p
    }

    fn cap_mass(&self, cut: &Halfspace, w: &WeightSpec, quad: &QuadratureSpec) -> Result<Estimate> {
        if self.f.dim == 1 && w.is_rotational(self.f.s) {
            return self.cap_mass_1d(cut, w, quad);
        }
        slice_cap_mass(self, cut, w, quad)
    }
}

/// Evaluation of `f^Φ_δ`.
pub trait SConcaveEvaluator: Sync {
    fn function(&self) -> &SConcaveFunctionSpec;
    fn delta(&self) -> f64;
    /// `f^Φ_δ(x)^{1/s}`: the radius of the slice of the floating body at `x`.
    fn radius(&self, x: &[f64]) -> Result<f64>;
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.radius(x)?.powi(self.function().order() as i32))
    }
    /// Extent of the floating body along the first coordinate, when known.
    fn extent(&self) -> Option<(f64, f64)> {
        None
    }
}

fn check_weight(f: &SConcaveFunctionSpec, w: &WeightSpec) -> Result<()> {
    if w.ambient_dim() != f.dim + f.s {
        return Err(Error::IncompatibleWeight(format!(
            "weight on R^{} but the lifted body lives in R^{}",
            w.ambient_dim(),
            f.dim + f.s
        )));
    }
    if !w.is_rotational(f.s) {
        return Err(Error::IncompatibleWeight("s-concave floating functions need a rotational weight".into()));
    }
    Ok(())
}

/// Slice radii read off a polytope approximation of the floating body.
#[derive(Clone, Debug)]
pub struct PolytopeSConcave {
    f: SConcaveFunctionSpec,
    pub body: FloatingBodyApprox,
}

impl SConcaveEvaluator for PolytopeSConcave {
    fn function(&self) -> &SConcaveFunctionSpec {
        &self.f
    }

    fn delta(&self) -> f64 {
        self.body.delta
    }

    fn radius(&self, x: &[f64]) -> Result<f64> {
        // exact search along +e_{n+1} through the halfspace list
        let n = self.f.dim;
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for h in self.body.halfspaces() {
            let rest = h.offset - crate::geometry::dot(&h.normal[..n], x);
            let c = h.normal[n];
            if c > 1e-15 {
                hi = hi.min(rest / c);
            } else if c < -1e-15 {
                lo = lo.max(rest / c);
            } else if rest < 0.0 {
                return Ok(0.0);
            }
        }
        Ok(if lo <= 0.0 && hi >= 0.0 { hi } else { 0.0 })
    }
}

/// `f^Φ_δ` from the polytope floating body of `K_f^s` (`n + s <= 3`).
pub fn sconcave_floating_function(
    f: &SConcaveFunctionSpec,
    w: &WeightSpec,
    delta: f64,
    grid: &DirectionGrid,
    quad: &QuadratureSpec,
) -> Result<PolytopeSConcave> {
    check_weight(f, w)?;
    let body = weighted_floating_body(&f.lift(), w, delta, grid, quad)?;
    Ok(PolytopeSConcave { f: f.clone(), body })
}

/// `f^Φ_δ` for `n = 1` or radial `f`, using the symmetry of `K_f^s`: the
/// floating body is determined by cap offsets `a(θ)` along the meridian
/// directions `(cos θ e_1, sin θ e_{n+1})`, and the slice radius at `x` is
/// `min_θ (a(θ) - |x| cos θ) / sin θ`.
#[derive(Clone, Debug)]
pub struct MeridianSConcave {
    f: SConcaveFunctionSpec,
    lift: LiftedBody,
    w: WeightSpec,
    quad: QuadratureSpec,
    delta: f64,
    pub thetas: Vec<f64>,
    pub offsets: Vec<f64>,
    refine: bool,
}

impl MeridianSConcave {
    fn direction(&self, theta: f64) -> Vec<f64> {
        meridian_direction(&self.f, theta)
    }

    /// Cap offset for the meridian angle `theta`.
    pub fn offset(&self, theta: f64) -> Result<f64> {
        cap_offset_for_mass(&self.lift, &self.direction(theta), &self.w, self.delta, &self.quad)
    }

    fn coordinate(&self, x: &[f64]) -> f64 {
        if self.f.dim == 1 {
            x[0]
        } else {
            norm(x)
        }
    }

    /// Slice radius from the angle grid alone; an upper bound for the
    /// refined radius.
    pub fn grid_radius(&self, x: &[f64]) -> f64 {
        self.grid_argmin(self.coordinate(x)).1
    }

    fn grid_argmin(&self, xi: f64) -> (usize, f64) {
        let m = self.thetas.len() - 1;
        if xi >= self.offsets[0] || -xi >= self.offsets[m] {
            return (0, 0.0);
        }
        let mut best = (0, f64::INFINITY);
        for j in 1..m {
            let v = (self.offsets[j] - xi * self.thetas[j].cos()) / self.thetas[j].sin();
            if v < best.1 {
                best = (j, v);
            }
        }
        (best.0, best.1.max(0.0))
    }

    /// Volume of the slice at `x` relative to `vol_s(B^s)`, from the
    /// polygon cut out by the grid halfspaces rotated to `m_phi` azimuths
    /// (`s = 2`) or the interval they cut (`s = 1`).
    pub fn slice_volume_ratio(&self, x: &[f64], m_phi: usize) -> Result<f64> {
        let xi = self.coordinate(x);
        let m = self.thetas.len() - 1;
        if xi >= self.offsets[0] || -xi >= self.offsets[m] {
            return Ok(0.0);
        }
        let bounds: Vec<(f64, f64)> =
            (1..m).map(|j| (self.thetas[j].sin(), self.offsets[j] - xi * self.thetas[j].cos())).collect();
        match self.f.s {
            1 => {
                // halfspaces with normals (cos θ, ±sin θ)
                let up = bounds.iter().map(|(c, r)| r / c).fold(f64::INFINITY, f64::min);
                let down = bounds.iter().map(|(c, r)| -r / c).fold(f64::NEG_INFINITY, f64::max);
                Ok((0.5 * (up - down)).max(0.0))
            }
            2 => {
                let big = 4.0 * self.lift.bbox.hi[self.f.dim];
                let mut poly = vec![[-big, -big], [big, -big], [big, big], [-big, big]];
                for k in 0..m_phi {
                    let p = 2.0 * std::f64::consts::PI * k as f64 / m_phi as f64;
                    let e = [p.cos(), p.sin()];
                    // binding grid constraint in azimuth e
                    let rhs = bounds.iter().map(|(c, r)| r / c).fold(f64::INFINITY, f64::min);
                    poly = crate::geometry::clip_polygon(poly, &Halfspace { normal: e.to_vec(), offset: rhs });
                    if poly.len() < 3 {
                        return Ok(0.0);
                    }
                }
                let pts: Vec<Vec<f64>> = poly.iter().map(|p| p.to_vec()).collect();
                Ok(crate::geometry::polygon_area(&pts) / std::f64::consts::PI)
            }
            s => Err(Error::Unsupported(format!("slice volumes for s = {s}"))),
        }
    }
}

fn meridian_direction(f: &SConcaveFunctionSpec, theta: f64) -> Vec<f64> {
    let mut u = vec![0.0; f.dim + f.s];
    u[0] = theta.cos();
    u[f.dim] = theta.sin();
    u
}

impl SConcaveEvaluator for MeridianSConcave {
    fn function(&self) -> &SConcaveFunctionSpec {
        &self.f
    }

    fn delta(&self) -> f64 {
        self.delta
    }

    fn radius(&self, x: &[f64]) -> Result<f64> {
        if self.delta == 0.0 {
            return Ok(self.f.root(x));
        }
        let xi = self.coordinate(x);
        let (j, grid) = self.grid_argmin(xi);
        if grid <= 0.0 || !self.refine {
            return Ok(grid);
        }
        let lo = self.thetas[j - 1].max(1e-3 * self.thetas[1]);
        let hi = self.thetas[j + 1].min(std::f64::consts::PI - 1e-3 * self.thetas[1]);
        let (_, v) = brent_min(|t| Ok((self.offset(t)? - xi * t.cos()) / t.sin()), lo, hi, 1e-9, 100)?;
        Ok(v.min(grid).max(0.0))
    }

    fn extent(&self) -> Option<(f64, f64)> {
        // for radial functions the second entry is the radial extent
        Some((-self.offsets[self.offsets.len() - 1], self.offsets[0]))
    }
}

/// Meridian construction with `angles` grid intervals on `[0, π]`;
/// `refine` turns on the continuous minimisation over `θ`.
pub fn meridian_floating_function(
    f: &SConcaveFunctionSpec,
    w: &WeightSpec,
    delta: f64,
    angles: usize,
    refine: bool,
    quad: &QuadratureSpec,
) -> Result<MeridianSConcave> {
    check_weight(f, w)?;
    if f.dim > 1 && !(f.is_radial() && matches!(w.kind(), crate::weights::WeightKind::Constant(_))) {
        return Err(Error::Unsupported("meridian construction needs n = 1 or a radial function and constant weight".into()));
    }
    if angles < 4 {
        return invalid("meridian grid needs at least 4 angles");
    }
    if delta < 0.0 {
        return invalid("delta must be nonnegative");
    }
    let lift = f.lift();
    let thetas: Vec<f64> = (0..=angles).map(|j| std::f64::consts::PI * j as f64 / angles as f64).collect();
    let offsets = thetas
        .par_iter()
        .map(|t| cap_offset_for_mass(&lift, &meridian_direction(f, *t), w, delta, quad))
        .collect::<Result<Vec<_>>>()?;
    if offsets[0] + offsets[angles] <= 0.0 {
        return Err(Error::FloatingBodyEmpty { delta });
    }
    Ok(MeridianSConcave { f: f.clone(), lift, w: w.clone(), quad: quad.clone(), delta, thetas, offsets, refine })
}

/// `∫ (f - f^Φ_δ)`.
pub fn sconcave_deficit(eval: &dyn SConcaveEvaluator, quad: &QuadratureSpec) -> Result<Estimate> {
    let f = eval.function();
    let n = f.dim();
    if eval.delta() == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let gap = |x: &[f64]| match eval.value(x) {
        Ok(v) => f.value(x) - v,
        Err(e) => {
            failure.lock().unwrap().get_or_insert(e);
            0.0
        }
    };
    let rel = quad.rel_tol.max(1e-10);
    let out = if n == 1 {
        let (lo, hi) = f.support_interval()?;
        let mut breaks = vec![lo, hi];
        breaks.extend(f.kinks());
        if let Some((a, b)) = eval.extent() {
            breaks.extend([a, b]);
        }
        breaks.retain(|b| *b >= lo && *b <= hi);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        integrate_piecewise(|x| gap(&[x]), &breaks, 1e-300, rel)
    } else if f.is_radial() {
        let mut breaks = vec![0.0, 1.0];
        if let Some((_, r)) = eval.extent() {
            if r > 0.0 && r < 1.0 {
                breaks.insert(1, r);
            }
        }
        let mut e = vec![0.0; n];
        let c = sphere_area(n);
        let est = integrate_piecewise(
            |r| {
                e[0] = r;
                gap(&e) * r.powi(n as i32 - 1)
            },
            &breaks,
            1e-300,
            rel,
        );
        Estimate { value: c * est.value, error: c * est.error }
    } else {
        let bbox = f.support().bounding_box();
        let panels = quad.points_per_axis.div_ceil(8).max(2);
        let rules: Vec<Vec<(f64, f64)>> = (0..n).map(|i| composite_rule(bbox.lo[i], bbox.hi[i], 8, panels)).collect();
        let m = rules[0].len();
        let total: f64 = (0..m.pow(n as u32))
            .into_par_iter()
            .map(|k| {
                let mut rem = k;
                let mut x = Vec::with_capacity(n);
                let mut w = 1.0;
                for r in &rules {
                    let (xi, wi) = r[rem % m];
                    rem /= m;
                    x.push(xi);
                    w *= wi;
                }
                w * gap(&x)
            })
            .sum();
        Estimate { value: total, error: f64::NAN }
    };
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(out)
}
