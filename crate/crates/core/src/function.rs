//! Convex functions `ψ` with integrable `e^{-ψ}`.

use std::fmt;
use std::sync::Arc;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{convex_hull_2d, BoundingBox, ConvexBodySpec, ConvexSet, Hull3};
use crate::quadrature::stream_rng;
use crate::roots::scan_min;
use crate::weights::PointFn;

pub type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type HessFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// `ℓ(x) = <slope, x> - offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub slope: Vec<f64>,
    pub offset: f64,
}

impl AffinePiece {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - self.offset
    }
}

#[derive(Clone)]
pub enum FunctionKind {
    /// `½ xᵀ A x + <b, x> + c` with `A` positive definite.
    Quadratic { a: DMatrix<f64>, b: Vec<f64>, c: f64 },
    /// `½ ‖x‖_K²` for a body containing the origin in its interior.
    GaugeSquare { body: ConvexBodySpec },
    /// `max_i ℓ_i`.
    PiecewiseAffine { pieces: Vec<AffinePiece> },
    Custom { value: PointFn, gradient: Option<GradFn>, hessian: Option<HessFn> },
}

/// Constants with `ψ(x) >= alpha |x| - beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coercivity {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone)]
pub struct ConvexFunctionSpec {
    dim: usize,
    kind: FunctionKind,
    coercivity: Coercivity,
    argmin: Vec<f64>,
    min_value: f64,
}

impl fmt::Debug for ConvexFunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match &self.kind {
            FunctionKind::Quadratic { .. } => "quadratic",
            FunctionKind::GaugeSquare { .. } => "gauge_square",
            FunctionKind::PiecewiseAffine { .. } => "piecewise_affine",
            FunctionKind::Custom { .. } => "custom",
        };
        write!(f, "ConvexFunctionSpec({name}, dim {})", self.dim)
    }
}

fn eps_step(x: &[f64], power: f64) -> f64 {
    let scale = x.iter().map(|t| t * t).sum::<f64>().sqrt().max(1.0);
    f64::EPSILON.powf(power) * scale
}

impl ConvexFunctionSpec {
    pub fn quadratic(a: DMatrix<f64>, b: Vec<f64>, c: f64) -> Result<Self> {
        let n = b.len();
        if n == 0 || a.nrows() != n || a.ncols() != n {
            return invalid("quadratic: A must be n × n with n = len(b)");
        }
        if (&a - a.transpose()).amax() > 1e-12 * (1.0 + a.amax()) {
            return invalid("quadratic: A must be symmetric");
        }
        let eig = a.clone().symmetric_eigen();
        let lam = eig.eigenvalues.min();
        if !(lam > 0.0) {
            return invalid("quadratic: A must be positive definite for e^{-ψ} to be integrable");
        }
        let bv = DVector::from_column_slice(&b);
        let argmin = a.clone().lu().solve(&(-&bv)).ok_or_else(|| Error::InvalidInput("singular A".into()))?;
        let min_value = 0.5 * argmin.dot(&(&a * &argmin)) + bv.dot(&argmin) + c;
        let bn = bv.norm();
        let coercivity = Coercivity { alpha: 1.0, beta: ((bn + 1.0).powi(2) / (2.0 * lam) - c).max(0.0) };
        Ok(Self { dim: n, kind: FunctionKind::Quadratic { a, b, c }, coercivity, argmin: argmin.as_slice().to_vec(), min_value })
    }

    /// `|x|² / 2` on `R^n`.
    pub fn half_norm_squared(n: usize) -> Result<Self> {
        Self::quadratic(DMatrix::identity(n, n), vec![0.0; n], 0.0)
    }

    pub fn gauge_square(body: ConvexBodySpec) -> Result<Self> {
        let n = body.dim();
        let origin = vec![0.0; n];
        if !body.contains(&origin) || !(origin_gauge(&body, &origin)? == 0.0) {
            return invalid("gauge square needs the origin in the interior of the body");
        }
        let bbox = body.bounding_box();
        let r_max = bbox.lo.iter().zip(&bbox.hi).map(|(a, b)| a.abs().max(b.abs()).powi(2)).sum::<f64>().sqrt();
        let coercivity = Coercivity { alpha: 1.0 / r_max, beta: 0.5 };
        Ok(Self { dim: n, kind: FunctionKind::GaugeSquare { body }, coercivity, argmin: origin, min_value: 0.0 })
    }

    /// `max_i (<s_i, x> - c_i)`; the slopes must surround the origin.
    pub fn piecewise_affine(pieces: Vec<AffinePiece>) -> Result<Self> {
        let n = pieces.first().map(|p| p.slope.len()).ok_or(Error::NoData)?;
        if n == 0 || pieces.iter().any(|p| p.slope.len() != n) {
            return invalid("affine pieces must share a positive dimension");
        }
        let slopes: Vec<Vec<f64>> = pieces.iter().map(|p| p.slope.clone()).collect();
        let alpha = origin_inradius(&slopes)?;
        if !(alpha > 0.0) {
            return invalid("slopes must contain the origin in the interior of their hull for e^{-ψ} to be integrable");
        }
        let beta = pieces.iter().map(|p| p.offset).fold(f64::NEG_INFINITY, f64::max).max(0.0);
        // min t subject to t >= <s_i, x> - c_i
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let xs: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
        let t = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
        for p in &pieces {
            let mut row: Vec<_> = xs.iter().zip(&p.slope).map(|(v, s)| (*v, -*s)).collect();
            row.push((t, 1.0));
            lp.add_constraint(row.as_slice(), ComparisonOp::Ge, -p.offset);
        }
        let sol = lp
            .solve()
            .map_err(|e| Error::InvalidInput(format!("piecewise affine minimum: {e}")))?
            .into_solution()
            .map_err(|_| Error::InvalidInput("piecewise affine minimum interrupted".into()))?;
        let argmin: Vec<f64> = xs.iter().map(|v| sol.var_value(*v)).collect();
        let min_value = pieces.iter().map(|p| p.eval(&argmin)).fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { dim: n, kind: FunctionKind::PiecewiseAffine { pieces }, coercivity: Coercivity { alpha, beta }, argmin, min_value })
    }

    /// Oracle-backed function; `coercivity` must be a valid certificate.
    pub fn custom(
        dim: usize,
        value: PointFn,
        gradient: Option<GradFn>,
        hessian: Option<HessFn>,
        coercivity: Coercivity,
    ) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be positive");
        }
        if !(coercivity.alpha > 0.0) || !coercivity.beta.is_finite() {
            return invalid("coercivity needs alpha > 0 for e^{-ψ} to be integrable");
        }
        let mut spec = Self {
            dim,
            kind: FunctionKind::Custom { value, gradient, hessian },
            coercivity,
            argmin: vec![0.0; dim],
            min_value: 0.0,
        };
        let (x, v) = spec.minimize_numerically()?;
        spec.argmin = x;
        spec.min_value = v;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    pub fn coercivity(&self) -> Coercivity {
        self.coercivity
    }

    /// Minimiser and minimum value.
    pub fn minimum(&self) -> (&[f64], f64) {
        (&self.argmin, self.min_value)
    }

    pub fn has_hessian(&self) -> bool {
        match &self.kind {
            FunctionKind::Quadratic { .. } | FunctionKind::GaugeSquare { .. } => true,
            FunctionKind::PiecewiseAffine { .. } => true,
            FunctionKind::Custom { hessian, gradient, .. } => hessian.is_some() || gradient.is_some(),
        }
    }

    /// Whether the function is smooth enough for Newton-type slope searches.
    pub fn is_smooth(&self) -> bool {
        match &self.kind {
            FunctionKind::Quadratic { .. } => true,
            FunctionKind::GaugeSquare { body } => !body.is_polytope(),
            FunctionKind::PiecewiseAffine { .. } => false,
            FunctionKind::Custom { hessian, .. } => hessian.is_some(),
        }
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            FunctionKind::Quadratic { a, b, c } => {
                let n = self.dim;
                let mut q = 0.0;
                for i in 0..n {
                    let mut row = 0.0;
                    for j in 0..n {
                        row += a[(i, j)] * x[j];
                    }
                    q += x[i] * (0.5 * row + b[i]);
                }
                q + c
            }
            FunctionKind::GaugeSquare { body } => 0.5 * origin_gauge(body, x).unwrap_or(f64::INFINITY).powi(2),
            FunctionKind::PiecewiseAffine { pieces } => pieces.iter().map(|p| p.eval(x)).fold(f64::NEG_INFINITY, f64::max),
            FunctionKind::Custom { value, .. } => value(x),
        }
    }

    /// Gradient; `None` where a piecewise affine function has a kink.
    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        match &self.kind {
            FunctionKind::Quadratic { a, b, .. } => {
                let g = a * DVector::from_column_slice(x);
                Some(g.iter().zip(b).map(|(u, v)| u + v).collect())
            }
            FunctionKind::PiecewiseAffine { pieces } => {
                let mut vals: Vec<(f64, usize)> = pieces.iter().enumerate().map(|(i, p)| (p.eval(x), i)).collect();
                vals.sort_by(|a, b| b.0.total_cmp(&a.0));
                if vals.len() > 1 && vals[0].0 - vals[1].0 <= 1e-12 * (1.0 + vals[0].0.abs()) {
                    None
                } else {
                    Some(pieces[vals[0].1].slope.clone())
                }
            }
            FunctionKind::GaugeSquare { body } => match ellipsoid_quadratic(body) {
                Some(m) => Some((m * DVector::from_column_slice(x)).as_slice().to_vec()),
                None => Some(self.fd_gradient(x)),
            },
            FunctionKind::Custom { gradient: Some(g), .. } => Some(g(x)),
            FunctionKind::Custom { .. } => Some(self.fd_gradient(x)),
        }
    }

    /// A subgradient; averages active slopes at kinks.
    pub fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        if let Some(g) = self.gradient(x) {
            return g;
        }
        match &self.kind {
            FunctionKind::PiecewiseAffine { pieces } => {
                let top = self.value(x);
                let active: Vec<&AffinePiece> = pieces.iter().filter(|p| top - p.eval(x) <= 1e-12 * (1.0 + top.abs())).collect();
                let k = active.len() as f64;
                (0..self.dim).map(|i| active.iter().map(|p| p.slope[i]).sum::<f64>() / k).collect()
            }
            _ => self.fd_gradient(x),
        }
    }

    fn fd_gradient(&self, x: &[f64]) -> Vec<f64> {
        let h = eps_step(x, 1.0 / 3.0);
        let mut y = x.to_vec();
        (0..self.dim)
            .map(|i| {
                y[i] = x[i] + h;
                let fp = self.value(&y);
                y[i] = x[i] - h;
                let fm = self.value(&y);
                y[i] = x[i];
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    /// Hessian; central differences of the gradient with step
    /// `cbrt(eps) · max(1, |x|)` when no closed form exists.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        match &self.kind {
            FunctionKind::Quadratic { a, .. } => return a.clone(),
            FunctionKind::PiecewiseAffine { .. } => return DMatrix::zeros(n, n),
            FunctionKind::GaugeSquare { body } => {
                if let Some(m) = ellipsoid_quadratic(body) {
                    return m;
                }
            }
            FunctionKind::Custom { hessian: Some(h), .. } => return h(x),
            _ => {}
        }
        let has_grad = matches!(&self.kind, FunctionKind::Custom { gradient: Some(_), .. });
        let mut hm = DMatrix::zeros(n, n);
        if has_grad {
            let h = eps_step(x, 1.0 / 3.0);
            let mut y = x.to_vec();
            for j in 0..n {
                y[j] = x[j] + h;
                let gp = self.gradient(&y).unwrap();
                y[j] = x[j] - h;
                let gm = self.gradient(&y).unwrap();
                y[j] = x[j];
                for i in 0..n {
                    hm[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
                }
            }
        } else {
            let h = eps_step(x, 0.25);
            let f0 = self.value(x);
            let mut y = x.to_vec();
            for i in 0..n {
                for j in i..n {
                    let v = if i == j {
                        y[i] = x[i] + h;
                        let fp = self.value(&y);
                        y[i] = x[i] - h;
                        let fm = self.value(&y);
                        y[i] = x[i];
                        (fp - 2.0 * f0 + fm) / (h * h)
                    } else {
                        let mut s = 0.0;
                        for (di, dj, sign) in [(h, h, 1.0), (h, -h, -1.0), (-h, h, -1.0), (-h, -h, 1.0)] {
                            y[i] = x[i] + di;
                            y[j] = x[j] + dj;
                            s += sign * self.value(&y);
                        }
                        y[i] = x[i];
                        y[j] = x[j];
                        s / (4.0 * h * h)
                    };
                    hm[(i, j)] = v;
                    hm[(j, i)] = v;
                }
            }
        }
        0.5 * (&hm + hm.transpose())
    }

    fn minimize_numerically(&self) -> Result<(Vec<f64>, f64)> {
        let n = self.dim;
        let r = (self.value(&vec![0.0; n]) + self.coercivity.beta) / self.coercivity.alpha + 1.0;
        if n == 1 {
            let (x, v) = scan_min(|t| Ok(self.value(&[t])), -r, r, 2001, 1e-13)?;
            return Ok((vec![x], v));
        }
        let mut x = vec![0.0; n];
        let mut best = self.value(&x);
        let mut step = r / 4.0;
        while step > 1e-12 * r {
            let mut improved = false;
            for i in 0..n {
                for s in [step, -step] {
                    x[i] += s;
                    let v = self.value(&x);
                    if v < best {
                        best = v;
                        improved = true;
                    } else {
                        x[i] -= s;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        Ok((x, best))
    }

    /// Radius `R` with `ψ > ψ_min + T` outside the ball `B(0, R)`.
    pub fn certificate_radius(&self, t: f64) -> f64 {
        (self.min_value + t + self.coercivity.beta) / self.coercivity.alpha
    }

    /// Box containing the sublevel set `{ψ <= ψ_min + T}`: a coercivity
    /// certificate ball tightened by a grid scan, padded by one cell.
    pub fn truncation_box(&self, t: f64) -> Result<BoundingBox> {
        let n = self.dim;
        let level = self.min_value + t;
        let r = self.certificate_radius(t);
        let mut lo = vec![-r; n];
        let mut hi = vec![r; n];
        let per_axis = match n {
            1 => 4001,
            2 => 241,
            3 => 49,
            _ => 13,
        };
        for _pass in 0..2 {
            let cell: Vec<f64> = (0..n).map(|i| (hi[i] - lo[i]) / (per_axis - 1) as f64).collect();
            let mut nlo = self.argmin.clone();
            let mut nhi = self.argmin.clone();
            let mut idx = vec![0usize; n];
            let mut x = vec![0.0; n];
            'outer: loop {
                for i in 0..n {
                    x[i] = lo[i] + cell[i] * idx[i] as f64;
                }
                if self.value(&x) <= level {
                    for i in 0..n {
                        nlo[i] = nlo[i].min(x[i]);
                        nhi[i] = nhi[i].max(x[i]);
                    }
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
                        break 'outer;
                    }
                }
            }
            for i in 0..n {
                lo[i] = (nlo[i] - cell[i]).max(-r);
                hi[i] = (nhi[i] + cell[i]).min(r);
            }
        }
        BoundingBox::new(lo, hi)
    }

    /// Spot checks of convexity, positive semidefiniteness and integrability.
    pub fn validate(&self, seed: u64) -> Result<()> {
        use rand::RngExt;
        let bbox = self.truncation_box(20.0)?;
        let mut rng = stream_rng(seed, 0);
        let n = self.dim;
        let sample = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|i| bbox.lo[i] + (bbox.hi[i] - bbox.lo[i]) * rng.random::<f64>()).collect()
        };
        for _ in 0..200 {
            let x = sample(&mut rng);
            let y = sample(&mut rng);
            let m: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
            let (fx, fy, fm) = (self.value(&x), self.value(&y), self.value(&m));
            if !(fx.is_finite() && fy.is_finite()) {
                return invalid(format!("ψ is not finite at {x:?} or {y:?}"));
            }
            if fm > 0.5 * (fx + fy) + 1e-9 * (1.0 + fx.abs() + fy.abs()) {
                return invalid(format!("ψ fails midpoint convexity between {x:?} and {y:?}"));
            }
            let h = self.hessian(&x);
            let lam = h.symmetric_eigen().eigenvalues.min();
            if lam < -1e-6 * (1.0 + self.hessian(&x).amax()) {
                return invalid(format!("Hessian of ψ is not positive semidefinite at {x:?}"));
            }
        }
        Ok(())
    }

    /// `ψ ∘ A` for an invertible linear map `A`.
    pub fn compose_linear(&self, a: &DMatrix<f64>) -> Result<Self> {
        let n = self.dim;
        if a.nrows() != n || a.ncols() != n {
            return invalid("linear map dimension mismatch");
        }
        let det = a.determinant();
        if det.abs() < 1e-14 {
            return invalid("linear map must be invertible");
        }
        match &self.kind {
            FunctionKind::Quadratic { a: m, b, c } => {
                let bt = a.transpose() * DVector::from_column_slice(b);
                Self::quadratic(a.transpose() * m * a, bt.as_slice().to_vec(), *c)
            }
            _ => {
                let base = self.clone();
                let am = a.clone();
                let apply = move |x: &[f64]| (am.clone() * DVector::from_column_slice(x)).as_slice().to_vec();
                let ap = apply.clone();
                let b2 = base.clone();
                let value: PointFn = Arc::new(move |x: &[f64]| base.value(&apply(x)));
                let at = a.transpose();
                let a2 = a.clone();
                let hessian: HessFn = Arc::new(move |x: &[f64]| &at * b2.hessian(&ap(x)) * &a2);
                let smin = a.clone().svd(false, false).singular_values.min();
                let coercivity = Coercivity { alpha: self.coercivity.alpha * smin, beta: self.coercivity.beta };
                Self::custom(n, value, None, Some(hessian), coercivity)
            }
        }
    }
}

/// Gauge of `body` with respect to the origin.
pub fn origin_gauge(body: &ConvexBodySpec, x: &[f64]) -> Result<f64> {
    use crate::geometry::BodyKind;
    let xn = x.iter().map(|t| t * t).sum::<f64>();
    if xn == 0.0 {
        return Ok(0.0);
    }
    match body.kind() {
        BodyKind::Ball { center, radius } => {
            // |x s - c|² = r², s = 1 / gauge
            let xc: f64 = x.iter().zip(center).map(|(a, b)| a * b).sum();
            let cc: f64 = center.iter().map(|t| t * t).sum::<f64>() - radius * radius;
            if cc >= 0.0 {
                return invalid("origin is not interior");
            }
            let s = (xc + (xc * xc - xn * cc).sqrt()) / xn;
            Ok(1.0 / s)
        }
        BodyKind::Ellipsoid { center, semi_axes, frame } => {
            let loc = |v: &[f64]| {
                let mut z = frame.transpose() * DVector::from_column_slice(v);
                for (zi, a) in z.iter_mut().zip(semi_axes) {
                    *zi /= a;
                }
                z
            };
            let zx = loc(x);
            let zc = loc(center);
            let a = zx.norm_squared();
            let b = zx.dot(&zc);
            let c = zc.norm_squared() - 1.0;
            if c >= 0.0 {
                return invalid("origin is not interior");
            }
            Ok(a / (b + (b * b - a * c).sqrt()))
        }
        BodyKind::Gauge { gauge } => Ok(gauge(x)),
        BodyKind::HPolytope { halfspaces } => {
            let mut g: f64 = 0.0;
            for h in halfspaces {
                if !(h.offset > 0.0) {
                    return invalid("origin is not interior");
                }
                g = g.max(h.normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / h.offset);
            }
            Ok(g)
        }
        BodyKind::VPolytope { .. } => {
            let (mut lo, mut hi) = (0.0, 1.0);
            while body.contains(&x.iter().map(|t| t / hi).collect::<Vec<_>>()) {
                hi *= 2.0;
                if hi > 1e12 {
                    return invalid("origin is not interior");
                }
            }
            for _ in 0..200 {
                let m = 0.5 * (lo + hi);
                if body.contains(&x.iter().map(|t| t / m).collect::<Vec<_>>()) {
                    hi = m;
                } else {
                    lo = m;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            Ok(hi)
        }
    }
}

/// `M` with `½‖x‖_K² = ½ xᵀ M x` for balls and ellipsoids centred at the origin.
fn ellipsoid_quadratic(body: &ConvexBodySpec) -> Option<DMatrix<f64>> {
    use crate::geometry::BodyKind;
    match body.kind() {
        BodyKind::Ball { center, radius } if center.iter().all(|c| *c == 0.0) => {
            let n = center.len();
            Some(DMatrix::identity(n, n) / (radius * radius))
        }
        BodyKind::Ellipsoid { center, semi_axes, frame } if center.iter().all(|c| *c == 0.0) => {
            let d = DMatrix::from_diagonal(&DVector::from_iterator(semi_axes.len(), semi_axes.iter().map(|a| 1.0 / (a * a))));
            Some(frame * d * frame.transpose())
        }
        _ => None,
    }
}

/// Radius of the largest origin-centred ball inside the hull of `points`
/// (negative when the origin is outside).
pub(crate) fn origin_inradius(points: &[Vec<f64>]) -> Result<f64> {
    let n = points[0].len();
    match n {
        1 => {
            let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            Ok((-lo).min(hi))
        }
        2 => {
            let hull = convex_hull_2d(points);
            if hull.len() < 3 {
                return Ok(-1.0);
            }
            let m = hull.len();
            let mut r = f64::INFINITY;
            for i in 0..m {
                let (p, q) = (&hull[i], &hull[(i + 1) % m]);
                let nx = q[1] - p[1];
                let ny = p[0] - q[0];
                let len = (nx * nx + ny * ny).sqrt();
                r = r.min((nx * p[0] + ny * p[1]) / len);
            }
            Ok(r)
        }
        3 => {
            let hull = Hull3::new(points)?;
            Ok(hull.facets().iter().map(|h| h.offset).fold(f64::INFINITY, f64::min))
        }
        _ => Err(Error::Unsupported(format!("piecewise affine functions in dimension {n}"))),
    }
}
