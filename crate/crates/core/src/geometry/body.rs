use std::fmt;
use std::sync::Arc;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use super::caps::{polytope_cap_volume, unit_ball_cap_volume};
use super::hull::{chebyshev_center, convex_hull_2d, halfspace_intersection, lp_support, polytope_volume, Hull3};
use super::{axpy, dot, norm, unit_ball_volume, BoundingBox, ConvexSet, Halfspace};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{stream_rng, Estimate, QuadMethod, QuadratureSpec};
use crate::roots::scan_min;
use crate::weights::WeightSpec;

pub type GaugeFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum BodyKind {
    Ball { center: Vec<f64>, radius: f64 },
    /// `center + frame · diag(semi_axes) · B^n`; the columns of `frame` are orthonormal.
    Ellipsoid { center: Vec<f64>, semi_axes: Vec<f64>, frame: DMatrix<f64> },
    /// `∩ { <y, u_i> <= a_i }`.
    HPolytope { halfspaces: Vec<Halfspace> },
    VPolytope { vertices: Vec<Vec<f64>> },
    /// `{ x : g(x) <= 1 }` for a gauge `g` with the origin in the interior.
    Gauge { gauge: GaugeFn },
}

/// A convex body with nonempty interior.
#[derive(Clone)]
pub struct ConvexBodySpec {
    dim: usize,
    kind: BodyKind,
    bbox: BoundingBox,
    interior: Vec<f64>,
    vertices: Option<Vec<Vec<f64>>>,
    facets: Option<Vec<Halfspace>>,
}

impl fmt::Debug for ConvexBodySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match &self.kind {
            BodyKind::Ball { .. } => "ball",
            BodyKind::Ellipsoid { .. } => "ellipsoid",
            BodyKind::HPolytope { .. } => "h-polytope",
            BodyKind::VPolytope { .. } => "v-polytope",
            BodyKind::Gauge { .. } => "gauge",
        };
        write!(f, "ConvexBodySpec({name}, dim {})", self.dim)
    }
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl ConvexBodySpec {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || !finite(&center) {
            return invalid("ball centre must be a finite nonempty vector");
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return invalid(format!("ball radius must be positive, got {radius}"));
        }
        let bbox = BoundingBox::new(
            center.iter().map(|c| c - radius).collect(),
            center.iter().map(|c| c + radius).collect(),
        )?;
        Ok(Self { dim: center.len(), interior: center.clone(), kind: BodyKind::Ball { center, radius }, bbox, vertices: None, facets: None })
    }

    pub fn unit_ball(dim: usize) -> Result<Self> {
        Self::ball(vec![0.0; dim], 1.0)
    }

    /// Axis-aligned ellipsoid.
    pub fn ellipsoid(center: Vec<f64>, semi_axes: Vec<f64>) -> Result<Self> {
        let n = semi_axes.len();
        Self::ellipsoid_with_frame(center, semi_axes, DMatrix::identity(n, n))
    }

    pub fn ellipsoid_with_frame(center: Vec<f64>, semi_axes: Vec<f64>, frame: DMatrix<f64>) -> Result<Self> {
        let n = center.len();
        if n == 0 || semi_axes.len() != n || frame.nrows() != n || frame.ncols() != n {
            return invalid("ellipsoid centre, semi-axes and frame must agree in dimension");
        }
        if semi_axes.iter().any(|a| !(*a > 0.0 && a.is_finite())) || !finite(&center) {
            return invalid("ellipsoid semi-axes must be positive");
        }
        if (frame.transpose() * &frame - DMatrix::identity(n, n)).amax() > 1e-10 {
            return invalid("ellipsoid frame must be orthonormal");
        }
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        for i in 0..n {
            let ext = (0..n).map(|j| (frame[(i, j)] * semi_axes[j]).powi(2)).sum::<f64>().sqrt();
            lo.push(center[i] - ext);
            hi.push(center[i] + ext);
        }
        let bbox = BoundingBox::new(lo, hi)?;
        Ok(Self { dim: n, interior: center.clone(), kind: BodyKind::Ellipsoid { center, semi_axes, frame }, bbox, vertices: None, facets: None })
    }

    /// Intersection of halfspaces `<y, u_i> <= a_i`; fails when unbounded or
    /// without interior.
    pub fn hpolytope(halfspaces: Vec<Halfspace>) -> Result<Self> {
        let dim = halfspaces.first().map(|h| h.dim()).ok_or(Error::NoData)?;
        if halfspaces.iter().any(|h| h.dim() != dim) {
            return invalid("halfspaces must share a dimension");
        }
        let mut lo = vec![0.0; dim];
        let mut hi = vec![0.0; dim];
        for i in 0..dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            hi[i] = lp_support(&halfspaces, &e)?.0;
            e[i] = -1.0;
            lo[i] = -lp_support(&halfspaces, &e)?.0;
        }
        let (center, r) = chebyshev_center(&halfspaces, dim)?;
        if !(r > 0.0) {
            return invalid("polytope has empty interior");
        }
        let bbox = BoundingBox::new(lo, hi)?;
        let vertices = if dim <= 3 {
            let pad = 1e-9 * bbox.diameter() + 1e-12;
            let wide = BoundingBox::new(
                bbox.lo.iter().map(|x| x - pad).collect(),
                bbox.hi.iter().map(|x| x + pad).collect(),
            )?;
            Some(halfspace_intersection(&halfspaces, &wide)?)
        } else {
            None
        };
        Ok(Self { dim, kind: BodyKind::HPolytope { halfspaces: halfspaces.clone() }, bbox, interior: center, vertices, facets: Some(halfspaces) })
    }

    /// Axis-aligned cube `[-half, half]^dim`.
    pub fn cube(dim: usize, half: f64) -> Result<Self> {
        let mut hs = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            for s in [1.0, -1.0] {
                let mut u = vec![0.0; dim];
                u[i] = s;
                hs.push(Halfspace::new(u, half)?);
            }
        }
        Self::hpolytope(hs)
    }

    /// Convex hull of the given points.
    pub fn vpolytope(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).ok_or(Error::NoData)?;
        if dim == 0 || points.iter().any(|p| p.len() != dim || !finite(p)) {
            return invalid("vertices must share a positive dimension");
        }
        let (vertices, facets) = match dim {
            1 => {
                let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
                let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
                if !(hi > lo) {
                    return invalid("polytope has empty interior");
                }
                (vec![vec![lo], vec![hi]], Some(vec![Halfspace::new(vec![1.0], hi)?, Halfspace::new(vec![-1.0], -lo)?]))
            }
            2 => {
                let hull = convex_hull_2d(&points);
                if hull.len() < 3 {
                    return invalid("polytope has empty interior");
                }
                let n = hull.len();
                let facets = (0..n)
                    .map(|i| {
                        let (p, q) = (&hull[i], &hull[(i + 1) % n]);
                        let normal = vec![q[1] - p[1], p[0] - q[0]];
                        let off = dot(&normal, p);
                        Halfspace::new(normal, off)
                    })
                    .collect::<Result<Vec<_>>>()?;
                (hull, Some(facets))
            }
            3 => {
                let hull = Hull3::new(&points)?;
                let f = hull.facets();
                (hull.vertices, Some(f))
            }
            _ => (points, None),
        };
        let n = vertices.len() as f64;
        let interior: Vec<f64> = (0..dim).map(|k| vertices.iter().map(|v| v[k]).sum::<f64>() / n).collect();
        let lo = (0..dim).map(|k| vertices.iter().map(|v| v[k]).fold(f64::INFINITY, f64::min)).collect();
        let hi = (0..dim).map(|k| vertices.iter().map(|v| v[k]).fold(f64::NEG_INFINITY, f64::max)).collect();
        let bbox = BoundingBox::new(lo, hi)?;
        Ok(Self { dim, kind: BodyKind::VPolytope { vertices: vertices.clone() }, bbox, interior, vertices: Some(vertices), facets })
    }

    /// Unit ball of the gauge `g`; `bbox` must contain the body and the
    /// origin must be interior.
    pub fn gauge(dim: usize, gauge: GaugeFn, bbox: BoundingBox) -> Result<Self> {
        if bbox.dim() != dim {
            return invalid("bounding box dimension mismatch");
        }
        let origin = vec![0.0; dim];
        if !bbox.contains(&origin) || !(gauge(&origin) < 1.0) {
            return invalid("the origin must be an interior point of a gauge body");
        }
        Ok(Self { dim, kind: BodyKind::Gauge { gauge }, bbox, interior: origin, vertices: None, facets: None })
    }

    pub fn kind(&self) -> &BodyKind {
        &self.kind
    }

    /// Vertices for polytopes of dimension at most three.
    pub fn vertices(&self) -> Option<&[Vec<f64>]> {
        self.vertices.as_deref()
    }

    pub fn is_polytope(&self) -> bool {
        matches!(self.kind, BodyKind::HPolytope { .. } | BodyKind::VPolytope { .. })
    }

    /// Gauge function of the body centred at its interior point.
    pub fn gauge_value(&self, x: &[f64]) -> f64 {
        let c = &self.interior;
        match &self.kind {
            BodyKind::Ball { radius, .. } => x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / radius,
            BodyKind::Ellipsoid { semi_axes, frame, .. } => self.ellipsoid_local(x, c, frame, semi_axes).norm(),
            BodyKind::Gauge { gauge } => gauge(x),
            BodyKind::HPolytope { .. } | BodyKind::VPolytope { .. } => {
                let facets = self.facets.as_ref().expect("polytope facets");
                facets
                    .iter()
                    .map(|h| (dot(x, &h.normal) - dot(c, &h.normal)) / (h.offset - dot(c, &h.normal)))
                    .fold(0.0, f64::max)
            }
        }
    }

    fn ellipsoid_local(&self, x: &[f64], c: &[f64], frame: &DMatrix<f64>, axes: &[f64]) -> DVector<f64> {
        let d = DVector::from_iterator(x.len(), x.iter().zip(c).map(|(a, b)| a - b));
        let mut z = frame.transpose() * d;
        for (zi, a) in z.iter_mut().zip(axes) {
            *zi /= a;
        }
        z
    }

    fn vpolytope_lp_contains(&self, vertices: &[Vec<f64>], x: &[f64]) -> bool {
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let lam: Vec<_> = vertices.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
        let ones: Vec<_> = lam.iter().map(|v| (*v, 1.0)).collect();
        lp.add_constraint(ones.as_slice(), ComparisonOp::Eq, 1.0);
        for k in 0..self.dim {
            let row: Vec<_> = lam.iter().zip(vertices).map(|(v, p)| (*v, p[k])).collect();
            lp.add_constraint(row.as_slice(), ComparisonOp::Eq, x[k]);
        }
        lp.solve().is_ok()
    }

    fn gauge_support(&self, gauge: &GaugeFn, u: &[f64]) -> Result<Vec<f64>> {
        let boundary = |theta: &[f64]| -> Vec<f64> {
            let g = gauge(theta);
            theta.iter().map(|t| t / g).collect()
        };
        match self.dim {
            1 => Ok(if u[0] >= 0.0 { boundary(&[1.0]) } else { boundary(&[-1.0]) }),
            2 => {
                let obj = |t: f64| Ok(-dot(&boundary(&[t.cos(), t.sin()]), u));
                let (t, _) = scan_min(obj, 0.0, 2.0 * std::f64::consts::PI, 721, 1e-12)?;
                Ok(boundary(&[t.cos(), t.sin()]))
            }
            3 => {
                let dir = |a: f64, b: f64| [a.sin() * b.cos(), a.sin() * b.sin(), a.cos()];
                let obj = |a: f64, b: f64| -dot(&boundary(&dir(a, b)), u);
                let (mut best_a, mut best_b, mut best) = (0.0, 0.0, f64::INFINITY);
                for i in 0..=90 {
                    for j in 0..180 {
                        let (a, b) = (std::f64::consts::PI * i as f64 / 90.0, std::f64::consts::PI * j as f64 / 90.0);
                        let v = obj(a, b);
                        if v < best {
                            (best_a, best_b, best) = (a, b, v);
                        }
                    }
                }
                let mut step = std::f64::consts::PI / 90.0;
                while step > 1e-10 {
                    let mut improved = false;
                    for (da, db) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                        let v = obj(best_a + da, best_b + db);
                        if v < best {
                            (best_a, best_b, best) = (best_a + da, best_b + db, v);
                            improved = true;
                        }
                    }
                    if !improved {
                        step *= 0.5;
                    }
                }
                Ok(boundary(&dir(best_a, best_b)))
            }
            d => Err(Error::Unsupported(format!("gauge support in dimension {d}"))),
        }
    }

    /// Lebesgue volume: closed form for balls, ellipsoids and low-dimensional
    /// polytopes, polar quadrature for planar gauges, Monte Carlo otherwise.
    pub fn volume(&self, quad: &QuadratureSpec) -> Result<Estimate> {
        match &self.kind {
            BodyKind::Ball { radius, .. } => Ok(Estimate::exact(unit_ball_volume(self.dim) * radius.powi(self.dim as i32))),
            BodyKind::Ellipsoid { semi_axes, .. } => {
                Ok(Estimate::exact(unit_ball_volume(self.dim) * semi_axes.iter().product::<f64>()))
            }
            _ if self.vertices.is_some() && self.dim <= 3 => {
                Ok(Estimate::exact(polytope_volume(self.vertices.as_ref().unwrap())?))
            }
            BodyKind::Gauge { gauge } if self.dim == 2 && quad.method != QuadMethod::MonteCarlo => {
                let m = quad.points_per_axis.max(256);
                let area = |m: usize| {
                    let h = 2.0 * std::f64::consts::PI / m as f64;
                    (0..m).map(|k| {
                        let t = h * k as f64;
                        0.5 / gauge(&[t.cos(), t.sin()]).powi(2)
                    }).sum::<f64>() * h
                };
                let fine = area(m);
                let coarse = area(m / 2);
                Ok(Estimate { value: fine, error: (fine - coarse).abs() })
            }
            _ => Ok(self.mc_mass(None, None, quad)),
        }
    }

    /// Monte Carlo `∫_{K ∩ H} Φ` with common random numbers.
    pub(crate) fn mc_mass(&self, cut: Option<&Halfspace>, w: Option<&WeightSpec>, quad: &QuadratureSpec) -> Estimate {
        use rand::RngExt;
        let mut rng = stream_rng(quad.seed, 0);
        let vol = self.bbox.volume();
        let mut x = vec![0.0; self.dim];
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..quad.samples {
            for k in 0..self.dim {
                x[k] = self.bbox.lo[k] + (self.bbox.hi[k] - self.bbox.lo[k]) * rng.random::<f64>();
            }
            let inside = self.contains(&x) && cut.is_none_or(|h| h.depth(&x) >= 0.0);
            let v = if inside { w.map_or(1.0, |w| w.eval(&x)) } else { 0.0 };
            s += v;
            s2 += v * v;
        }
        let n = quad.samples as f64;
        let mean = s / n;
        let var = (s2 / n - mean * mean).max(0.0);
        Estimate { value: vol * mean, error: vol * (var / n).sqrt() }
    }
}

impl ConvexSet for ConvexBodySpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn contains(&self, x: &[f64]) -> bool {
        match &self.kind {
            BodyKind::Ball { center, radius } => {
                x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>() <= radius * radius
            }
            BodyKind::Ellipsoid { center, semi_axes, frame } => {
                self.ellipsoid_local(x, center, frame, semi_axes).norm_squared() <= 1.0
            }
            BodyKind::Gauge { gauge } => gauge(x) <= 1.0,
            BodyKind::HPolytope { .. } | BodyKind::VPolytope { .. } => match &self.facets {
                Some(f) => f.iter().all(|h| dot(x, &h.normal) <= h.offset + 1e-12 * (1.0 + h.offset.abs())),
                None => self.vpolytope_lp_contains(self.vertices.as_ref().unwrap(), x),
            },
        }
    }

    fn support_value(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim {
            return invalid("direction dimension mismatch");
        }
        match &self.kind {
            BodyKind::Ball { center, radius } => Ok(dot(center, u) + radius * norm(u)),
            BodyKind::Ellipsoid { center, semi_axes, frame } => {
                let mut w = frame.transpose() * DVector::from_column_slice(u);
                for (wi, a) in w.iter_mut().zip(semi_axes) {
                    *wi *= a;
                }
                Ok(dot(center, u) + w.norm())
            }
            _ => Ok(dot(&self.support_point(u)?, u)),
        }
    }

    fn support_point(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.dim {
            return invalid("direction dimension mismatch");
        }
        let nu = norm(u);
        if nu == 0.0 {
            return Ok(self.interior.clone());
        }
        match &self.kind {
            BodyKind::Ball { center, radius } => Ok(axpy(radius / nu, u, center)),
            BodyKind::Ellipsoid { center, semi_axes, frame } => {
                let mut w = frame.transpose() * DVector::from_column_slice(u);
                for (wi, a) in w.iter_mut().zip(semi_axes) {
                    *wi *= a;
                }
                let wn = w.norm();
                for (wi, a) in w.iter_mut().zip(semi_axes) {
                    *wi *= a / wn;
                }
                let p = frame * w;
                Ok(p.iter().zip(center).map(|(a, b)| a + b).collect())
            }
            BodyKind::HPolytope { halfspaces } => match &self.vertices {
                Some(v) => Ok(argmax(v, u)),
                None => Ok(lp_support(halfspaces, u)?.1),
            },
            BodyKind::VPolytope { vertices } => Ok(argmax(vertices, u)),
            BodyKind::Gauge { gauge } => self.gauge_support(gauge, u),
        }
    }

    fn bounding_box(&self) -> BoundingBox {
        self.bbox.clone()
    }

    fn interior_point(&self) -> Vec<f64> {
        self.interior.clone()
    }

    fn slice_breakpoints(&self, u: &[f64]) -> Vec<f64> {
        self.vertices.as_ref().map(|vs| vs.iter().map(|v| dot(v, u)).collect()).unwrap_or_default()
    }

    fn chord(&self, p: &[f64], d: &[f64]) -> (f64, f64) {
        let quad_roots = |a: f64, b: f64, c: f64| {
            // a t^2 + 2 b t + c = 0 with c <= 0
            let disc = (b * b - a * c).max(0.0).sqrt();
            let hi = if b >= 0.0 { -c / (b + disc) } else { (disc - b) / a };
            let lo = if b >= 0.0 { -(b + disc) / a } else { c / (disc - b) };
            (lo.min(0.0), hi.max(0.0))
        };
        match &self.kind {
            BodyKind::Ball { center, radius } => {
                let q: Vec<f64> = p.iter().zip(center).map(|(a, b)| a - b).collect();
                quad_roots(dot(d, d), dot(&q, d), dot(&q, &q) - radius * radius)
            }
            BodyKind::Ellipsoid { center, semi_axes, frame } => {
                let q = self.ellipsoid_local(p, center, frame, semi_axes);
                let zero = vec![0.0; self.dim];
                let e = self.ellipsoid_local(&axpy(1.0, d, &zero), &zero, frame, semi_axes);
                quad_roots(e.norm_squared(), q.dot(&e), q.norm_squared() - 1.0)
            }
            _ if self.facets.is_some() => {
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                for h in self.facets.as_ref().unwrap() {
                    let den = dot(d, &h.normal);
                    let slack = h.offset - dot(p, &h.normal);
                    if den > 0.0 {
                        hi = hi.min(slack / den);
                    } else if den < 0.0 {
                        lo = lo.max(slack / den);
                    }
                }
                (lo.min(0.0), hi.max(0.0))
            }
            _ => {
                let reach = self.bbox.diameter() * 2.0 + 1.0;
                let edge = |sign: f64| {
                    let (mut lo, mut hi) = (0.0, reach);
                    for _ in 0..60 {
                        let m = 0.5 * (lo + hi);
                        if self.contains(&axpy(sign * m, d, p)) {
                            lo = m;
                        } else {
                            hi = m;
                        }
                    }
                    0.5 * (lo + hi)
                };
                (-edge(-1.0), edge(1.0))
            }
        }
    }

    fn cap_mass(&self, cut: &Halfspace, w: &WeightSpec, quad: &QuadratureSpec) -> Result<Estimate> {
        if cut.dim() != self.dim || w.ambient_dim() != self.dim {
            return invalid("cap dimension mismatch");
        }
        let h = self.support_value(&cut.normal)?;
        if cut.offset >= h {
            return Ok(Estimate::exact(0.0));
        }
        match (w.constant_value(), &self.kind) {
            (Some(eta), BodyKind::Ball { radius, .. }) => {
                let hn = ((h - cut.offset) / radius).min(2.0);
                Ok(Estimate::exact(eta * radius.powi(self.dim as i32) * unit_ball_cap_volume(self.dim, hn)))
            }
            (Some(eta), BodyKind::Ellipsoid { semi_axes, frame, .. }) => {
                let mut v = frame.transpose() * DVector::from_column_slice(&cut.normal);
                for (vi, a) in v.iter_mut().zip(semi_axes) {
                    *vi *= a;
                }
                let hn = ((h - cut.offset) / v.norm()).min(2.0);
                Ok(Estimate::exact(eta * semi_axes.iter().product::<f64>() * unit_ball_cap_volume(self.dim, hn)))
            }
            (Some(eta), _) if self.is_polytope() && self.dim <= 3 => {
                Ok(Estimate::exact(eta * polytope_cap_volume(self.vertices.as_ref().unwrap(), cut)?))
            }
            _ if self.dim > 3 || quad.method == QuadMethod::MonteCarlo => Ok(self.mc_mass(Some(cut), Some(w), quad)),
            _ => super::caps::slice_cap_mass(self, cut, w, quad),
        }
    }
}

fn argmax(points: &[Vec<f64>], u: &[f64]) -> Vec<f64> {
    points
        .iter()
        .max_by(|a, b| dot(a, u).total_cmp(&dot(b, u)))
        .cloned()
        .unwrap_or_default()
}
