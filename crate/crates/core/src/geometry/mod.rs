//! Convex bodies, halfspaces, weighted caps and polytope utilities.

mod body;
mod caps;
mod hull;

pub use body::{BodyKind, ConvexBodySpec, GaugeFn};
pub use caps::{
    cap_weighted_volume, ellipsoid_cap_bounds, phi_barycenter, section_barycenter, slice_cap_mass,
    unit_ball_cap_volume,
};
pub(crate) use hull::clip_polygon;
pub use hull::{convex_hull_2d, halfspace_intersection, polygon_area, polytope_volume, Hull3};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};
use crate::quadrature::{Estimate, QuadratureSpec};
use crate::weights::WeightSpec;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| alpha * a + b).collect()
}

/// Volume of the n-dimensional unit ball; `unit_ball_volume(0) == 1`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI / 3.0,
        _ => {
            let h = n as f64 / 2.0;
            (h * std::f64::consts::PI.ln() - ln_gamma(h + 1.0)).exp()
        }
    }
}

/// Surface area of the unit sphere S^{n-1} in R^n; `sphere_area(1) == 2`.
pub fn sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

/// Closed halfspace `{ y : <y, normal> >= offset }` with a unit normal.
///
/// The body keeps the complementary side `<y, normal> <= offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    /// Normalises `normal`; the offset is rescaled accordingly.
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let n = norm(&normal);
        if !(n > 0.0 && n.is_finite()) || !offset.is_finite() {
            return invalid("halfspace normal must be a finite nonzero vector");
        }
        Ok(Self { normal: normal.iter().map(|x| x / n).collect(), offset: offset / n })
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// Signed distance of `y` into the cut-off side.
    pub fn depth(&self, y: &[f64]) -> f64 {
        dot(y, &self.normal) - self.offset
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return invalid("bounding box needs lo < hi in every coordinate");
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn diameter(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// Outward facet halfspaces, in the `<y, u> <= a` convention of the kept side.
    pub fn facets(&self) -> Vec<Halfspace> {
        let n = self.dim();
        let mut out = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            out.push(Halfspace { normal: e.clone(), offset: self.hi[i] });
            e[i] = -1.0;
            out.push(Halfspace { normal: e, offset: -self.lo[i] });
        }
        out
    }
}

/// Operations every convex body used by the floating constructions provides.
pub trait ConvexSet: Send + Sync {
    fn dim(&self) -> usize;
    fn contains(&self, x: &[f64]) -> bool;
    fn support_value(&self, u: &[f64]) -> Result<f64>;
    fn support_point(&self, u: &[f64]) -> Result<Vec<f64>>;
    fn bounding_box(&self) -> BoundingBox;
    fn interior_point(&self) -> Vec<f64>;

    /// Heights `<y, u>` where the section volume is not smooth (vertices of
    /// polytopes).
    fn slice_breakpoints(&self, _u: &[f64]) -> Vec<f64> {
        Vec::new()
    }

    /// Extent of the body along the line `p + t d`, for `p` inside.
    fn chord(&self, p: &[f64], d: &[f64]) -> (f64, f64) {
        let reach = self.bounding_box().diameter() * 2.0 + 1.0;
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

    /// Weighted volume of the cap `K ∩ H` cut off by `cut`.
    fn cap_mass(&self, cut: &Halfspace, w: &WeightSpec, quad: &QuadratureSpec) -> Result<Estimate> {
        slice_cap_mass(self, cut, w, quad)
    }
}
