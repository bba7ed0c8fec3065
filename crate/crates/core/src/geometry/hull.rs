use chull::ConvexHull;
use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{Matrix3, Vector3};

use super::{dot, BoundingBox, Halfspace};
use crate::error::{invalid, Error, Result};

/// Convex hull of planar points, counter-clockwise, without collinear points.
pub fn convex_hull_2d(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts.into_iter().map(|p| p.to_vec()).collect();
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull.into_iter().map(|p| p.to_vec()).collect()
}

/// Shoelace area of a simple polygon; positive for counter-clockwise order.
pub fn polygon_area(poly: &[Vec<f64>]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let (cx, cy) = (poly[0][0], poly[0][1]);
    let mut s = 0.0;
    for i in 0..n {
        let a = &poly[i];
        let b = &poly[(i + 1) % n];
        s += (a[0] - cx) * (b[1] - cy) - (b[0] - cx) * (a[1] - cy);
    }
    0.5 * s
}

/// Triangulated boundary of a three-dimensional convex hull.
#[derive(Debug, Clone)]
pub struct Hull3 {
    pub vertices: Vec<Vec<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl Hull3 {
    pub fn new(points: &[Vec<f64>]) -> Result<Self> {
        let hull = ConvexHull::try_new(points, 1e-13, None)
            .map_err(|e| Error::InvalidInput(format!("convex hull failed: {e}")))?;
        let (vertices, idx) = hull.vertices_indices();
        let triangles = idx.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok(Self { vertices, triangles })
    }

    pub fn centroid(&self) -> Vec<f64> {
        let n = self.vertices.len() as f64;
        (0..3).map(|k| self.vertices.iter().map(|v| v[k]).sum::<f64>() / n).collect()
    }

    pub fn volume(&self) -> f64 {
        let c = Vector3::from_column_slice(&self.centroid());
        self.triangles
            .iter()
            .map(|t| {
                let p = |i: usize| Vector3::from_column_slice(&self.vertices[t[i]]) - c;
                p(0).cross(&p(1)).dot(&p(2)).abs() / 6.0
            })
            .sum()
    }

    /// Outward facet planes in the kept-side convention `<y, u> <= a`.
    pub fn facets(&self) -> Vec<Halfspace> {
        let c = Vector3::from_column_slice(&self.centroid());
        self.triangles
            .iter()
            .filter_map(|t| {
                let p = |i: usize| Vector3::from_column_slice(&self.vertices[t[i]]);
                let mut n = (p(1) - p(0)).cross(&(p(2) - p(0)));
                let len = n.norm();
                if len == 0.0 {
                    return None;
                }
                n /= len;
                let mut a = n.dot(&p(0));
                if n.dot(&c) > a {
                    n = -n;
                    a = -a;
                }
                Some(Halfspace { normal: n.as_slice().to_vec(), offset: a })
            })
            .collect()
    }
}

/// Volume of the convex hull of `points` in dimension 1, 2 or 3.
pub fn polytope_volume(points: &[Vec<f64>]) -> Result<f64> {
    let dim = points.first().map(|p| p.len()).ok_or(Error::NoData)?;
    match dim {
        1 => {
            let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            Ok(hi - lo)
        }
        2 => Ok(polygon_area(&convex_hull_2d(points))),
        3 => Ok(Hull3::new(points)?.volume()),
        _ => Err(Error::Unsupported(format!("exact polytope volume in dimension {dim}"))),
    }
}

// Box on LP variables; a solution reaching it certifies unboundedness.
const LP_BOX: f64 = 1e9;

/// Largest ball inside `{ <y, u_i> <= a_i }`: returns centre and radius.
pub(crate) fn chebyshev_center(halfspaces: &[Halfspace], dim: usize) -> Result<(Vec<f64>, f64)> {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let xs: Vec<_> = (0..dim).map(|_| lp.add_var(0.0, (-LP_BOX, LP_BOX))).collect();
    let r = lp.add_var(1.0, (-LP_BOX, LP_BOX));
    for h in halfspaces {
        let mut expr: Vec<_> = xs.iter().zip(&h.normal).map(|(v, c)| (*v, *c)).collect();
        expr.push((r, 1.0));
        lp.add_constraint(expr.as_slice(), ComparisonOp::Le, h.offset);
    }
    let sol = lp
        .solve()
        .map_err(|e| match e {
            microlp::Error::Unbounded => Error::UnboundedBody,
            other => Error::InvalidInput(format!("linear program failed: {other}")),
        })?
        .into_solution()
        .map_err(|_| Error::InvalidInput("linear program interrupted".into()))?;
    let x: Vec<f64> = xs.iter().map(|v| sol.var_value(*v)).collect();
    if x.iter().any(|t| t.abs() >= 0.5 * LP_BOX) {
        return Err(Error::UnboundedBody);
    }
    Ok((x, sol.var_value(r)))
}

/// Maximises `<u, y>` over `{ <y, u_i> <= a_i }`.
pub(crate) fn lp_support(halfspaces: &[Halfspace], u: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let xs: Vec<_> = u.iter().map(|c| lp.add_var(*c, (-LP_BOX, LP_BOX))).collect();
    for h in halfspaces {
        let expr: Vec<_> = xs.iter().zip(&h.normal).map(|(v, c)| (*v, *c)).collect();
        lp.add_constraint(expr.as_slice(), ComparisonOp::Le, h.offset);
    }
    let sol = lp
        .solve()
        .map_err(|e| match e {
            microlp::Error::Unbounded => Error::UnboundedBody,
            microlp::Error::Infeasible => Error::InvalidInput("empty polytope".into()),
            other => Error::InvalidInput(format!("linear program failed: {other}")),
        })?
        .into_solution()
        .map_err(|_| Error::InvalidInput("linear program interrupted".into()))?;
    let x: Vec<f64> = xs.iter().map(|v| sol.var_value(*v)).collect();
    if x.iter().any(|t| t.abs() >= 0.5 * LP_BOX) {
        return Err(Error::UnboundedBody);
    }
    Ok((dot(&x, u), x))
}

pub(crate) fn clip_polygon(poly: Vec<[f64; 2]>, h: &Halfspace) -> Vec<[f64; 2]> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    let (u0, u1, a) = (h.normal[0], h.normal[1], h.offset);
    let slack = |p: &[f64; 2]| a - (u0 * p[0] + u1 * p[1]);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let (sp, sq) = (slack(&p), slack(&q));
        if sp >= 0.0 {
            out.push(p);
        }
        if (sp >= 0.0) != (sq >= 0.0) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Vertices of `∩ { <y, u_i> <= a_i }` intersected with `bbox`.
///
/// Dimension 2 clips the box polygon (counter-clockwise output); dimension 3
/// goes through the polar dual around a Chebyshev centre.
pub fn halfspace_intersection(halfspaces: &[Halfspace], bbox: &BoundingBox) -> Result<Vec<Vec<f64>>> {
    let dim = bbox.dim();
    if halfspaces.iter().any(|h| h.dim() != dim) {
        return invalid("halfspace dimension mismatch");
    }
    match dim {
        1 => {
            let mut lo = bbox.lo[0];
            let mut hi = bbox.hi[0];
            for h in halfspaces {
                let u = h.normal[0];
                if u > 0.0 {
                    hi = hi.min(h.offset / u);
                } else if u < 0.0 {
                    lo = lo.max(h.offset / u);
                } else if h.offset < 0.0 {
                    return Err(Error::FloatingBodyEmpty { delta: f64::NAN });
                }
            }
            if hi <= lo {
                return Err(Error::FloatingBodyEmpty { delta: f64::NAN });
            }
            Ok(vec![vec![lo], vec![hi]])
        }
        2 => {
            let mut poly = vec![
                [bbox.lo[0], bbox.lo[1]],
                [bbox.hi[0], bbox.lo[1]],
                [bbox.hi[0], bbox.hi[1]],
                [bbox.lo[0], bbox.hi[1]],
            ];
            for h in halfspaces {
                poly = clip_polygon(poly, h);
                if poly.len() < 3 {
                    return Err(Error::FloatingBodyEmpty { delta: f64::NAN });
                }
            }
            let pts: Vec<Vec<f64>> = poly.iter().map(|p| p.to_vec()).collect();
            let hull = convex_hull_2d(&pts);
            if hull.len() < 3 || polygon_area(&hull) <= 0.0 {
                return Err(Error::FloatingBodyEmpty { delta: f64::NAN });
            }
            Ok(hull)
        }
        3 => {
            let mut all: Vec<Halfspace> = halfspaces.to_vec();
            all.extend(bbox.facets());
            let (p, r) = chebyshev_center(&all, 3)?;
            if !(r > 1e-12 * bbox.diameter()) {
                return Err(Error::FloatingBodyEmpty { delta: f64::NAN });
            }
            let dual: Vec<Vec<f64>> = all
                .iter()
                .map(|h| {
                    let s = h.offset - dot(&h.normal, &p);
                    h.normal.iter().map(|u| u / s).collect()
                })
                .collect();
            let hull = Hull3::new(&dual)?;
            let mut verts: Vec<Vec<f64>> = Vec::new();
            let tol = 1e-10 * bbox.diameter();
            for t in &hull.triangles {
                let m = Matrix3::from_rows(&[
                    nalgebra::RowVector3::from_row_slice(&hull.vertices[t[0]]),
                    nalgebra::RowVector3::from_row_slice(&hull.vertices[t[1]]),
                    nalgebra::RowVector3::from_row_slice(&hull.vertices[t[2]]),
                ]);
                let Some(w) = m.lu().solve(&Vector3::new(1.0, 1.0, 1.0)) else { continue };
                let v = vec![p[0] + w[0], p[1] + w[1], p[2] + w[2]];
                if !v.iter().all(|x| x.is_finite()) {
                    continue;
                }
                if !verts.iter().any(|q| q.iter().zip(&v).all(|(a, b)| (a - b).abs() < tol)) {
                    verts.push(v);
                }
            }
            if verts.len() < 4 {
                return Err(Error::FloatingBodyEmpty { delta: f64::NAN });
            }
            Ok(verts)
        }
        _ => Err(Error::Unsupported(format!("halfspace intersection in dimension {dim}"))),
    }
}
