use statrs::function::beta::beta_reg;

use super::hull::{clip_polygon, polygon_area, polytope_volume};
use super::{axpy, dot, unit_ball_volume, ConvexSet, Halfspace};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate_adaptive_vec, integrate_gl, Estimate, QuadratureSpec};
use crate::weights::WeightSpec;

/// Volume of the cap of depth `h` (in `[0, 2]`) of the unit ball `B^n`.
pub fn unit_ball_cap_volume(n: usize, h: f64) -> f64 {
    let h = h.clamp(0.0, 2.0);
    match n {
        1 => h,
        2 => {
            // central angle of the chord
            let theta = 4.0 * (0.5 * h).sqrt().asin();
            if theta < 1e-2 {
                let t2 = theta * theta;
                theta * t2 * (1.0 / 12.0 - t2 * (1.0 / 240.0 - t2 / 10080.0))
            } else {
                0.5 * (theta - theta.sin())
            }
        }
        3 => std::f64::consts::PI * h * h * (3.0 - h) / 3.0,
        _ => {
            let full = unit_ball_volume(n);
            if h <= 1.0 {
                0.5 * full * beta_reg((n as f64 + 1.0) / 2.0, 0.5, h * (2.0 - h))
            } else {
                full - unit_ball_cap_volume(n, 2.0 - h)
            }
        }
    }
}

/// Volume of `P ∩ { <y, u> >= a }` for a polytope in dimension 2 or 3.
pub(crate) fn polytope_cap_volume(vertices: &[Vec<f64>], cut: &Halfspace) -> Result<f64> {
    let dim = cut.dim();
    match dim {
        1 => {
            let hi = vertices.iter().map(|v| v[0] * cut.normal[0]).fold(f64::NEG_INFINITY, f64::max);
            let lo = vertices.iter().map(|v| v[0] * cut.normal[0]).fold(f64::INFINITY, f64::min);
            Ok((hi - cut.offset.max(lo)).max(0.0))
        }
        2 => {
            let poly: Vec<[f64; 2]> = vertices.iter().map(|v| [v[0], v[1]]).collect();
            let flipped = Halfspace { normal: cut.normal.iter().map(|x| -x).collect(), offset: -cut.offset };
            let clipped: Vec<Vec<f64>> = clip_polygon(poly, &flipped).iter().map(|p| p.to_vec()).collect();
            Ok(polygon_area(&clipped).abs())
        }
        3 => {
            let mut pts: Vec<Vec<f64>> = vertices.iter().filter(|v| cut.depth(v) >= 0.0).cloned().collect();
            for i in 0..vertices.len() {
                for j in i + 1..vertices.len() {
                    let (di, dj) = (cut.depth(&vertices[i]), cut.depth(&vertices[j]));
                    if (di >= 0.0) != (dj >= 0.0) {
                        let t = di / (di - dj);
                        pts.push(vertices[i].iter().zip(&vertices[j]).map(|(a, b)| a + t * (b - a)).collect());
                    }
                }
            }
            if pts.len() < 4 {
                return Ok(0.0);
            }
            Ok(polytope_volume(&pts).unwrap_or(0.0))
        }
        _ => Err(Error::Unsupported(format!("exact polytope cap in dimension {dim}"))),
    }
}

fn orthonormal_complement(u: &[f64]) -> Vec<Vec<f64>> {
    let n = u.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let mut v = axpy(-dot(&e, u), u, &e);
        for b in &basis {
            v = axpy(-dot(&v, b), b, &v);
        }
        let len = dot(&v, &v).sqrt();
        if len > 1e-8 {
            basis.push(v.iter().map(|x| x / len).collect());
        }
        if basis.len() == n - 1 {
            break;
        }
    }
    basis
}

const SECTION_REL_TOL: f64 = 1e-9;

/// Weighted mass and first moments of the section `K ∩ { <y, u> = t }`
/// through `spine`; entries are `[mass, moment_1, ..., moment_dim]`.
fn section_moments<B: ConvexSet + ?Sized>(
    body: &B,
    basis: &[Vec<f64>],
    spine: &[f64],
    w: &WeightSpec,
    angles: usize,
) -> [f64; 4] {
    let dim = body.dim();
    let mut out = [0.0; 4];
    let eta = w.constant_value();
    match dim {
        1 => {
            let m = w.eval(spine);
            out[0] = m;
            out[1] = m * spine[0];
        }
        2 => {
            let e = &basis[0];
            let (lo, hi) = body.chord(spine, e);
            let (m, mt) = match eta {
                Some(eta) => (eta * (hi - lo), eta * 0.5 * (hi * hi - lo * lo)),
                None => {
                    let mut p = vec![0.0; 2];
                    let m = integrate_gl(
                        |t| {
                            p[0] = spine[0] + t * e[0];
                            p[1] = spine[1] + t * e[1];
                            w.eval(&p)
                        },
                        lo,
                        hi,
                        16,
                    );
                    let mt = integrate_gl(
                        |t| {
                            p[0] = spine[0] + t * e[0];
                            p[1] = spine[1] + t * e[1];
                            t * w.eval(&p)
                        },
                        lo,
                        hi,
                        16,
                    );
                    (m, mt)
                }
            };
            out[0] = m;
            for k in 0..2 {
                out[k + 1] = m * spine[k] + mt * e[k];
            }
        }
        3 => {
            // adaptive in the angle: section boundaries of lifted bodies have corners
            let mut p = vec![0.0; 3];
            let section = |phi: f64, p: &mut Vec<f64>| {
                let d: Vec<f64> = (0..3).map(|i| phi.cos() * basis[0][i] + phi.sin() * basis[1][i]).collect();
                let (_, r) = body.chord(spine, &d);
                let r = r.max(0.0);
                let (m, mr) = match eta {
                    Some(eta) => (eta * r * r / 2.0, eta * r * r * r / 3.0),
                    None => {
                        let mut f = |t: f64, pow: i32| {
                            for i in 0..3 {
                                p[i] = spine[i] + t * d[i];
                            }
                            w.eval(p) * t.powi(pow)
                        };
                        (integrate_gl(|t| f(t, 1), 0.0, r, 12), integrate_gl(|t| f(t, 2), 0.0, r, 12))
                    }
                };
                [m, m * spine[0] + mr * d[0], m * spine[1] + mr * d[1], m * spine[2] + mr * d[2]]
            };
            let quarter = 0.5 * std::f64::consts::PI;
            for k in 0..4 {
                let (v, _) = integrate_adaptive_vec(
                    |phi| section(phi, &mut p),
                    quarter * k as f64,
                    quarter * (k + 1) as f64,
                    1e-300,
                    SECTION_REL_TOL,
                    angles.max(64),
                );
                for i in 0..4 {
                    out[i] += v[i];
                }
            }
        }
        _ => {}
    }
    out
}

struct CapGeometry {
    h_plus: f64,
    h_minus: f64,
    p_plus: Vec<f64>,
    p_minus: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

impl CapGeometry {
    fn new<B: ConvexSet + ?Sized>(body: &B, u: &[f64]) -> Result<Self> {
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        Ok(Self {
            h_plus: body.support_value(u)?,
            h_minus: -body.support_value(&neg)?,
            p_plus: body.support_point(u)?,
            p_minus: body.support_point(&neg)?,
            basis: orthonormal_complement(u),
        })
    }

    fn spine(&self, t: f64) -> Vec<f64> {
        let width = self.h_plus - self.h_minus;
        let s = if width > 0.0 { ((t - self.h_minus) / width).clamp(0.0, 1.0) } else { 0.5 };
        self.p_minus.iter().zip(&self.p_plus).map(|(a, b)| a + s * (b - a)).collect()
    }
}

/// Integrates section moments over `t ∈ [a, h_+]`, substituting
/// `t = h ∓ τ^2` at tangential endpoints to absorb square-root behaviour.
fn cap_moments<B: ConvexSet + ?Sized>(
    body: &B,
    cut: &Halfspace,
    w: &WeightSpec,
    quad: &QuadratureSpec,
) -> Result<([f64; 4], f64)> {
    let dim = body.dim();
    if cut.dim() != dim || w.ambient_dim() != dim {
        return invalid("cap dimension mismatch");
    }
    if dim > 3 {
        return Err(Error::Unsupported(format!("slice quadrature in dimension {dim}")));
    }
    let g = CapGeometry::new(body, &cut.normal)?;
    if cut.offset >= g.h_plus {
        return Ok(([0.0; 4], 0.0));
    }
    let angles = quad.points_per_axis;
    let f = |t: f64| section_moments(body, &g.basis, &g.spine(t), w, angles);
    let a = cut.offset.max(g.h_minus);
    let b = g.h_plus;
    let run = |lo: f64, hi: f64, from_top: bool| {
        let len = hi - lo;
        integrate_adaptive_vec(
            |tau| {
                let t = if from_top { hi - len * tau * tau } else { lo + len * tau * tau };
                let v = f(t);
                let jac = 2.0 * len * tau;
                [v[0] * jac, v[1] * jac, v[2] * jac, v[3] * jac]
            },
            0.0,
            1.0,
            1e-300,
            quad.rel_tol,
            400,
        )
    };
    let mut knots = vec![a];
    let mut inner: Vec<f64> = body.slice_breakpoints(&cut.normal).into_iter().filter(|k| *k > a && *k < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (b - a));
    if inner.is_empty() && cut.offset <= g.h_minus {
        inner.push(0.5 * (a + b));
    }
    knots.extend(inner);
    knots.push(b);
    let mut v = [0.0; 4];
    let mut e = 0.0;
    for (i, w) in knots.windows(2).enumerate() {
        // square-root behaviour sits at the tangential ends
        let (vi, ei) = run(w[0], w[1], !(i == 0 && cut.offset <= g.h_minus));
        for k in 0..4 {
            v[k] += vi[k];
        }
        e += ei;
    }
    Ok((v, e))
}

/// Weighted cap mass by integrating section masses along the cut normal.
pub fn slice_cap_mass<B: ConvexSet + ?Sized>(body: &B, cut: &Halfspace, w: &WeightSpec, quad: &QuadratureSpec) -> Result<Estimate> {
    if body.dim() == 1 {
        let u = cut.normal[0];
        let h = body.support_value(&cut.normal)?;
        let lo = cut.offset.max(-body.support_value(&[-u])?);
        if lo >= h {
            return Ok(Estimate::exact(0.0));
        }
        let (v, e) = integrate_adaptive_vec(|t| [w.eval(&[t * u])], lo, h, 1e-300, quad.rel_tol, 400);
        return Ok(Estimate { value: v[0], error: e });
    }
    let (v, e) = cap_moments(body, cut, w, quad)?;
    Ok(Estimate { value: v[0], error: e })
}

/// `Φ(K ∩ H)`: weighted volume of the cap cut off by `cut`.
pub fn cap_weighted_volume<B: ConvexSet + ?Sized>(body: &B, cut: &Halfspace, w: &WeightSpec, quad: &QuadratureSpec) -> Result<Estimate> {
    body.cap_mass(cut, w, quad)
}

/// Φ-barycentre of the cap `K ∩ H`.
pub fn phi_barycenter<B: ConvexSet + ?Sized>(body: &B, cut: &Halfspace, w: &WeightSpec, quad: &QuadratureSpec) -> Result<Vec<f64>> {
    let dim = body.dim();
    if dim == 1 {
        let u = cut.normal[0];
        let h = body.support_value(&cut.normal)?;
        let lo = cut.offset.max(-body.support_value(&[-u])?);
        let (v, _) = integrate_adaptive_vec(|t| { let m = w.eval(&[t * u]); [m, m * t * u] }, lo, h, 1e-300, quad.rel_tol, 400);
        if !(v[0] > 0.0) {
            return Err(Error::InvalidInput("cap has zero mass".into()));
        }
        return Ok(vec![v[1] / v[0]]);
    }
    let (v, _) = cap_moments(body, cut, w, quad)?;
    if !(v[0] > 0.0) {
        return Err(Error::InvalidInput("cap has zero mass".into()));
    }
    Ok((0..dim).map(|k| v[k + 1] / v[0]).collect())
}

/// Φ-barycentre of the section `K ∩ { <y, u> = a }`.
pub fn section_barycenter<B: ConvexSet + ?Sized>(body: &B, cut: &Halfspace, w: &WeightSpec, quad: &QuadratureSpec) -> Result<Vec<f64>> {
    let dim = body.dim();
    if dim < 2 || dim > 3 {
        return Err(Error::Unsupported(format!("section barycentre in dimension {dim}")));
    }
    let g = CapGeometry::new(body, &cut.normal)?;
    if !(cut.offset > g.h_minus && cut.offset < g.h_plus) {
        return Err(Error::InvalidInput("hyperplane misses the interior".into()));
    }
    let v = section_moments(body, &g.basis, &g.spine(cut.offset), w, quad.points_per_axis);
    Ok((0..dim).map(|k| v[k + 1] / v[0]).collect())
}

/// Lower and upper bounds for the volume of the cap of height `h` of the
/// ellipsoid with semi-axes `a`, cut orthogonally to the last axis.
pub fn ellipsoid_cap_bounds(semi_axes: &[f64], h: f64) -> Result<(f64, f64)> {
    let n = semi_axes.len();
    if n == 0 || semi_axes.iter().any(|a| !(*a > 0.0)) {
        return invalid("semi-axes must be positive");
    }
    let an = semi_axes[n - 1];
    if h > an {
        return Err(Error::CapExceedsSemiAxis { height: h, semi_axis: an });
    }
    if h < 0.0 {
        return invalid("cap height must be nonnegative");
    }
    let nf = n as f64;
    let c = 2f64.powf((nf + 1.0) / 2.0) * unit_ball_volume(n - 1) * semi_axes[..n - 1].iter().product::<f64>()
        / ((nf + 1.0) * an.powf((nf - 1.0) / 2.0));
    let upper = c * h.powf((nf + 1.0) / 2.0);
    let lower = upper * (1.0 - h / (2.0 * an)).powf((nf - 1.0) / 2.0);
    Ok((lower, upper))
}
