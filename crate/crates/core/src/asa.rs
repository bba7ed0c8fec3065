//! Affine surface area functionals and the limit constants.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::function::{origin_gauge, ConvexFunctionSpec};
use crate::geometry::{sphere_area, unit_ball_volume, BodyKind, ConvexBodySpec, ConvexSet};
use crate::quadrature::{composite_rule, gauss_legendre, integrate_piecewise, Estimate, QuadratureSpec};
use crate::sconcave::SConcaveFunctionSpec;
use crate::weights::WeightSpec;

/// `c_n = ½ ((n + 1) / vol_{n-1}(B^{n-1}))^{2/(n+1)}`.
pub fn constant_c(n: usize) -> f64 {
    assert!(n >= 1, "c_n needs n >= 1");
    0.5 * ((n as f64 + 1.0) / unit_ball_volume(n - 1)).powf(2.0 / (n as f64 + 1.0))
}

/// `c_{n,s} = (s/2) ((n + s + 1) / ((n + s) vol_{n+s}(B^{n+s})))^{2/(n+s+1)}`.
pub fn constant_c_s(n: usize, s: usize) -> f64 {
    let m = (n + s) as f64;
    0.5 * s as f64 * ((m + 1.0) / (m * unit_ball_volume(n + s))).powf(2.0 / (m + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantKind {
    /// `c_n` for convex bodies in `R^n`.
    Body,
    /// `c_{n+1}` for functions on `R^n`.
    Function,
    /// `c_{n,s}`.
    SConcave,
}

pub fn constant(kind: ConstantKind, n: usize, s: usize) -> f64 {
    match kind {
        ConstantKind::Body => constant_c(n),
        ConstantKind::Function => constant_c(n + 1),
        ConstantKind::SConcave => constant_c_s(n, s),
    }
}

/// `λ_{n,s} = 1 / (n + s + 1)`.
pub fn lambda_ns(n: usize, s: usize) -> f64 {
    1.0 / (n + s + 1) as f64
}

/// `as_{λ_{n,s}}(f) / as^s_1(f) = s^{(2n+s+1)/(n+s+1)} / (n + s)`.
pub fn sconcave_ratio(n: usize, s: usize) -> f64 {
    let (n, s) = (n as f64, s as f64);
    s.powf((2.0 * n + s + 1.0) / (n + s + 1.0)) / (n + s)
}

/// `as_{λ_{n,s}}(f) / as(K_f^s) = s^{n/2+1} / ((n + s) vol_{s-1}(S^{s-1}))`.
pub fn lift_ratio(n: usize, s: usize) -> f64 {
    (s as f64).powf(n as f64 / 2.0 + 1.0) / ((n + s) as f64 * sphere_area(s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    BodyP,
    Weighted,
    Exponential,
    Lambda,
    SConcave,
    LambdaSConcave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ASAResult {
    pub functional: Functional,
    pub value: f64,
    pub error: f64,
    pub p: Option<f64>,
    pub lambda: Option<f64>,
    pub s: Option<usize>,
    pub weight: Option<String>,
}

impl ASAResult {
    fn new(functional: Functional, e: Estimate) -> Self {
        Self { functional, value: e.value.max(0.0), error: e.error.abs(), p: None, lambda: None, s: None, weight: None }
    }
}

/// `as_p(K) = ∫_{∂K} κ^{p/(n+p)} <z, N>^{-n(p-1)/(n+p)} dμ` for a smooth body
/// with the origin inside.
///
/// In radial coordinates `z = θ / ‖θ‖_K` this is
/// `∫_{S^{n-1}} det ∇²(½‖·‖_K²)(θ)^{p/(n+p)} ‖θ‖_K^{-n} dσ(θ)`, since
/// `κ = det ∇²(½‖·‖_K²) <z, N>^{n+1}` and `dμ = ‖θ‖_K^{-n} <z, N>^{-1} dσ`.
pub fn asa_body_p(body: &ConvexBodySpec, p: f64, quad: &QuadratureSpec) -> Result<ASAResult> {
    let n = body.dim();
    if (p + n as f64).abs() < 1e-12 {
        return invalid("p = -n is excluded");
    }
    if body.is_polytope() {
        return Err(Error::Unsupported("boundary curvature of polytopes is singular".into()));
    }
    let psi = ConvexFunctionSpec::gauge_square(body.clone())?;
    let q = p / (n as f64 + p);
    let density = |theta: &[f64]| -> f64 {
        let Ok(g) = origin_gauge(body, theta) else { return f64::NAN };
        let d = psi.hessian(theta).determinant().max(0.0);
        d.powf(q) / g.powi(n as i32)
    };
    let e = match n {
        1 => Estimate::exact(density(&[1.0]) + density(&[-1.0])),
        2 => {
            let pi = std::f64::consts::PI;
            let breaks = [0.0, 0.5 * pi, pi, 1.5 * pi, 2.0 * pi];
            let closed_form = matches!(body.kind(), BodyKind::Ball { .. } | BodyKind::Ellipsoid { .. });
            let polar = |t: f64| -> f64 {
                // G(θ) = ½‖θ‖², det ∇²(½‖·‖²) = 4G² + 2GG'' - G'² on the unit circle;
                // stencils stay on one side of the nearest breakpoint
                let gq = |a: f64| origin_gauge(body, &[a.cos(), a.sin()]).map_or(f64::NAN, |g| 0.5 * g * g);
                let h = 2e-4;
                let b = breaks.iter().copied().min_by(|x, y| (t - x).abs().total_cmp(&(t - y).abs())).unwrap();
                let (g0, d1, d2) = if (t - b).abs() > 2.5 * h {
                    let (gm2, gm, g0, gp, gp2) = (gq(t - 2.0 * h), gq(t - h), gq(t), gq(t + h), gq(t + 2.0 * h));
                    ((g0), (gm2 - 8.0 * gm + 8.0 * gp - gp2) / (12.0 * h), (-gm2 + 16.0 * gm - 30.0 * g0 + 16.0 * gp - gp2) / (12.0 * h * h))
                } else {
                    let sg = if t >= b { h } else { -h };
                    let g: Vec<f64> = (0..5).map(|k| gq(t + sg * k as f64)).collect();
                    let d1 = (-25.0 * g[0] + 48.0 * g[1] - 36.0 * g[2] + 16.0 * g[3] - 3.0 * g[4]) / (12.0 * sg);
                    let d2 = (35.0 * g[0] - 104.0 * g[1] + 114.0 * g[2] - 56.0 * g[3] + 11.0 * g[4]) / (12.0 * h * h);
                    (g[0], d1, d2)
                };
                let d = (4.0 * g0 * g0 + 2.0 * g0 * d2 - d1 * d1).max(0.0);
                d.powf(q) / (2.0 * g0)
            };
            if closed_form {
                integrate_piecewise(|t| density(&[t.cos(), t.sin()]), &breaks, 1e-300, quad.rel_tol.max(1e-10))
            } else {
                integrate_piecewise(polar, &breaks, 1e-300, quad.rel_tol.max(1e-10))
            }
        }
        3 => {
            let sphere = |k: usize| -> f64 {
                let mu = gauss_legendre(k);
                let m = 2 * k;
                let mut total = 0.0;
                for &(z, wz) in mu.iter() {
                    let r = (1.0 - z * z).sqrt();
                    for j in 0..m {
                        let ph = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / m as f64;
                        total += wz * density(&[r * ph.cos(), r * ph.sin(), z]);
                    }
                }
                total * 2.0 * std::f64::consts::PI / m as f64
            };
            let k = quad.points_per_axis.max(32);
            let fine = sphere(k);
            let coarse = sphere(k / 2);
            Estimate { value: fine, error: (fine - coarse).abs() }
        }
        d => return Err(Error::Unsupported(format!("boundary quadrature in dimension {d}"))),
    };
    if !e.value.is_finite() {
        return Err(Error::InvalidInput("the origin must be interior to the body".into()));
    }
    let mut r = ASAResult::new(Functional::BodyP, e);
    r.p = Some(p);
    Ok(r)
}

/// `∫ g(x) dx` over the box `{ψ <= ψ_min + level}` by tensor Gauss-Legendre
/// with doubling for an error estimate; adaptive in one dimension.
fn box_integral(psi: &ConvexFunctionSpec, level: f64, quad: &QuadratureSpec, g: impl Fn(&[f64]) -> f64 + Sync) -> Result<Estimate> {
    let n = psi.dim();
    let bbox = psi.truncation_box(level)?;
    if n == 1 {
        let mut breaks = vec![bbox.lo[0], psi.minimum().0[0], bbox.hi[0]];
        if let crate::function::FunctionKind::PiecewiseAffine { .. } = psi.kind() {
            breaks = vec![bbox.lo[0], bbox.hi[0]];
        }
        return Ok(integrate_piecewise(|x| g(&[x]), &breaks, 1e-300, quad.rel_tol.max(1e-12)));
    }
    let tensor = |per_axis: usize| -> f64 {
        use rayon::prelude::*;
        let panels = per_axis.div_ceil(8).max(1);
        let rules: Vec<Vec<(f64, f64)>> = (0..n).map(|i| composite_rule(bbox.lo[i], bbox.hi[i], 8, panels)).collect();
        let m = rules[0].len();
        (0..m.pow(n as u32))
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
                w * g(&x)
            })
            .sum()
    };
    let per_axis = quad.points_per_axis.max(if n == 2 { 96 } else { 48 });
    let fine = tensor(2 * per_axis);
    let coarse = tensor(per_axis);
    Ok(Estimate { value: fine, error: (fine - coarse).abs() })
}

const LEVEL: f64 = 40.0;

fn det_clamped(psi: &ConvexFunctionSpec, x: &[f64]) -> f64 {
    psi.hessian(x).determinant().max(0.0)
}

/// `as_Φ(ψ) = ∫ (det ∇²ψ)^{1/(n+2)} Φ(x, ψ(x))^{-2/(n+2)} e^{-ψ} dx`.
pub fn asa_weighted(psi: &ConvexFunctionSpec, w: &WeightSpec, quad: &QuadratureSpec) -> Result<ASAResult> {
    let n = psi.dim();
    if w.ambient_dim() != n + 1 {
        return Err(Error::InvalidWeight(format!("weight on R^{} for a function on R^{n}", w.ambient_dim())));
    }
    let a = 1.0 / (n as f64 + 2.0);
    let e = box_integral(psi, LEVEL, quad, |x| {
        let v = psi.value(x);
        let mut z = x.to_vec();
        z.push(v);
        det_clamped(psi, x).powf(a) * w.eval(&z).powf(-2.0 * a) * (-v).exp()
    })?;
    let mut r = ASAResult::new(Functional::Weighted, e);
    r.weight = Some(w.id());
    Ok(r)
}

/// `as_{Φ_e}(ψ) = ∫ (det ∇²ψ)^{1/(n+2)} e^{-n ψ/(n+2)} dx`.
pub fn asa_exponential(psi: &ConvexFunctionSpec, quad: &QuadratureSpec) -> Result<ASAResult> {
    let n = psi.dim() as f64;
    let a = 1.0 / (n + 2.0);
    let e = box_integral(psi, LEVEL * (n + 2.0) / n, quad, |x| det_clamped(psi, x).powf(a) * (-n * a * psi.value(x)).exp())?;
    let mut r = ASAResult::new(Functional::Exponential, e);
    r.weight = Some("exponential_height".into());
    Ok(r)
}

/// `as_λ(ψ) = ∫ e^{(2λ-1)ψ - λ<x, ∇ψ>} (det ∇²ψ)^λ dx`.
pub fn asa_lambda(psi: &ConvexFunctionSpec, lambda: f64, quad: &QuadratureSpec) -> Result<ASAResult> {
    let level = LEVEL * (1.0 + 2.0 * lambda.abs());
    let e = box_integral(psi, level, quad, |x| {
        let g = psi.subgradient(x);
        let xg: f64 = x.iter().zip(&g).map(|(a, b)| a * b).sum();
        let d = det_clamped(psi, x);
        let dl = if lambda == 0.0 { 1.0 } else { d.powf(lambda) };
        ((2.0 * lambda - 1.0) * psi.value(x) - lambda * xg).exp() * dl
    })?;
    let mut r = ASAResult::new(Functional::Lambda, e);
    r.lambda = Some(lambda);
    Ok(r)
}

/// `∫_{supp f} h(x) dx` for an s-concave `f`.
fn support_integral(f: &SConcaveFunctionSpec, quad: &QuadratureSpec, h: impl Fn(&[f64]) -> f64 + Sync) -> Result<Estimate> {
    let n = f.dim();
    let rel = quad.rel_tol.max(1e-11);
    if n == 1 {
        let (lo, hi) = f.support_interval()?;
        let mut breaks = vec![lo, hi];
        if matches!(f.kind(), crate::sconcave::SConcaveKind::Cone) {
            breaks.insert(1, 0.0);
        }
        return Ok(integrate_piecewise(|x| h(&[x]), &breaks, 1e-300, rel));
    }
    if f.is_radial() {
        let mut e = vec![0.0; n];
        let est = integrate_piecewise(
            |r| {
                e[0] = r;
                h(&e) * r.powi(n as i32 - 1)
            },
            &[0.0, 1.0],
            1e-300,
            rel,
        );
        let c = sphere_area(n);
        return Ok(Estimate { value: c * est.value, error: c * est.error });
    }
    if n == 2 {
        let support = f.support();
        let c = support.interior_point();
        let ring = |m: usize| -> f64 {
            let rule = gauss_legendre(32);
            let mut total = 0.0;
            for k in 0..m {
                let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / m as f64;
                let d = [t.cos(), t.sin()];
                let (_, r_max) = support.chord(&c, &d);
                for &(u, w) in rule.iter() {
                    let r = 0.5 * r_max * (u + 1.0);
                    total += w * 0.5 * r_max * r * h(&[c[0] + r * d[0], c[1] + r * d[1]]);
                }
            }
            total * 2.0 * std::f64::consts::PI / m as f64
        };
        let m = quad.points_per_axis.max(64) * 4;
        let fine = ring(m);
        let coarse = ring(m / 2);
        return Ok(Estimate { value: fine, error: (fine - coarse).abs() });
    }
    Err(Error::Unsupported(format!("support quadrature in dimension {n}")))
}

/// `as^s_Φ(f) = ∫ |det ∇² f^{1/s}|^{1/(n+s+1)} f^{(s-1)(n+s)/(s(n+s+1))}
/// φ(x, f^{1/s}(x))^{-2/(n+s+1)} dx`.
pub fn asa_sconcave(f: &SConcaveFunctionSpec, w: &WeightSpec, quad: &QuadratureSpec) -> Result<ASAResult> {
    let (n, s) = (f.dim(), f.order());
    if w.ambient_dim() != n + s || !w.is_rotational(s) {
        return Err(Error::IncompatibleWeight("as^s needs a rotational weight on R^{n+s}".into()));
    }
    let m = (n + s + 1) as f64;
    let e = support_integral(f, quad, |x| {
        let g = f.root(x);
        if g <= 0.0 {
            return 0.0;
        }
        let d = f.root_hessian(x).determinant().abs();
        let mut xr = x.to_vec();
        xr.push(g);
        let phi = w.profile(s, &xr).unwrap_or(f64::NAN);
        d.powf(1.0 / m) * g.powf((s as f64 - 1.0) * (n + s) as f64 / m) * phi.powf(-2.0 / m)
    })?;
    let mut r = ASAResult::new(Functional::SConcave, e);
    r.s = Some(s);
    r.weight = Some(w.id());
    Ok(r)
}

/// `as_λ(f) = (1 + ns)^{-1} ∫ (1 - ψ_f/s)^{(s-1)(1-λ)} (det ∇²ψ_f)^λ
/// (1 + (<x, ∇ψ_f> - ψ_f)/s)^{1 - λ(n+s+1)} dx` with `ψ_f = s(1 - f^{1/s})`.
pub fn asa_lambda_sconcave(f: &SConcaveFunctionSpec, lambda: f64, quad: &QuadratureSpec) -> Result<ASAResult> {
    let (n, s) = (f.dim(), f.order());
    let sf = s as f64;
    let e = support_integral(f, quad, |x| {
        let g = f.root(x);
        if g <= 0.0 {
            return 0.0;
        }
        let psi = sf * (1.0 - g);
        let grad: Vec<f64> = f.root_gradient(x).iter().map(|t| -sf * t).collect();
        let xg: f64 = x.iter().zip(&grad).map(|(a, b)| a * b).sum();
        let det = (f.root_hessian(x) * -sf).determinant().max(0.0);
        let dl = if lambda == 0.0 { 1.0 } else { det.powf(lambda) };
        let base = 1.0 + (xg - psi) / sf;
        (1.0 - psi / sf).powf((sf - 1.0) * (1.0 - lambda)) * dl * base.powf(1.0 - lambda * (n + s + 1) as f64)
    })?;
    let scale = 1.0 / (1.0 + (n * s) as f64);
    let mut r = ASAResult::new(Functional::LambdaSConcave, Estimate { value: scale * e.value, error: scale * e.error });
    r.lambda = Some(lambda);
    r.s = Some(s);
    Ok(r)
}

/// Both sides of `as_{Φ_e}(½‖·‖_K²) = (1 + 2/n)^{n/2} (2π)^{n/2} / (n vol(B^n)) · as_{n/(n+1)}(K)`.
pub fn gauge_identity_check(body: &ConvexBodySpec, quad: &QuadratureSpec) -> Result<(ASAResult, ASAResult)> {
    let n = body.dim() as f64;
    let psi = ConvexFunctionSpec::gauge_square(body.clone())?;
    let lhs = asa_exponential(&psi, quad)?;
    let mut rhs = asa_body_p(body, n / (n + 1.0), quad)?;
    let c = (1.0 + 2.0 / n).powf(n / 2.0) * (2.0 * std::f64::consts::PI).powf(n / 2.0) / (n * unit_ball_volume(body.dim()));
    rhs.value *= c;
    rhs.error *= c;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use statrs::function::beta::beta;

    #[test]
    fn constants() {
        // direct evaluation of the closed forms
        assert_relative_eq!(constant_c(2), 0.5 * 1.5f64.powf(2.0 / 3.0), max_relative = 1e-14);
        assert_relative_eq!(constant_c(2), 0.655_185, epsilon = 1e-6);
        assert_relative_eq!(constant_c(3), 0.5 * (4.0 / std::f64::consts::PI).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(constant_c_s(1, 1), 0.5 * (3.0 / (2.0 * std::f64::consts::PI)).powf(2.0 / 3.0), max_relative = 1e-14);
        assert_relative_eq!(constant_c_s(1, 1), 0.30544, epsilon = 1e-5);
        assert_eq!(constant(ConstantKind::Function, 1, 0), constant_c(2));
        assert_relative_eq!(lift_ratio(1, 1), 0.25);
        assert_relative_eq!(sconcave_ratio(1, 1), 0.5);
    }

    #[test]
    fn body_p_of_balls() {
        let q = QuadratureSpec::default();
        for p in [0.5, 1.0, 3.0] {
            let r = asa_body_p(&ConvexBodySpec::unit_ball(2).unwrap(), p, &q).unwrap();
            assert_relative_eq!(r.value, 2.0 * std::f64::consts::PI, max_relative = 1e-10);
        }
        let r = asa_body_p(&ConvexBodySpec::unit_ball(3).unwrap(), 1.0, &q).unwrap();
        assert_relative_eq!(r.value, 4.0 * std::f64::consts::PI, max_relative = 1e-10);
        assert!(asa_body_p(&ConvexBodySpec::unit_ball(2).unwrap(), -2.0, &q).is_err());
        assert!(asa_body_p(&ConvexBodySpec::cube(2, 1.0).unwrap(), 1.0, &q).is_err());
    }

    #[test]
    fn body_p_of_ellipse_is_affine_invariant() {
        // as(E) = as(B) · det(A)^{(n-p)/(n+p)}; for p = 1, n = 2: 2π (ab)^{1/3}
        let q = QuadratureSpec::default();
        let e = ConvexBodySpec::ellipsoid(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        let r = asa_body_p(&e, 1.0, &q).unwrap();
        assert_relative_eq!(r.value, 2.0 * std::f64::consts::PI * 2f64.powf(1.0 / 3.0), max_relative = 1e-9);
    }

    #[test]
    fn lifted_parabola_lens() {
        // two parabola arcs: ∫ κ^{1/3} ds = 2^{1/3} · 2 per arc
        let f = SConcaveFunctionSpec::paraboloid(1, 1).unwrap();
        let body = f.lift().to_body().unwrap();
        let r = asa_body_p(&body, 1.0, &QuadratureSpec::default()).unwrap();
        assert_relative_eq!(r.value, 4.0 * 2f64.powf(1.0 / 3.0), max_relative = 1e-5);
    }

    #[test]
    fn gaussian_functionals() {
        let q = QuadratureSpec::default();
        let p1 = ConvexFunctionSpec::half_norm_squared(1).unwrap();
        let p2 = ConvexFunctionSpec::half_norm_squared(2).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        let one1 = WeightSpec::constant(2, 1.0).unwrap();
        assert_relative_eq!(asa_weighted(&p1, &one1, &q).unwrap().value, tau.sqrt(), max_relative = 1e-10);
        let one2 = WeightSpec::constant(3, 1.0).unwrap();
        assert_relative_eq!(asa_weighted(&p2, &one2, &q).unwrap().value, tau, max_relative = 1e-9);
        assert_relative_eq!(asa_exponential(&p1, &q).unwrap().value, (6.0 * std::f64::consts::PI).sqrt(), max_relative = 1e-10);
        assert_relative_eq!(asa_exponential(&p2, &q).unwrap().value, 2.0 * tau, max_relative = 1e-9);
        for lambda in [0.0, 0.25, 0.5, 1.0] {
            assert_relative_eq!(asa_lambda(&p1, lambda, &q).unwrap().value, tau.sqrt(), max_relative = 1e-9);
            assert_relative_eq!(asa_lambda(&p2, lambda, &q).unwrap().value, tau, max_relative = 1e-8);
        }
    }

    #[test]
    fn weight_scaling() {
        let q = QuadratureSpec::default();
        let p = ConvexFunctionSpec::half_norm_squared(1).unwrap();
        let a = asa_weighted(&p, &WeightSpec::constant(2, 1.0).unwrap(), &q).unwrap().value;
        let b = asa_weighted(&p, &WeightSpec::constant(2, 4.0).unwrap(), &q).unwrap().value;
        assert_relative_eq!(b, 4f64.powf(-2.0 / 3.0) * a, max_relative = 1e-12);
        let f = SConcaveFunctionSpec::paraboloid(1, 1).unwrap();
        let a = asa_sconcave(&f, &WeightSpec::rotational_constant(2, 1, 1.0).unwrap(), &q).unwrap().value;
        let b = asa_sconcave(&f, &WeightSpec::rotational_constant(2, 1, 3.0).unwrap(), &q).unwrap().value;
        assert_relative_eq!(b, 3f64.powf(-2.0 / 3.0) * a, max_relative = 1e-12);
    }

    #[test]
    fn piecewise_affine_has_no_curvature() {
        use crate::function::AffinePiece;
        let psi = ConvexFunctionSpec::piecewise_affine(vec![
            AffinePiece { slope: vec![1.0], offset: 0.0 },
            AffinePiece { slope: vec![-1.0], offset: 0.0 },
        ])
        .unwrap();
        assert_eq!(asa_exponential(&psi, &QuadratureSpec::default()).unwrap().value, 0.0);
    }

    #[test]
    fn exponential_affine_invariance() {
        let q = QuadratureSpec::default();
        let a = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 0.5]);
        let base = ConvexFunctionSpec::half_norm_squared(2).unwrap();
        let moved = base.compose_linear(&a).unwrap();
        let det: f64 = 0.75;
        let lhs = asa_exponential(&moved, &q).unwrap().value;
        let rhs = det.powf(-0.5) * asa_exponential(&base, &q).unwrap().value;
        assert_relative_eq!(lhs, rhs, max_relative = 1e-2);
    }

    #[test]
    fn sconcave_functionals() {
        let q = QuadratureSpec::default();
        let f = SConcaveFunctionSpec::paraboloid(1, 1).unwrap();
        let w = WeightSpec::rotational_constant(2, 1, 1.0).unwrap();
        let c = 2f64.powf(1.0 / 3.0);
        assert_relative_eq!(asa_sconcave(&f, &w, &q).unwrap().value, 2.0 * c, max_relative = 1e-12);
        assert_relative_eq!(asa_lambda_sconcave(&f, lambda_ns(1, 1), &q).unwrap().value, c, max_relative = 1e-12);
        // f = (1 - x²)², s = 2: 2^{1/4} ∫ (1 - x²)^{3/4} = 2^{1/4} B(1/2, 7/4)
        let g = SConcaveFunctionSpec::paraboloid(1, 2).unwrap();
        let w2 = WeightSpec::rotational_constant(3, 2, 1.0).unwrap();
        let expect = 2f64.powf(0.25) * beta(0.5, 1.75);
        assert_relative_eq!(asa_sconcave(&g, &w2, &q).unwrap().value, expect, max_relative = 1e-9);
    }

    #[test]
    fn gauge_identity_for_disk() {
        let q = QuadratureSpec::default();
        let (l, r) = gauge_identity_check(&ConvexBodySpec::unit_ball(2).unwrap(), &q).unwrap();
        assert_relative_eq!(l.value, 4.0 * std::f64::consts::PI, max_relative = 1e-8);
        assert_relative_eq!(r.value, 4.0 * std::f64::consts::PI, max_relative = 1e-8);
    }
}
