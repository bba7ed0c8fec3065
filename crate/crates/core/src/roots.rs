//! Bracketed root finding and one-dimensional minimisation.

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    pub x_tol: f64,
    pub f_tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self { x_tol: 1e-14, f_tol: 0.0, max_iter: 200 }
    }
}

/// Bisection on a sign change of `f` in `[lo, hi]`.
pub fn bisect(mut f: impl FnMut(f64) -> Result<f64>, lo: f64, hi: f64, opts: RootOptions) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return invalid(format!("no sign change on [{lo}, {hi}]"));
    }
    let neg_at_a = fa < 0.0;
    for _ in 0..opts.max_iter {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= opts.x_tol * (1.0 + m.abs()) || m == a || m == b {
            return Ok(m);
        }
        let fm = f(m)?;
        if fm.abs() <= opts.f_tol {
            return Ok(m);
        }
        if (fm < 0.0) == neg_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Newton iteration safeguarded by a bracket. `f` returns the value and the
/// derivative; steps leaving the bracket fall back to bisection.
pub fn newton_bracketed(
    mut f: impl FnMut(f64) -> Result<(f64, f64)>,
    lo: f64,
    hi: f64,
    x0: f64,
    opts: RootOptions,
) -> Result<f64> {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (fa, _) = f(a)?;
    let (fb, _) = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return invalid(format!("no sign change on [{a}, {b}]"));
    }
    let neg_at_a = fa < 0.0;
    let mut x = if x0 > a && x0 < b { x0 } else { 0.5 * (a + b) };
    for _ in 0..opts.max_iter {
        let (fx, dfx) = f(x)?;
        if fx == 0.0 || fx.abs() <= opts.f_tol {
            return Ok(x);
        }
        if (fx < 0.0) == neg_at_a {
            a = x;
        } else {
            b = x;
        }
        if (b - a) <= opts.x_tol * (1.0 + x.abs()) {
            return Ok(0.5 * (a + b));
        }
        let step = fx / dfx;
        let xn = x - step;
        x = if dfx != 0.0 && xn.is_finite() && xn > a && xn < b {
            if step.abs() <= opts.x_tol * (1.0 + x.abs()) {
                return Ok(xn);
            }
            xn
        } else {
            0.5 * (a + b)
        };
    }
    Err(Error::NoConvergence { iterations: opts.max_iter })
}

/// Grows `[x0, x0 + step]` geometrically until `f` changes sign, up to `limit`.
pub fn expand_bracket(
    mut f: impl FnMut(f64) -> Result<f64>,
    x0: f64,
    step: f64,
    limit: f64,
) -> Result<Option<(f64, f64)>> {
    let f0 = f(x0)?;
    if f0 == 0.0 {
        return Ok(Some((x0, x0)));
    }
    let mut prev = x0;
    let mut h = step;
    loop {
        let x = x0 + h;
        let over = (h.abs() >= limit.abs()) as u8;
        let x = if over == 1 { x0 + limit } else { x };
        let fx = f(x)?;
        if fx.signum() != f0.signum() {
            return Ok(Some((prev, x)));
        }
        if over == 1 {
            return Ok(None);
        }
        prev = x;
        h *= 2.0;
    }
}

/// Illinois variant of regula falsi on a bracket with known end values.
pub fn illinois(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    x_tol: f64,
    max_iter: usize,
) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return invalid(format!("no sign change on [{a}, {b}]"));
    }
    let mut side = 0i8;
    for _ in 0..max_iter {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c.is_finite() && c > a.min(b) && c < a.max(b) { c } else { 0.5 * (a + b) };
        let fc = f(c)?;
        if fc == 0.0 || (b - a).abs() <= x_tol * (1.0 + c.abs()) {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= x_tol * (1.0 + c.abs()) {
            return Ok(c);
        }
    }
    Ok((a * fb - b * fa) / (fb - fa))
}

const CGOLD: f64 = 0.381_966_011_250_105_1;

/// Brent minimisation on `[a, b]` to absolute tolerance `tol`.
pub fn brent_min(mut f: impl FnMut(f64) -> Result<f64>, a: f64, b: f64, tol: f64, max_iter: usize) -> Result<(f64, f64)> {
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = tol + 1e-15 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            if !(p.abs() >= (0.5 * q * etemp).abs() || p <= q * (a - x) || p >= q * (b - x)) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok((x, fx))
}

/// Minimises `f` on `[a, b]`: a uniform scan with `samples` points locates
/// the basin, Brent's method refines it.
pub fn scan_min(mut f: impl FnMut(f64) -> Result<f64>, a: f64, b: f64, samples: usize, tol: f64) -> Result<(f64, f64)> {
    let n = samples.max(3);
    let h = (b - a) / (n - 1) as f64;
    let mut best = (a, f64::INFINITY, 0usize);
    for i in 0..n {
        let x = a + h * i as f64;
        let fx = f(x)?;
        if fx < best.1 {
            best = (x, fx, i);
        }
    }
    let lo = a + h * best.2.saturating_sub(1) as f64;
    let hi = (a + h * (best.2 + 1) as f64).min(b);
    let (x, fx) = brent_min(&mut f, lo, hi, tol, 200)?;
    Ok(if fx <= best.1 { (x, fx) } else { (best.0, best.1) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| Ok(x * x - 2.0), 0.0, 2.0, RootOptions::default()).unwrap();
        assert_relative_eq!(r, 2f64.sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn newton_matches_bisection() {
        let r = newton_bracketed(|x| Ok((x.cos() - x, -x.sin() - 1.0)), 0.0, 1.0, 0.5, RootOptions::default()).unwrap();
        assert_relative_eq!(r, 0.739_085_133_215_160_7, epsilon = 1e-13);
    }

    #[test]
    fn bisect_requires_sign_change() {
        assert!(bisect(|x| Ok(x * x + 1.0), -1.0, 1.0, RootOptions::default()).is_err());
    }

    #[test]
    fn brent_minimises_smooth_function() {
        let (x, _) = brent_min(|x| Ok((x - 0.3).powi(2) + 1.0), -2.0, 2.0, 1e-10, 200).unwrap();
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn scan_min_handles_kink() {
        let (x, fx) = scan_min(|x| Ok((x - 0.25).abs()), -1.0, 1.0, 21, 1e-12).unwrap();
        assert!((x - 0.25).abs() < 1e-9 && fx < 1e-9);
    }

    #[test]
    fn illinois_converges() {
        let f = |x: f64| Ok(x.exp() - 3.0);
        let r = illinois(f, 0.0, 2.0, -2.0, 2f64.exp() - 3.0, 1e-15, 100).unwrap();
        assert_relative_eq!(r, 3f64.ln(), epsilon = 1e-13);
    }

    #[test]
    fn bracket_expansion() {
        let b = expand_bracket(|x| Ok(x - 10.0), 0.0, 0.5, 100.0).unwrap().unwrap();
        assert!(b.0 <= 10.0 && b.1 >= 10.0);
        assert!(expand_bracket(|x| Ok(x - 1000.0), 0.0, 0.5, 100.0).unwrap().is_none());
    }
}
