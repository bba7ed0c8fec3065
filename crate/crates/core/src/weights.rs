//! Positive continuous weights `Φ` on the ambient space.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::integrate_gl;

pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum WeightKind {
    /// `Φ ≡ η`.
    Constant(f64),
    /// `Φ(x, y) = e^{-y}` on `R^n × R`.
    ExponentialHeight,
    /// `Φ(x, y) = φ(x, |y|)` on `R^n × R^s`; `profile` receives `(x, r)`.
    Rotational { profile: PointFn, s: usize },
    Custom { oracle: PointFn },
}

#[derive(Clone)]
pub struct WeightSpec {
    ambient_dim: usize,
    kind: WeightKind,
    lower_bound: Option<f64>,
    continuous: bool,
}

impl fmt::Debug for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WeightSpec({}, dim {})", self.id(), self.ambient_dim)
    }
}

impl WeightSpec {
    pub fn constant(ambient_dim: usize, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidWeight(format!("constant weight must be positive, got {eta}")));
        }
        Ok(Self { ambient_dim, kind: WeightKind::Constant(eta), lower_bound: Some(eta), continuous: true })
    }

    /// `e^{-y}` where `y` is the last coordinate of `R^{ambient_dim}`.
    pub fn exponential_height(ambient_dim: usize) -> Result<Self> {
        if ambient_dim < 2 {
            return Err(Error::InvalidWeight("exponential height weight needs ambient dimension >= 2".into()));
        }
        Ok(Self { ambient_dim, kind: WeightKind::ExponentialHeight, lower_bound: None, continuous: true })
    }

    /// Weight depending on `x ∈ R^{ambient_dim - s}` and `|y|`, `y ∈ R^s`.
    pub fn rotational(ambient_dim: usize, s: usize, profile: PointFn, lower_bound: Option<f64>) -> Result<Self> {
        if s == 0 || s >= ambient_dim {
            return Err(Error::InvalidWeight(format!("rotational weight needs 0 < s < {ambient_dim}")));
        }
        Ok(Self { ambient_dim, kind: WeightKind::Rotational { profile, s }, lower_bound, continuous: true })
    }

    /// `φ ≡ η` on `R^{ambient_dim - s} × R^s`; stored as a constant weight.
    pub fn rotational_constant(ambient_dim: usize, s: usize, eta: f64) -> Result<Self> {
        if s == 0 || s >= ambient_dim {
            return Err(Error::InvalidWeight(format!("rotational weight needs 0 < s < {ambient_dim}")));
        }
        Self::constant(ambient_dim, eta)
    }

    /// `φ(x, r)` for weights invariant under rotations of the last `s`
    /// coordinates; `None` for other weights.
    pub fn profile(&self, s: usize, xr: &[f64]) -> Option<f64> {
        match &self.kind {
            WeightKind::Constant(eta) => Some(*eta),
            WeightKind::Rotational { profile, s: t } if *t == s => Some(profile(xr)),
            _ => None,
        }
    }

    /// Whether the weight only depends on `x` and `|y|`, `y ∈ R^s`.
    pub fn is_rotational(&self, s: usize) -> bool {
        match &self.kind {
            WeightKind::Constant(_) => true,
            WeightKind::Rotational { s: t, .. } => *t == s,
            _ => false,
        }
    }

    pub fn custom(ambient_dim: usize, oracle: PointFn, lower_bound: Option<f64>, continuous: bool) -> Result<Self> {
        if let Some(eta) = lower_bound {
            if !(eta > 0.0) {
                return Err(Error::InvalidWeight(format!("lower bound must be positive, got {eta}")));
            }
        }
        Ok(Self { ambient_dim, kind: WeightKind::Custom { oracle }, lower_bound, continuous })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn is_continuous(&self) -> bool {
        self.continuous
    }

    /// Positive `η` with `Φ >= η`, when known.
    pub fn lower_bound(&self) -> Option<f64> {
        self.lower_bound
    }

    pub fn constant_value(&self) -> Option<f64> {
        match &self.kind {
            WeightKind::Constant(eta) => Some(*eta),
            _ => None,
        }
    }

    pub fn is_exponential_height(&self) -> bool {
        matches!(self.kind, WeightKind::ExponentialHeight)
    }

    /// Stable identifier used in reports.
    pub fn id(&self) -> String {
        match &self.kind {
            WeightKind::Constant(eta) => format!("constant({eta})"),
            WeightKind::ExponentialHeight => "exponential_height".into(),
            WeightKind::Rotational { s, .. } => format!("rotational(s={s})"),
            WeightKind::Custom { .. } => "custom".into(),
        }
    }

    /// Unchecked evaluation for inner loops.
    #[inline]
    pub fn eval(&self, z: &[f64]) -> f64 {
        match &self.kind {
            WeightKind::Constant(eta) => *eta,
            WeightKind::ExponentialHeight => (-z[z.len() - 1]).exp(),
            WeightKind::Rotational { profile, s } => {
                let n = z.len() - s;
                let r = z[n..].iter().map(|t| t * t).sum::<f64>().sqrt();
                let mut xr = Vec::with_capacity(n + 1);
                xr.extend_from_slice(&z[..n]);
                xr.push(r);
                profile(&xr)
            }
            WeightKind::Custom { oracle } => oracle(z),
        }
    }

    /// Evaluation that rejects non-positive or non-finite values.
    pub fn eval_checked(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.ambient_dim {
            return Err(Error::InvalidInput(format!(
                "point of dimension {} for weight on R^{}",
                z.len(),
                self.ambient_dim
            )));
        }
        let v = self.eval(z);
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidWeight(format!("weight value {v} at {z:?}")))
        }
    }

    /// `∫_lo^hi Φ(x, y) dy` along the last coordinate, for `hi >= lo`.
    pub fn vertical_integral(&self, x: &[f64], lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        match &self.kind {
            WeightKind::Constant(eta) => eta * (hi - lo),
            WeightKind::ExponentialHeight => exp_height_segment_mass(lo, hi),
            _ => {
                let mut z = x.to_vec();
                z.push(0.0);
                let last = z.len() - 1;
                integrate_gl(
                    |y| {
                        z[last] = y;
                        self.eval(&z)
                    },
                    lo,
                    hi,
                    16,
                )
            }
        }
    }
}

/// `∫_a^b e^{-y} dy`, stable for small and large arguments.
pub fn exp_height_segment_mass(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    (-a).exp() * -(-(b - a)).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_nonpositive_constant() {
        assert!(WeightSpec::constant(2, 0.0).is_err());
        assert!(WeightSpec::constant(2, -1.0).is_err());
    }

    #[test]
    fn exponential_segment() {
        assert_relative_eq!(exp_height_segment_mass(0.0, 1.0), 1.0 - (-1f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(exp_height_segment_mass(50.0, 50.0 + 1e-9), (-50f64).exp() * 1e-9, max_relative = 1e-8);
    }

    #[test]
    fn rotational_uses_radius() {
        let w = WeightSpec::rotational(3, 2, Arc::new(|xr: &[f64]| 1.0 + xr[1]), None).unwrap();
        assert_relative_eq!(w.eval(&[0.3, 3.0, 4.0]), 6.0);
    }

    #[test]
    fn vertical_integral_matches_closed_forms() {
        let w = WeightSpec::custom(2, Arc::new(|z: &[f64]| (-z[1]).exp()), None, true).unwrap();
        let e = WeightSpec::exponential_height(2).unwrap();
        assert_relative_eq!(w.vertical_integral(&[0.0], 0.2, 1.7), e.vertical_integral(&[0.0], 0.2, 1.7), epsilon = 1e-14);
    }

    #[test]
    fn checked_eval_rejects_dimension_mismatch() {
        let w = WeightSpec::constant(2, 1.0).unwrap();
        assert!(w.eval_checked(&[1.0]).is_err());
        assert!(w.eval_checked(&[1.0, 2.0]).is_ok());
    }
}
