//! Quadrature rules: Gauss-Legendre panels, adaptive Gauss-Kronrod and
//! seeded Monte Carlo streams.

use std::collections::{BinaryHeap, HashMap};
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::GaussLegendre;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadMethod {
    Exact,
    TensorGrid,
    MonteCarlo,
}

/// Numerical integration settings shared by every module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub method: QuadMethod,
    /// Nodes per axis for tensor rules, also used as the angular resolution of
    /// polar rules.
    pub points_per_axis: usize,
    pub samples: usize,
    pub seed: u64,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            method: QuadMethod::TensorGrid,
            points_per_axis: 64,
            samples: 100_000,
            seed: 0,
            abs_tol: 1e-12,
            rel_tol: 1e-9,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points_per_axis == 0 {
            return invalid("points_per_axis must be positive");
        }
        if self.samples == 0 {
            return invalid("samples must be positive");
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return invalid("tolerances must be positive");
        }
        Ok(())
    }

    pub fn with_tolerances(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_points(mut self, points_per_axis: usize) -> Self {
        self.points_per_axis = points_per_axis;
        self
    }

    pub fn with_method(mut self, method: QuadMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_samples(mut self, samples: usize, seed: u64) -> Self {
        self.samples = samples;
        self.seed = seed;
        self
    }
}

/// A value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }

    /// Fails when the error estimate exceeds `abs_tol + rel_tol * |value|`.
    pub fn require(self, abs_tol: f64, rel_tol: f64) -> Result<Self> {
        let requested = abs_tol + rel_tol * self.value.abs();
        if self.error > requested {
            Err(Error::ToleranceNotAchieved {
                achieved: self.error,
                requested,
            })
        } else {
            Ok(self)
        }
    }
}

type Rule = Arc<[(f64, f64)]>;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, cached per degree.
pub fn gauss_legendre(degree: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("quadrature cache poisoned");
    map.entry(degree)
        .or_insert_with(|| {
            let n = NonZeroUsize::new(degree.max(1)).unwrap();
            GaussLegendre::new(n).as_node_weight_pairs().to_vec().into()
        })
        .clone()
}

/// Composite Gauss-Legendre rule: `panels` equal panels of `degree` nodes.
pub fn composite_rule(a: f64, b: f64, degree: usize, panels: usize) -> Vec<(f64, f64)> {
    let rule = gauss_legendre(degree);
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * rule.len());
    for p in 0..panels {
        let lo = a + width * p as f64;
        let mid = lo + 0.5 * width;
        for &(x, w) in rule.iter() {
            out.push((mid + 0.5 * width * x, 0.5 * width * w));
        }
    }
    out
}

/// Fixed Gauss-Legendre integral of `f` over `[a, b]`.
pub fn integrate_gl(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, degree: usize) -> f64 {
    let rule = gauss_legendre(degree);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Tensor composite rule with about `nodes_per_axis` nodes along every axis.
pub fn integrate_box(
    mut f: impl FnMut(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    nodes_per_axis: usize,
) -> f64 {
    let dim = lo.len();
    let panels = nodes_per_axis.div_ceil(8).max(1);
    let rules: Vec<Vec<(f64, f64)>> = (0..dim)
        .map(|i| composite_rule(lo[i], hi[i], 8, panels))
        .collect();
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut total = 0.0;
    if dim == 0 {
        return f(&x);
    }
    loop {
        let mut w = 1.0;
        for i in 0..dim {
            let (xi, wi) = rules[i][idx[i]];
            x[i] = xi;
            w *= wi;
        }
        total += w * f(&x);
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < rules[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == dim {
                return total;
            }
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<const K: usize>(f: &mut impl FnMut(f64) -> [f64; K], a: f64, b: f64) -> ([f64; K], f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut kron = [0.0; K];
    let mut gauss = [0.0; K];
    let fc = f(mid);
    for k in 0..K {
        kron[k] = WGK[7] * fc[k];
        gauss[k] = WG[3] * fc[k];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(mid - dx);
        let f2 = f(mid + dx);
        for k in 0..K {
            let s = f1[k] + f2[k];
            kron[k] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let mut err2 = 0.0;
    for k in 0..K {
        kron[k] *= half;
        gauss[k] *= half;
        err2 += (kron[k] - gauss[k]).powi(2);
    }
    (kron, err2.sqrt())
}

struct Segment<const K: usize> {
    a: f64,
    b: f64,
    value: [f64; K],
    error: f64,
}

impl<const K: usize> PartialEq for Segment<K> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<const K: usize> Eq for Segment<K> {}
impl<const K: usize> PartialOrd for Segment<K> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<const K: usize> Ord for Segment<K> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive Gauss-Kronrod (7/15) integration of a vector-valued integrand.
///
/// Returns the integral and the Euclidean norm of the error estimate. The
/// error is compared against `abs_tol + rel_tol * |I|`; the result is
/// returned even when `max_segments` is exhausted.
pub fn integrate_adaptive_vec<const K: usize>(
    mut f: impl FnMut(f64) -> [f64; K],
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> ([f64; K], f64) {
    if a == b {
        return ([0.0; K], 0.0);
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    let mut total = v;
    let mut err = e;
    let norm = |x: &[f64; K]| x.iter().map(|t| t * t).sum::<f64>().sqrt();
    while err > abs_tol.max(rel_tol * norm(&total)) && heap.len() < max_segments {
        let seg = heap.pop().unwrap();
        let m = 0.5 * (seg.a + seg.b);
        if !(m > seg.a && m < seg.b) {
            heap.push(seg);
            break;
        }
        let (v1, e1) = gk15(&mut f, seg.a, m);
        let (v2, e2) = gk15(&mut f, m, seg.b);
        for k in 0..K {
            total[k] += v1[k] + v2[k] - seg.value[k];
        }
        err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: m, value: v1, error: e1 });
        heap.push(Segment { a: m, b: seg.b, value: v2, error: e2 });
    }
    // recompute to avoid drift from incremental updates
    let mut total = [0.0; K];
    let mut err = 0.0;
    for s in heap.iter() {
        for k in 0..K {
            total[k] += s.value[k];
        }
        err += s.error;
    }
    (total, err)
}

/// Scalar adaptive Gauss-Kronrod integration.
pub fn integrate_adaptive(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Estimate {
    let (v, e) = integrate_adaptive_vec(|x| [f(x)], a, b, abs_tol, rel_tol, 2000);
    Estimate { value: v[0], error: e }
}

/// Adaptive integration over consecutive breakpoints.
pub fn integrate_piecewise(
    mut f: impl FnMut(f64) -> f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Estimate {
    let mut out = Estimate::exact(0.0);
    let pieces = breaks.len().saturating_sub(1).max(1) as f64;
    for w in breaks.windows(2) {
        let e = integrate_adaptive(&mut f, w[0], w[1], abs_tol / pieces, rel_tol);
        out.value += e.value;
        out.error += e.error;
    }
    out
}

/// Deterministic random stream `stream` for a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sample mean and standard error.
pub fn mean_estimate(samples: &[f64]) -> Estimate {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return Estimate { value: f64::NAN, error: f64::INFINITY };
    }
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return Estimate { value: mean, error: f64::INFINITY };
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate { value: mean, error: (var / n).sqrt() }
}
