//! Weighted floating bodies `K^Φ_δ` by per-direction cap inversion.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{halfspace_intersection, polygon_area, BoundingBox, ConvexSet, Halfspace, Hull3};
use crate::quadrature::{stream_rng, Estimate, QuadratureSpec};
use crate::roots::illinois;
use crate::weights::WeightSpec;

/// Unit directions used to discretise the halfspace family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionGrid {
    dim: usize,
    directions: Vec<Vec<f64>>,
    uniform_circle: bool,
}

impl DirectionGrid {
    /// `m` equally spaced angles (dimension 2), a Fibonacci sphere
    /// (dimension 3), or `±1` (dimension 1).
    pub fn new(dim: usize, m: usize) -> Result<Self> {
        match dim {
            1 => Ok(Self { dim, directions: vec![vec![1.0], vec![-1.0]], uniform_circle: false }),
            2 => Self::circle(m),
            3 => Self::fibonacci(m),
            d => Err(Error::Unsupported(format!("direction grids in dimension {d}"))),
        }
    }

    pub fn circle(m: usize) -> Result<Self> {
        if m < 4 {
            return invalid("a planar direction grid needs at least 4 directions");
        }
        let directions = (0..m)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        Ok(Self { dim: 2, directions, uniform_circle: true })
    }

    pub fn fibonacci(m: usize) -> Result<Self> {
        if m < 6 {
            return invalid("a spatial direction grid needs at least 6 directions");
        }
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let directions = (0..m)
            .map(|k| {
                let z = 1.0 - (2.0 * k as f64 + 1.0) / m as f64;
                let r = (1.0 - z * z).sqrt();
                let t = golden * k as f64;
                vec![r * t.cos(), r * t.sin(), z]
            })
            .collect();
        Ok(Self { dim: 3, directions, uniform_circle: false })
    }

    /// Arbitrary directions; each is normalised.
    pub fn from_directions(directions: Vec<Vec<f64>>) -> Result<Self> {
        let dim = directions.first().map_or(0, |d| d.len());
        if dim == 0 || directions.len() < 2 * dim || directions.iter().any(|d| d.len() != dim) {
            return invalid("direction grid needs at least 2·dim directions of equal dimension");
        }
        let directions = directions
            .into_iter()
            .map(|d| Halfspace::new(d, 0.0).map(|h| h.normal))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim, directions, uniform_circle: false })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn is_uniform_circle(&self) -> bool {
        self.uniform_circle
    }
}

/// Weighted mass of the whole body.
pub fn total_mass<B: ConvexSet + ?Sized>(body: &B, w: &WeightSpec, quad: &QuadratureSpec) -> Result<f64> {
    let mut u = vec![0.0; body.dim()];
    u[0] = 1.0;
    let lo = -body.support_value(&u.iter().map(|x| -x).collect::<Vec<_>>())?;
    let hi = body.support_value(&u)?;
    let cut = Halfspace { normal: u, offset: lo - 1e-9 * (hi - lo) };
    Ok(body.cap_mass(&cut, w, quad)?.value)
}

/// Offset `a` with `Φ(K ∩ {<y, u> >= a}) = δ`.
pub fn cap_offset_for_mass<B: ConvexSet + ?Sized>(
    body: &B,
    u: &[f64],
    w: &WeightSpec,
    delta: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let u = Halfspace::new(u.to_vec(), 0.0)?.normal;
    let hi = body.support_value(&u)?;
    if delta == 0.0 {
        return Ok(hi);
    }
    if !(delta > 0.0) {
        return invalid("delta must be nonnegative");
    }
    let neg: Vec<f64> = u.iter().map(|x| -x).collect();
    let lo = -body.support_value(&neg)?;
    let mass = |a: f64| -> Result<f64> { Ok(body.cap_mass(&Halfspace { normal: u.clone(), offset: a }, w, quad)?.value) };
    let total = mass(lo)?;
    if delta >= total {
        return Err(Error::DeltaTooLarge { delta, total });
    }
    let tol = quad.abs_tol.max(quad.rel_tol * delta);
    let f = |a: f64| -> Result<f64> { Ok(mass(a)? - delta) };
    let a = illinois(
        |a| {
            let r = f(a)?;
            Ok(if r.abs() <= tol { 0.0 } else { r })
        },
        lo,
        hi,
        total - delta,
        -delta,
        1e-15,
        400,
    )?;
    Ok(a)
}

/// Outer polytope approximation of `K^Φ_δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloatingBodyApprox {
    pub delta: f64,
    pub weight: String,
    pub grid: DirectionGrid,
    pub offsets: Vec<f64>,
    /// Vertices of the intersection; empty above dimension 3.
    pub vertices: Vec<Vec<f64>>,
    pub volume: Estimate,
}

impl FloatingBodyApprox {
    pub fn halfspaces(&self) -> Vec<Halfspace> {
        self.grid.directions().iter().zip(&self.offsets).map(|(u, a)| Halfspace { normal: u.clone(), offset: *a }).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_tol(x, 0.0)
    }

    pub fn contains_tol(&self, x: &[f64], tol: f64) -> bool {
        self.grid.directions().iter().zip(&self.offsets).all(|(u, a)| dot(u, x) <= a + tol)
    }

    /// Area enclosed by the support function sampled on a uniform circle grid,
    /// `π Σ_k (1 - k²) |ĥ_k|²`.
    pub fn fourier_area(&self) -> Option<f64> {
        self.grid.is_uniform_circle().then(|| fourier_support_area(&self.offsets))
    }

    /// Best available volume: the spectral area for uniform planar grids,
    /// the polytope volume otherwise.
    pub fn smooth_volume(&self) -> Estimate {
        match self.fourier_area() {
            Some(a) => Estimate { value: a, error: (a - self.volume.value).abs() },
            None => self.volume,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Area of the planar convex set whose support function takes the values `h`
/// at equally spaced angles, from the trigonometric interpolant of `h`.
pub fn fourier_support_area(h: &[f64]) -> f64 {
    let m = h.len();
    let mut buf: Vec<Complex<f64>> = h.iter().map(|x| Complex::new(*x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let mut area = 0.0;
    for (j, c) in buf.iter().enumerate() {
        let k = if j <= m / 2 { j as f64 } else { j as f64 - m as f64 };
        area += (1.0 - k * k) * c.norm_sqr();
    }
    std::f64::consts::PI * area / (m as f64 * m as f64)
}

/// Intersection of the halfspaces `<y, u> <= a_δ(u)` over the grid.
pub fn weighted_floating_body<B: ConvexSet + ?Sized>(
    body: &B,
    w: &WeightSpec,
    delta: f64,
    grid: &DirectionGrid,
    quad: &QuadratureSpec,
) -> Result<FloatingBodyApprox> {
    let dim = body.dim();
    if grid.dim() != dim || w.ambient_dim() != dim {
        return invalid("grid, weight and body dimensions differ");
    }
    let offsets = grid
        .directions()
        .par_iter()
        .map(|u| cap_offset_for_mass(body, u, w, delta, quad))
        .collect::<Result<Vec<_>>>()?;
    let mut approx = FloatingBodyApprox {
        delta,
        weight: w.id(),
        grid: grid.clone(),
        offsets,
        vertices: Vec::new(),
        volume: Estimate::exact(0.0),
    };
    let bbox = body.bounding_box();
    let empty = |e: Error| match e {
        Error::FloatingBodyEmpty { .. } => Error::FloatingBodyEmpty { delta },
        e => e,
    };
    if dim <= 3 {
        let verts = halfspace_intersection(&approx.halfspaces(), &bbox).map_err(empty)?;
        approx.volume = Estimate::exact(match dim {
            1 => verts[1][0] - verts[0][0],
            2 => polygon_area(&verts),
            _ => Hull3::new(&verts).map_err(empty)?.volume(),
        });
        approx.vertices = verts;
    } else {
        approx.volume = mc_volume(&approx, &bbox, quad);
        if approx.volume.value <= 0.0 {
            return Err(Error::FloatingBodyEmpty { delta });
        }
    }
    Ok(approx)
}

fn mc_volume(approx: &FloatingBodyApprox, bbox: &BoundingBox, quad: &QuadratureSpec) -> Estimate {
    use rand::RngExt;
    let mut rng = stream_rng(quad.seed, 1);
    let n = bbox.dim();
    let mut x = vec![0.0; n];
    let mut hits = 0usize;
    for _ in 0..quad.samples {
        for k in 0..n {
            x[k] = bbox.lo[k] + (bbox.hi[k] - bbox.lo[k]) * rng.random::<f64>();
        }
        hits += approx.contains(&x) as usize;
    }
    let p = hits as f64 / quad.samples as f64;
    let vol = bbox.volume();
    Estimate { value: vol * p, error: vol * (p * (1.0 - p) / quad.samples as f64).sqrt() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{phi_barycenter, ConvexBodySpec};
    use approx::assert_relative_eq;

    fn segment_area(h: f64) -> f64 {
        // area of the unit-disk cap of height h
        let a = 1.0 - h;
        a.acos() - a * (1.0 - a * a).sqrt()
    }

    #[test]
    fn disk_offset_inverts_segment() {
        let disk = ConvexBodySpec::unit_ball(2).unwrap();
        let w = WeightSpec::constant(2, 1.0).unwrap();
        let q = QuadratureSpec::default();
        let delta = segment_area(0.5);
        let a = cap_offset_for_mass(&disk, &[0.3, -0.7], &w, delta, &q).unwrap();
        // mass residual tolerance is rel_tol·δ
        assert_relative_eq!(a, 0.5, epsilon = 1e-9);
        let tight = q.clone().with_tolerances(1e-300, 1e-14);
        let a = cap_offset_for_mass(&disk, &[0.3, -0.7], &w, delta, &tight).unwrap();
        assert_relative_eq!(a, 0.5, epsilon = 1e-13);
        assert_relative_eq!(cap_offset_for_mass(&disk, &[1.0, 0.0], &w, 0.0, &q).unwrap(), 1.0);
        let small = cap_offset_for_mass(&disk, &[1.0, 0.0], &w, 1e-9, &q).unwrap();
        assert!(small < 1.0 && small > 0.999);
    }

    #[test]
    fn too_large_delta() {
        let disk = ConvexBodySpec::unit_ball(2).unwrap();
        let w = WeightSpec::constant(2, 1.0).unwrap();
        let r = cap_offset_for_mass(&disk, &[1.0, 0.0], &w, 4.0, &QuadratureSpec::default());
        assert!(matches!(r, Err(Error::DeltaTooLarge { .. })));
    }

    #[test]
    fn disk_body_is_concentric_disk() {
        let disk = ConvexBodySpec::unit_ball(2).unwrap();
        let w = WeightSpec::constant(2, 1.0).unwrap();
        let q = QuadratureSpec::default().with_tolerances(1e-300, 1e-14);
        let grid = DirectionGrid::circle(256).unwrap();
        let fb = weighted_floating_body(&disk, &w, segment_area(0.5), &grid, &q).unwrap();
        for v in &fb.vertices {
            let r = dot(v, v).sqrt();
            assert!((0.5 - 1e-9..=0.5 + 2e-4).contains(&r), "{r}");
        }
        assert_relative_eq!(fb.fourier_area().unwrap(), std::f64::consts::PI * 0.25, max_relative = 1e-12);
    }

    #[test]
    fn fourier_area_of_shifted_disk() {
        // support function of the disk of radius 2 centred at (0.3, -0.1)
        let m = 64;
        let h: Vec<f64> = (0..m)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                2.0 + 0.3 * t.cos() - 0.1 * t.sin()
            })
            .collect();
        assert_relative_eq!(fourier_support_area(&h), 4.0 * std::f64::consts::PI, max_relative = 1e-13);
    }

    #[test]
    fn zero_delta_returns_body() {
        let sq = ConvexBodySpec::cube(2, 1.0).unwrap();
        let w = WeightSpec::constant(2, 1.0).unwrap();
        let grid = DirectionGrid::circle(8).unwrap();
        let fb = weighted_floating_body(&sq, &w, 0.0, &grid, &QuadratureSpec::default()).unwrap();
        assert_relative_eq!(fb.volume.value, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn ball_in_space_is_round() {
        let ball = ConvexBodySpec::ball(vec![0.0; 3], 2.0).unwrap();
        let w = WeightSpec::constant(3, 1.0).unwrap();
        let grid = DirectionGrid::fibonacci(200).unwrap();
        let fb = weighted_floating_body(&ball, &w, 0.05, &grid, &QuadratureSpec::default()).unwrap();
        let a = fb.offsets[0];
        assert!(fb.offsets.iter().all(|b| (a - b).abs() < 1e-10));
        let norms: Vec<f64> = fb.vertices.iter().map(|v| dot(v, v).sqrt()).collect();
        let (lo, hi) = norms.iter().fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(*r), h.max(*r)));
        assert!(lo >= a - 1e-9 && hi - lo < 0.05, "{lo} {hi}");
    }

    #[test]
    fn empty_body_is_reported() {
        // the deepest point of a triangle has depth 4/9 of its area
        let tri = ConvexBodySpec::vpolytope(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let w = WeightSpec::constant(2, 1.0).unwrap();
        let grid = DirectionGrid::circle(64).unwrap();
        let q = QuadratureSpec::default();
        assert!(weighted_floating_body(&tri, &w, 0.2, &grid, &q).is_ok());
        let r = weighted_floating_body(&tri, &w, 0.235, &grid, &q);
        assert!(matches!(r, Err(Error::FloatingBodyEmpty { delta }) if delta == 0.235), "{r:?}");
    }

    #[test]
    fn slice_barycentre_lies_on_boundary() {
        let disk = ConvexBodySpec::unit_ball(2).unwrap();
        let w = WeightSpec::constant(2, 1.0).unwrap();
        let q = QuadratureSpec::default();
        let delta = 0.1;
        let grid = DirectionGrid::circle(512).unwrap();
        let fb = weighted_floating_body(&disk, &w, delta, &grid, &q).unwrap();
        let u = [0.6, 0.8];
        let a = cap_offset_for_mass(&disk, &u, &w, delta, &q).unwrap();
        let cut = Halfspace::new(u.to_vec(), a).unwrap();
        let b = crate::geometry::section_barycenter(&disk, &cut, &w, &q).unwrap();
        assert!(fb.contains_tol(&b, 1e-12));
        let gap = fb.halfspaces().iter().map(|h| h.offset - dot(&h.normal, &b)).fold(f64::INFINITY, f64::min);
        assert!(gap < 1e-4, "{gap}");
        let _ = phi_barycenter(&disk, &cut, &w, &q).unwrap();
    }
}
