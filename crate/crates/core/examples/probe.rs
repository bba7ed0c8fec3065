use floatlab::floating_function::{deficit_integrals, PointwiseFloating, DEFAULT_TRUNCATION};
use floatlab::function::ConvexFunctionSpec;
use floatlab::quadrature::QuadratureSpec;
use floatlab::weights::WeightSpec;
use rayon::prelude::*;
fn main() {
    let psi = ConvexFunctionSpec::half_norm_squared(1).unwrap();
    let w = WeightSpec::exponential_height(2).unwrap();
    let q = QuadratureSpec::default();
    let ds: Vec<f64> = (0..10).map(|i| 1e-2 * 0.25f64.powi(i)).collect();
    let out: Vec<_> = ds.par_iter().map(|&d| {
        let t = std::time::Instant::now();
        let qd = q.clone().with_tolerances(q.abs_tol.min(1e-3 * d), q.rel_tol);
        let pf = PointwiseFloating::new(&psi, &w, d, &qd).unwrap();
        let r = deficit_integrals(&pf, &qd, DEFAULT_TRUNCATION).unwrap();
        (d, r.i_f / d.powf(2.0 / 3.0), r.tail_bound, t.elapsed().as_secs_f64())
    }).collect();
    for o in out { println!("{:e} {:.6} {:e} {:.1}s", o.0, o.1, o.2, o.3); }
}
