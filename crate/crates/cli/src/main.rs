use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use floatlab::asa::{asa_body_p, constant, ConstantKind};
use floatlab::config::{parse_config, ExperimentConfig, ExperimentKind, OutputFormat};
use floatlab::convergence::{random_polytope_deficit, run_experiment, ExperimentSpec};
use floatlab::error::Error;
use floatlab::floating_body::{weighted_floating_body, DirectionGrid};
use floatlab::floating_function::{deficit_integrals, FloatingEvaluator, PointwiseFloating};
use floatlab::geometry::ConvexSet;
use floatlab::report::{emit_report, format_f64, table_csv, write_file};
use floatlab::sconcave::{meridian_floating_function, sconcave_floating_function, SConcaveEvaluator};

#[derive(Parser, Debug)]
#[command(name = "floatlab", version, about = "Weighted floating bodies and functions, affine surface areas and their convergence")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of Monte-Carlo stages (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated list of csv, json, svg (overrides `output.formats`).
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<String>>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Weighted floating body of a convex body at one δ.
    FloatBody(Common),
    /// Floating function ψ_δ at probe points and its deficit integrals.
    FloatFunc(Common),
    /// Floating function of an s-concave function at one δ.
    Sconcave(Common),
    /// Affine surface area functional and limit constant of the experiment.
    Asa(Common),
    /// δ-sweep, extrapolation and verdict.
    Converge(Common),
    /// Monte-Carlo deficit of random polytopes.
    Randpoly(Common),
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Io { .. } | Error::IncompatibleWeight(_) => Failure::Config(e.to_string()),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

struct Run {
    cfg: ExperimentConfig,
    dir: PathBuf,
    formats: Vec<OutputFormat>,
}

fn load(c: &Common) -> Result<Run, Failure> {
    let text = std::fs::read_to_string(&c.config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", c.config.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = c.seed {
        cfg.seed = Some(s);
    }
    let formats = match &c.format {
        Some(list) => list.iter().map(|s| s.parse()).collect::<Result<Vec<OutputFormat>, Error>>()?,
        None => cfg.output.formats.clone(),
    };
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    Ok(Run { cfg, dir, formats })
}

fn prepare(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))
}

/// Writes the table and summary of a single-evaluation subcommand.
fn emit_plain(run: &Run, stem: &str, columns: &[&str], rows: &[Vec<f64>], summary: serde_json::Value) -> Result<(), Failure> {
    prepare(&run.dir)?;
    for f in &run.formats {
        match f {
            OutputFormat::Csv => write_file(&run.dir.join(format!("{stem}.csv")), &table_csv(columns, rows)?)?,
            OutputFormat::Json => {
                let mut text = serde_json::to_string_pretty(&summary).map_err(|e| Failure::Numerical(e.to_string()))?;
                text.push('\n');
                write_file(&run.dir.join(format!("{stem}.json")), &text)?
            }
            OutputFormat::Svg => eprintln!("note: no plot for `{stem}`; svg skipped"),
        }
    }
    Ok(())
}

fn probes(run: &Run, n: usize) -> Vec<Vec<f64>> {
    if !run.cfg.evaluate.points.is_empty() {
        return run.cfg.evaluate.points.clone();
    }
    (0..=10).map(|i| {
        let mut x = vec![0.0; n];
        x[0] = -1.0 + 0.2 * i as f64;
        x
    }).collect()
}

fn float_body(run: &Run) -> Result<bool, Failure> {
    let cfg = &run.cfg;
    let body = cfg.body_spec()?;
    let w = cfg.weight_spec()?;
    let delta = cfg.evaluation_delta();
    let grid = DirectionGrid::new(body.dim(), cfg.discretization.directions)?;
    let fb = weighted_floating_body(&body, &w, delta, &grid, &cfg.quadrature)?;
    let n = body.dim();
    let mut columns: Vec<String> = (1..=n).map(|i| format!("u{i}")).collect();
    columns.push("offset".into());
    let rows: Vec<Vec<f64>> = grid
        .directions()
        .iter()
        .zip(&fb.offsets)
        .map(|(u, h)| u.iter().copied().chain([*h]).collect())
        .collect();
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let smooth = fb.smooth_volume();
    let summary = json!({
        "delta": delta,
        "weight": fb.weight,
        "directions": grid.len(),
        "volume": fb.volume.value,
        "volume_error": fb.volume.error,
        "smooth_volume": smooth.value,
        "vertices": fb.vertices.len(),
    });
    println!("floating body at delta = {}: volume {}", format_f64(delta), format_f64(fb.volume.value));
    emit_plain(run, "float_body", &cols, &rows, summary)?;
    Ok(true)
}

fn float_func(run: &Run) -> Result<bool, Failure> {
    let cfg = &run.cfg;
    let psi = cfg.function_spec()?;
    let w = cfg.weight_spec()?;
    let delta = cfg.evaluation_delta();
    let pf = PointwiseFloating::new(&psi, &w, delta, &cfg.quadrature)?;
    let n = psi.dim();
    let mut rows = Vec::new();
    for x in probes(run, n) {
        if x.len() != n {
            return Err(Failure::Config(format!("evaluate.points: expected {n} coordinates, got {}", x.len())));
        }
        let gap = pf.gap(&x)?;
        let p = psi.value(&x);
        rows.push(x.iter().copied().chain([p, p + gap, gap]).collect());
    }
    let d = deficit_integrals(&pf, &cfg.quadrature, cfg.discretization.truncation)?;
    let mut columns: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    columns.extend(["psi", "psi_delta", "gap"].map(String::from));
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let summary = json!({
        "delta": delta,
        "weight": w.id(),
        "i_f": d.i_f,
        "i_psi": d.i_psi,
        "tail_bound": d.tail_bound,
    });
    println!("floating function at delta = {}: I_f {}, I_psi {}", format_f64(delta), format_f64(d.i_f), format_f64(d.i_psi));
    emit_plain(run, "float_func", &cols, &rows, summary)?;
    Ok(true)
}

fn sconcave(run: &Run) -> Result<bool, Failure> {
    let cfg = &run.cfg;
    let f = cfg.sconcave_spec()?;
    let w = cfg.weight_spec()?;
    let delta = cfg.evaluation_delta();
    let d = &cfg.discretization;
    let eval: Box<dyn SConcaveEvaluator> = if f.dim() == 1 || (f.is_radial() && w.constant_value().is_some()) {
        Box::new(meridian_floating_function(&f, &w, delta, d.angles, d.refine, &cfg.quadrature)?)
    } else {
        let grid = DirectionGrid::new(f.dim() + f.order(), d.angles)?;
        Box::new(sconcave_floating_function(&f, &w, delta, &grid, &cfg.quadrature)?)
    };
    let n = f.dim();
    let mut rows = Vec::new();
    for x in probes(run, n) {
        if x.len() != n {
            return Err(Failure::Config(format!("evaluate.points: expected {n} coordinates, got {}", x.len())));
        }
        rows.push(x.iter().copied().chain([f.value(&x), eval.value(&x)?]).collect());
    }
    let deficit = floatlab::sconcave::sconcave_deficit(eval.as_ref(), &cfg.quadrature)?;
    let mut columns: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    columns.extend(["f", "f_delta"].map(String::from));
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let summary = json!({
        "delta": delta,
        "s": f.order(),
        "deficit": deficit.value,
        "deficit_error": deficit.error,
    });
    println!("s-concave floating function at delta = {}: deficit {}", format_f64(delta), format_f64(deficit.value));
    emit_plain(run, "sconcave", &cols, &rows, summary)?;
    Ok(true)
}

fn asa(run: &Run) -> Result<bool, Failure> {
    let cfg = &run.cfg;
    let spec = cfg.experiment_spec()?;
    let target = spec.target(&cfg.quadrature)?;
    let mut summary = json!({
        "experiment": spec.tag().label(),
        "constant": target.constant,
        "functional": target.functional,
        "functional_error": target.functional_error,
        "target": target.value,
    });
    if let ExperimentSpec::Body { body, .. } = &spec {
        let p1 = asa_body_p(body, 1.0, &cfg.quadrature)?;
        summary["as_1"] = json!(p1.value);
        summary["c_n"] = json!(constant(ConstantKind::Body, body.dim(), 0));
    }
    println!("{}: constant {} x functional {} = {}", spec.tag().label(), format_f64(target.constant), format_f64(target.functional), format_f64(target.value));
    emit_plain(
        run,
        "asa",
        &["constant", "functional", "functional_error", "target"],
        &[vec![target.constant, target.functional, target.functional_error, target.value]],
        summary,
    )?;
    Ok(true)
}

fn converge(run: &Run) -> Result<bool, Failure> {
    let cfg = &run.cfg;
    if cfg.experiment == ExperimentKind::EqRandom {
        return Err(Failure::Config("experiment: `eq_random` runs under `randpoly`".into()));
    }
    let spec = cfg.experiment_spec()?;
    let report = run_experiment(&spec, &cfg.sweep, &cfg.quadrature, cfg.verdict.tolerance)?;
    for p in &report.points {
        println!("delta {}  ratio {}", format_f64(p.delta), format_f64(p.ratio));
    }
    println!(
        "{}: limit {} target {} relative error {:.3e} (tolerance {}) {} in {:.2} s",
        report.tag.label(),
        format_f64(report.fit.limit),
        format_f64(report.target.value),
        report.relative_error,
        report.tolerance,
        if report.pass { "PASS" } else { "FAIL" },
        report.wall_clock_s
    );
    emit_report(&report, &run.formats, &run.dir, "converge")?;
    Ok(report.pass)
}

fn randpoly(run: &Run) -> Result<bool, Failure> {
    let cfg = &run.cfg;
    let body = cfg.body_spec()?;
    let seed = cfg.seed.ok_or_else(|| Failure::Config("seed: required for Monte-Carlo experiments".into()))?;
    let start = Instant::now();
    let est = random_polytope_deficit(&body, cfg.randpoly.n_points, cfg.randpoly.trials, seed, &cfg.quadrature)?;
    let spec = cfg.experiment_spec()?;
    let target = spec.target(&cfg.quadrature)?;
    let rel = if target.value > 0.0 { (est.ratio - target.value).abs() / target.value } else { est.ratio.abs() };
    let covers = (est.ratio - target.value).abs() <= est.half_width;
    let pass = rel < cfg.verdict.tolerance && covers;
    println!(
        "random polytopes N = {}, {} trials: ratio {} +- {} target {} relative error {:.3e} {} in {:.2} s",
        est.n_points,
        est.trials,
        format_f64(est.ratio),
        format_f64(est.half_width),
        format_f64(target.value),
        rel,
        if pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    let summary = json!({
        "experiment": "eq random",
        "seed": seed,
        "n_points": est.n_points,
        "trials": est.trials,
        "ratio": est.ratio,
        "half_width": est.half_width,
        "mean_deficit": est.mean_deficit,
        "volume": est.volume,
        "target": target.value,
        "relative_error": rel,
        "interval_covers_target": covers,
        "tolerance": cfg.verdict.tolerance,
        "pass": pass,
    });
    emit_plain(
        run,
        "randpoly",
        &["n_points", "trials", "ratio", "half_width", "target"],
        &[vec![est.n_points as f64, est.trials as f64, est.ratio, est.half_width, target.value]],
        summary,
    )?;
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let (common, f): (&Common, fn(&Run) -> Result<bool, Failure>) = match &cli.command {
        Command::FloatBody(c) => (c, float_body),
        Command::FloatFunc(c) => (c, float_func),
        Command::Sconcave(c) => (c, sconcave),
        Command::Asa(c) => (c, asa),
        Command::Converge(c) => (c, converge),
        Command::Randpoly(c) => (c, randpoly),
    };
    let outcome = load(common).and_then(|run| f(&run));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
