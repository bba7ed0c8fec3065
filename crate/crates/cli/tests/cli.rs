use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn floatlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floatlab")).args(args).output().expect("binary runs")
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    floatlab(&args)
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn disk_convergence_passes_and_writes_reports() {
    let out = TempDir::new().unwrap();
    let o = run("converge", &configs().join("disk.toml"), out.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.path().join("converge.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("delta,deficit,ratio,ratio_err"));
    assert_eq!(lines.count(), 5);
    let summary = json(&out.path().join("converge.json"));
    // c_2 · 2π
    let target = std::f64::consts::PI * 1.5f64.powf(2.0 / 3.0);
    assert!((summary["target"]["value"].as_f64().unwrap() - target).abs() < 1e-9);
    assert_eq!(summary["pass"], true);
    let svg = std::fs::read_to_string(out.path().join("converge.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [&a, &b] {
        assert_eq!(run("converge", &configs().join("disk.toml"), dir.path(), &["--format", "csv,json"]).status.code(), Some(0));
    }
    for name in ["converge.csv", "converge.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
    assert!(!a.path().join("converge.svg").exists());
}

#[test]
fn seeded_random_polytopes_repeat_and_report_failure() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "rp.toml",
        "experiment = \"eq_random\"\nseed = 7\n[body]\nkind = \"ball\"\ndim = 2\n[randpoly]\nn_points = 2000\ntrials = 20\n[verdict]\ntolerance = 0.001\n",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let oa = run("randpoly", &cfg, &a, &["--seed", "11"]);
    let ob = run("randpoly", &cfg, &b, &["--seed", "11"]);
    // a 0.1% tolerance cannot hold at 20 trials
    assert_eq!(oa.status.code(), Some(2));
    assert_eq!(ob.status.code(), Some(2));
    assert_eq!(std::fs::read(a.join("randpoly.csv")).unwrap(), std::fs::read(b.join("randpoly.csv")).unwrap());
    assert_eq!(json(&a.join("randpoly.json"))["seed"], 11);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let unknown = write_config(&dir, "unknown.toml", "experiment = \"eq12\"\ncolour = 3\n[body]\nkind = \"ball\"\ndim = 2\n");
    let o = run("converge", &unknown, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let bad_sweep = write_config(&dir, "sweep.toml", "experiment = \"eq12\"\n[body]\nkind = \"ball\"\ndim = 2\n[sweep]\nq = 2.0\n");
    let o = run("converge", &bad_sweep, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep.q"));

    let missing_seed = write_config(&dir, "seed.toml", "experiment = \"eq_random\"\n[body]\nkind = \"ball\"\ndim = 2\n");
    assert_eq!(run("randpoly", &missing_seed, &out, &[]).status.code(), Some(1));

    assert_eq!(run("converge", &dir.path().join("absent.toml"), &out, &[]).status.code(), Some(1));
    assert_eq!(run("converge", &configs().join("disk.toml"), &out, &["--format", "pdf"]).status.code(), Some(1));
    assert_eq!(floatlab(&["converge"]).status.code(), Some(1));
    assert_eq!(floatlab(&["--help"]).status.code(), Some(0));
}

#[test]
fn single_evaluation_subcommands() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let body = write_config(&dir, "body.toml", "experiment = \"eq12\"\n[body]\nkind = \"ball\"\ndim = 2\n[evaluate]\ndelta = 1e-3\n[discretization]\ndirections = 32\n");
    assert_eq!(run("float-body", &body, &out, &[]).status.code(), Some(0));
    let table = std::fs::read_to_string(out.join("float_body.csv")).unwrap();
    assert_eq!(table.lines().count(), 33);
    assert_eq!(run("asa", &body, &out, &[]).status.code(), Some(0));
    let a = json(&out.join("asa.json"));
    assert!((a["as_1"].as_f64().unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-8);

    let o = run("float-func", &configs().join("gaussian_constant.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let f = json(&out.join("float_func.json"));
    assert!(f["i_f"].as_f64().unwrap() > 0.0);
    assert!(f["i_f"].as_f64().unwrap() <= f["i_psi"].as_f64().unwrap());
    let rows = std::fs::read_to_string(out.join("float_func.csv")).unwrap();
    for line in rows.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
        assert!(v[2] >= v[1]);
    }

    let o = run("sconcave", &configs().join("parabola_sconcave.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = std::fs::read_to_string(out.join("sconcave.csv")).unwrap();
    for line in rows.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
        assert!(v[2] <= v[1] + 1e-12);
    }
}
