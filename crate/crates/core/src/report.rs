//! CSV, JSON and SVG output of convergence reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::OutputFormat;
use crate::convergence::{ConvergenceReport, Fit, SweepPoint, SweepSpec, Target};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureSpec;

/// 17 significant digits: round-trips every `f64`.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Table with a header row and full-precision numeric cells.
pub fn table_csv(columns: &[&str], rows: &[Vec<f64>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io { path: "<csv buffer>".into(), source: e.into() };
    w.write_record(columns).map_err(io)?;
    for r in rows {
        if r.len() != columns.len() {
            return Err(Error::InvalidInput(format!("row of length {} under {} columns", r.len(), columns.len())));
        }
        w.write_record(r.iter().map(|x| format_f64(*x))).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io { path: "<csv buffer>".into(), source: e.into_error() })?;
    Ok(String::from_utf8(bytes).expect("csv output is ascii"))
}

/// Columns `delta, deficit, ratio, ratio_err`.
pub fn sweep_csv(points: &[SweepPoint]) -> Result<String> {
    if points.is_empty() {
        return Err(Error::NoData);
    }
    let rows: Vec<Vec<f64>> = points.iter().map(|p| vec![p.delta, p.deficit, p.ratio, p.ratio_err]).collect();
    table_csv(&["delta", "deficit", "ratio", "ratio_err"], &rows)
}

/// Deterministic part of a report; wall-clock time is left out so that equal
/// inputs give equal bytes.
#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub experiment: &'a str,
    pub target: &'a Target,
    pub limit: f64,
    pub relative_error: f64,
    pub uncertainty: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub monotone: bool,
    pub fit: &'a Fit,
    pub exponent: f64,
    pub sweep: &'a SweepSpec,
    pub budgets: &'a QuadratureSpec,
}

pub fn summary_json(report: &ConvergenceReport) -> Result<String> {
    if report.points.is_empty() {
        return Err(Error::NoData);
    }
    let s = Summary {
        experiment: report.tag.label(),
        target: &report.target,
        limit: report.fit.limit,
        relative_error: report.relative_error,
        uncertainty: report.uncertainty,
        tolerance: report.tolerance,
        pass: report.pass,
        monotone: report.monotone,
        fit: &report.fit,
        exponent: report.exponent,
        sweep: &report.sweep,
        budgets: &report.budgets,
    };
    let mut out = serde_json::to_string_pretty(&s).map_err(|e| Error::InvalidInput(e.to_string()))?;
    out.push('\n');
    Ok(out)
}

/// Ratio against `log10 δ` with the target as a dashed line and the fitted
/// model as a solid curve.
pub fn convergence_svg(report: &ConvergenceReport) -> Result<String> {
    let pts: Vec<(f64, f64)> =
        report.points.iter().filter(|p| p.ratio.is_finite()).map(|p| (p.delta.log10(), p.ratio)).collect();
    if pts.is_empty() {
        return Err(Error::NoData);
    }
    let (w, h, m) = (640.0, 400.0, 60.0);
    let xmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xmax = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    if report.target.value.is_finite() {
        ys.push(report.target.value);
    }
    let ymin = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (xpad, ypad) = (((xmax - xmin) * 0.05).max(0.1), ((ymax - ymin) * 0.1).max(1e-3 * ymax.abs().max(1e-12)));
    let (x0, x1, y0, y1) = (xmin - xpad, xmax + xpad, ymin - ypad, ymax + ypad);
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{:.2} {:.2} H{:.2} M{:.2} {:.2} V{:.2}" stroke="black" fill="none"/>"#,
        m,
        h - m,
        w - m,
        m,
        h - m,
        m
    );
    for k in (x0.ceil() as i64)..=(x1.floor() as i64) {
        let x = sx(k as f64);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, h - m, h - m + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" font-size="12" text-anchor="middle">1e{k}</text>"#, h - m + 20.0);
    }
    for i in 0..=4 {
        let y = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{:.4}</text>"#,
            m - 8.0,
            sy(y) + 4.0,
            y
        );
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">delta</text>"#, w / 2.0, h - 15.0);
    let _ = writeln!(s, r#"<text x="15" y="{:.2}" font-size="13" transform="rotate(-90 15 {:.2})" text-anchor="middle">ratio</text>"#, h / 2.0, h / 2.0);
    let _ = writeln!(s, r#"<text x="{:.2}" y="25" font-size="14" text-anchor="middle">{}</text>"#, w / 2.0, report.tag.label());
    if report.target.value.is_finite() {
        let y = sy(report.target.value);
        let _ = writeln!(
            s,
            r#"<line x1="{m:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="red" stroke-dasharray="6 4"/>"#,
            w - m
        );
    }
    let f = &report.fit;
    if f.limit.is_finite() && f.amplitude.is_finite() && f.exponent.is_finite() {
        let mut d = String::new();
        for i in 0..=100 {
            let lx = x0 + (x1 - x0) * i as f64 / 100.0;
            let r = f.limit + f.amplitude * 10f64.powf(lx * f.exponent);
            let _ = write!(d, "{}{:.2} {:.2} ", if i == 0 { "M" } else { "L" }, sx(lx), sy(r.clamp(y0, y1)));
        }
        let _ = writeln!(s, r#"<path d="{}" stroke="steelblue" fill="none"/>"#, d.trim_end());
    }
    for (x, y) in &pts {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="black"/>"#, sx(*x), sy(*y));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Writes `<stem>.csv`, `<stem>.json` and `<stem>.svg` into `dir` for the
/// requested formats and returns the paths.
pub fn emit_report(report: &ConvergenceReport, formats: &[OutputFormat], dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    if report.points.is_empty() {
        return Err(Error::NoData);
    }
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    let mut formats = formats.to_vec();
    formats.sort();
    formats.dedup();
    let mut out = Vec::new();
    for f in formats {
        let (ext, text) = match f {
            OutputFormat::Csv => ("csv", sweep_csv(&report.points)?),
            OutputFormat::Json => ("json", summary_json(report)?),
            OutputFormat::Svg => ("svg", convergence_svg(report)?),
        };
        let path = dir.join(format!("{stem}.{ext}"));
        write_file(&path, &text)?;
        out.push(path);
    }
    Ok(out)
}
