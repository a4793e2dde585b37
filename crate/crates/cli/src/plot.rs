//! Self-contained SVG line charts of seed-averaged training curves.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::metrics::{read_metrics, MetricsRow};

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Loss,
    EmaLoss,
    ThetaNorm,
}

impl Metric {
    fn name(self) -> &'static str {
        match self {
            Metric::Loss => "loss",
            Metric::EmaLoss => "ema_loss",
            Metric::ThetaNorm => "theta_norm",
        }
    }

    fn get(self, r: &MetricsRow) -> f64 {
        match self {
            Metric::Loss => r.loss,
            Metric::EmaLoss => r.ema_loss,
            Metric::ThetaNorm => r.theta_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Pointwise mean over seeds. Every seed must report the same steps.
pub fn seed_mean(runs: &[Vec<MetricsRow>], metric: Metric) -> Result<Vec<(f64, f64)>, PlotError> {
    let Some(first) = runs.first() else {
        return Err(PlotError::SchemaMismatch("no seeds to average".into()));
    };
    for run in runs {
        if run.len() != first.len() || run.iter().zip(first).any(|(a, b)| a.step != b.step) {
            return Err(PlotError::SchemaMismatch("seeds report different steps".into()));
        }
    }
    let k = runs.len() as f64;
    Ok((0..first.len())
        .map(|i| (first[i].step as f64, runs.iter().map(|r| metric.get(&r[i])).sum::<f64>() / k))
        .collect())
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub fn render_svg(title: &str, series: &[Series], log_y: bool) -> String {
    let fy = |y: f64| if log_y { y.max(1e-300).log10() } else { y };
    let all = series.iter().flat_map(|s| s.points.iter().copied());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all.filter(|(_, y)| y.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(fy(y));
        y1 = y1.max(fy(y));
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (fy(y) - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    let ylab = |v: f64| if log_y { format!("1e{v:.1}") } else { format!("{v:.3e}") };
    for (v, y) in [(y0, H - PAD), (y1, PAD)] {
        let _ = writeln!(svg, r#"<text x="{}" y="{y}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#, PAD - 4.0, ylab(v));
    }
    for (v, x) in [(x0, PAD), (x1, W - PAD)] {
        let _ = writeln!(svg, r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{v}</text>"#, H - PAD + 16.0);
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(_, y)| y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            W - PAD - 120.0,
            PAD + 16.0 * (i as f64 + 1.0),
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `loss.svg` (log scale, EMA loss) and `theta_norm.svg` for one group of seed
/// CSVs, returning the written paths.
pub fn emit_plots(csvs: &[PathBuf], label: &str, out_dir: &Path) -> Result<Vec<PathBuf>, PlotError> {
    if csvs.is_empty() {
        return Err(PlotError::SchemaMismatch("empty seed set".into()));
    }
    let runs = csvs
        .iter()
        .map(|p| {
            let f = std::fs::File::open(p).map_err(|source| PlotError::Io { path: p.display().to_string(), source })?;
            read_metrics(f).map_err(|e| PlotError::SchemaMismatch(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut written = Vec::new();
    for (metric, log_y) in [(Metric::EmaLoss, true), (Metric::ThetaNorm, false)] {
        let series = Series { label: label.to_string(), points: seed_mean(&runs, metric)? };
        let name = if metric == Metric::EmaLoss { "loss.svg" } else { "theta_norm.svg" };
        let path = out_dir.join(name);
        let title = format!("{} ({} seeds)", metric.name(), runs.len());
        std::fs::write(&path, render_svg(&title, &[series], log_y))
            .map_err(|source| PlotError::Io { path: path.display().to_string(), source })?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(step: u64, loss: f64, seed: u64) -> MetricsRow {
        MetricsRow { step, loss, ema_loss: loss, theta_norm: 1.0 + loss, grad_norm: 0.0, seed }
    }

    #[test]
    fn empty_seed_set() {
        assert!(matches!(seed_mean(&[], Metric::Loss), Err(PlotError::SchemaMismatch(_))));
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_plots(&[], "x", dir.path()), Err(PlotError::SchemaMismatch(_))));
    }

    #[test]
    fn one_vertex_per_row() {
        let run: Vec<MetricsRow> = (0..7).map(|k| row(k, 1.0 / (k + 1) as f64, 0)).collect();
        let pts = seed_mean(&[run], Metric::Loss).unwrap();
        let svg = render_svg("t", &[Series { label: "a".into(), points: pts }], true);
        let poly = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let attr = poly.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
        assert_eq!(attr.split(' ').count(), 7);
    }

    #[test]
    fn two_seeds_average_pointwise() {
        let a: Vec<MetricsRow> = (0..5).map(|k| row(k, k as f64, 0)).collect();
        let b: Vec<MetricsRow> = (0..5).map(|k| row(k, 10.0 * k as f64, 1)).collect();
        let m = seed_mean(&[a, b], Metric::Loss).unwrap();
        for k in [0usize, 2, 4] {
            assert_eq!(m[k], (k as f64, 5.5 * k as f64));
        }
    }

    #[test]
    fn mismatched_steps() {
        let a: Vec<MetricsRow> = (0..5).map(|k| row(k, 1.0, 0)).collect();
        let b: Vec<MetricsRow> = (0..4).map(|k| row(k, 1.0, 1)).collect();
        assert!(seed_mean(&[a, b], Metric::Loss).is_err());
    }
}
