//! Result files: CSV tables, SVG line charts and the run manifest, each
//! written through a temporary file and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use dyn_nn_lab::table::Table;

use crate::config::Config;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.txt";

/// Which columns to chart.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub x: String,
    pub ys: Vec<String>,
}

impl PlotSpec {
    pub fn new(x: &str, ys: &[&str]) -> Self {
        Self { x: x.into(), ys: ys.iter().map(|s| s.to_string()).collect() }
    }
}

#[derive(Debug, Clone)]
pub struct Artifact {
    /// File stem: `<stem>.csv` and `plot_<stem>.svg`.
    pub stem: String,
    pub table: Table,
    pub plot: Option<PlotSpec>,
}

impl Artifact {
    pub fn new(stem: &str, table: Table) -> Self {
        Self { stem: stem.into(), table, plot: None }
    }

    pub fn plotted(mut self, plot: PlotSpec) -> Self {
        self.plot = Some(plot);
        self
    }
}

/// What an experiment produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    /// Short `name: value` lines for stdout and the manifest.
    pub summary: Vec<String>,
    /// Set when the run ended in a divergence verdict.
    pub divergence: Option<String>,
}

impl Outcome {
    pub fn push(&mut self, a: Artifact) {
        self.artifacts.push(a);
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let ctx = || format!("writing {}", path.display());
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(ctx(), e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(ctx(), e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(ctx(), e))?;
    tmp.persist(path).map_err(|e| CliError::io(ctx(), e.error))?;
    Ok(())
}

/// Writes every artifact and the manifest; returns the files written.
pub fn write_outputs(cfg: &Config, outcome: &Outcome, plot: bool) -> Result<Vec<PathBuf>, CliError> {
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let mut written = Vec::new();
    for a in &outcome.artifacts {
        let path = dir.join(format!("{}.csv", a.stem));
        write_atomic(&path, a.table.to_csv_string()?.as_bytes())?;
        written.push(path);
        if let (true, Some(spec)) = (plot, &a.plot) {
            let path = dir.join(format!("plot_{}.svg", a.stem));
            write_atomic(&path, svg_line_chart(&a.table, spec, &a.stem).as_bytes())?;
            written.push(path);
        }
    }
    let path = dir.join(MANIFEST);
    write_atomic(&path, manifest(cfg, outcome, &written).as_bytes())?;
    written.push(path);
    Ok(written)
}

pub fn manifest(cfg: &Config, outcome: &Outcome, files: &[PathBuf]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# dyn-nn-lab run manifest; re-run with `dyn-nn-lab run {MANIFEST}`");
    let _ = writeln!(s, "# versions: dyn-nn-lab {}, dyn-nn-lab-core {}", env!("CARGO_PKG_VERSION"), dyn_nn_lab::VERSION);
    let _ = writeln!(s, "# seed: {}", cfg.raw("seed"));
    for line in cfg.to_lines() {
        let _ = writeln!(s, "{line}");
    }
    for line in &outcome.summary {
        let _ = writeln!(s, "# result: {line}");
    }
    if let Some(d) = &outcome.divergence {
        let _ = writeln!(s, "# divergence: {d}");
    }
    let names: Vec<String> = files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect();
    let _ = writeln!(s, "# outputs: {}", names.join(" "));
    s
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.into() }
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Polyline chart with one series per `y` column; non-finite values break
/// the line.
pub fn svg_line_chart(table: &Table, spec: &PlotSpec, title: &str) -> String {
    let xs = table.column_f64(&spec.x).unwrap_or_default();
    let series: Vec<(String, Vec<f64>)> =
        spec.ys.iter().filter_map(|c| table.column_f64(c).map(|v| (c.clone(), v))).collect();
    let (x0, x1) = range(xs.iter().copied());
    let (y0, y1) = range(series.iter().flat_map(|(_, v)| v.iter().copied()));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, escape(title));
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            px(xv),
            TOP + ph + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            py(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(&spec.x)
    );
    for (k, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, s: &mut String| {
            if run.len() >= 2 {
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, run.join(" "));
            }
            run.clear();
        };
        for (&x, &y) in xs.iter().zip(ys) {
            if x.is_finite() && y.is_finite() {
                run.push(format!("{:.2},{:.2}", px(x), py(y)));
            } else {
                flush(&mut run, &mut s);
            }
        }
        flush(&mut run, &mut s);
        let ly = TOP + 14.0 + 14.0 * k as f64;
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#, WIDTH - RIGHT - 110.0, ly - 4.0, WIDTH - RIGHT - 95.0, ly - 4.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}" font-family="sans-serif" font-size="11">{}</text>"#, WIDTH - RIGHT - 90.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}
