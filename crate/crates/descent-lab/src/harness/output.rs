//! CSV, SVG and metadata emission.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::config::{Axis, ExperimentConfig};
use super::{RunMeta, RunRecord};
use crate::error::{Error, Result};

pub const RUN_CSV_HEADER: &str = "k,grad_evals,f_gap,grad_norm";

/// Gaps below this are drawn at this value on log axes.
pub const GAP_FLOOR: f64 = 1e-16;

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Rows of every record in order, each block starting again at `k = 0`.
pub fn render_csv(records: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let enc = |e: csv::Error| Error::Config(format!("csv encoding failed: {e}"));
    w.write_record(RUN_CSV_HEADER.split(',')).map_err(enc)?;
    for rec in records {
        for r in &rec.rows {
            w.write_record([
                r.k.to_string(),
                r.grad_evals.to_string(),
                format!("{:e}", r.f_gap),
                format!("{:e}", r.grad_norm),
            ])
            .map_err(enc)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn emit_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    write_file(path, render_csv(records)?.as_bytes())
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Log-gap line chart, one polyline per record.
pub fn render_svg(records: &[RunRecord], axis: Axis) -> Result<String> {
    if records.is_empty() {
        return Err(Error::arg("nothing to plot"));
    }
    let series: Vec<Vec<(f64, f64)>> = records
        .iter()
        .map(|rec| {
            rec.rows
                .iter()
                .filter(|r| r.f_gap.is_finite())
                .map(|r| {
                    let x = match axis {
                        Axis::Iterations => r.k as f64,
                        Axis::GradEvals => r.grad_evals as f64,
                    };
                    (x, r.f_gap.max(GAP_FLOOR).log10())
                })
                .collect()
        })
        .collect();
    let all = || series.iter().flatten();
    let x_max = all().map(|p| p.0).fold(0.0, f64::max).max(1.0);
    let y_min = all().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let y_max = all().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let (y_lo, y_hi) = if y_min.is_finite() {
        (y_min.floor(), y_max.ceil().max(y_min.floor() + 1.0))
    } else {
        (-16.0, 0.0)
    };
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + pw * x / x_max;
    let sy = |y: f64| TOP + ph * (y_hi - y) / (y_hi - y_lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let clamped: Vec<String> = records.iter().filter(|r| r.meta.gap_clamped).map(|r| escape(&r.meta.method)).collect();
    if !clamped.is_empty() {
        let _ = writeln!(s, "<desc>gaps below {GAP_FLOOR:e} drawn at the floor for: {}</desc>", clamped.join(", "));
    }
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let step = ((y_hi - y_lo) / 8.0).ceil().max(1.0);
    let mut e = y_lo;
    while e <= y_hi {
        let y = sy(e);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            e as i64
        );
        e += step;
    }
    for i in 0..=5 {
        let xv = x_max * i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(xv),
            TOP + ph + 18.0,
            xv.round() as i64
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0,
        axis.label()
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">f - f*</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (i, (rec, pts)) in records.iter().zip(&series).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !pts.is_empty() {
            let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                coords.join(" ")
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&rec.meta.method)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_svg_plot(records: &[RunRecord], axis: Axis, path: &Path) -> Result<()> {
    write_file(path, render_svg(records, axis)?.as_bytes())
}

#[derive(Serialize)]
struct Metadata<'a> {
    config: &'a ExperimentConfig,
    config_hash: String,
    /// Method blocks of the CSV, in order, with their row counts.
    runs: Vec<RunSummary<'a>>,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    rows: usize,
    #[serde(flatten)]
    meta: &'a RunMeta,
}

/// The configuration plus per-method metadata, describing the blocks of the CSV.
pub fn emit_metadata(config: &ExperimentConfig, records: &[RunRecord], path: &Path) -> Result<()> {
    let meta = Metadata {
        config,
        config_hash: config.hash(),
        runs: records
            .iter()
            .map(|r| RunSummary {
                rows: r.rows.len(),
                meta: &r.meta,
            })
            .collect(),
    };
    write_file(path, serde_json::to_string_pretty(&meta)?.as_bytes())
}
