//! SVG line charts of a campaign summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::SummaryRow;
use crate::error::{Error, Result};

/// Parameters that can serve as the x axis.
pub const AXES: [&str; 6] = ["r", "m", "n", "p_s", "alpha_a", "snr_db"];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotFiles {
    pub svg: PathBuf,
    pub csv: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
struct PlotPoint {
    series: String,
    algorithm_id: String,
    metric: String,
    x: f64,
    mean: f64,
    sem: f64,
    count: usize,
}

struct Series {
    label: String,
    points: Vec<PlotPoint>,
}

/// Label of the cell coordinates other than `axis`, to tell apart series of
/// the same algorithm.
fn context(row: &SummaryRow, axis: &str) -> String {
    AXES.iter()
        .filter(|a| **a != axis)
        .map(|a| format!("{a}={}", row.axis_value(a).unwrap_or(f64::NAN)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn group(summary: &[SummaryRow], axis: &str) -> Vec<Series> {
    let mut keyed: Vec<((String, String), Series)> = Vec::new();
    for row in summary {
        let x = row.axis_value(axis).unwrap_or(f64::NAN);
        if !x.is_finite() || !row.mean.is_finite() {
            continue;
        }
        let key = (row.algorithm_id.clone(), context(row, axis));
        let idx = match keyed.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                keyed.push((
                    key.clone(),
                    Series {
                        label: row.algorithm_id.clone(),
                        points: Vec::new(),
                    },
                ));
                keyed.len() - 1
            }
        };
        keyed[idx].1.points.push(PlotPoint {
            series: String::new(),
            algorithm_id: row.algorithm_id.clone(),
            metric: row.metric.clone(),
            x,
            mean: row.mean,
            sem: if row.sem.is_finite() { row.sem } else { 0.0 },
            count: row.count,
        });
    }
    // Only spell out the context when one algorithm has several series.
    let ambiguous = |alg: &str| keyed.iter().filter(|((a, _), _)| a == alg).count() > 1;
    let labels: Vec<String> = keyed
        .iter()
        .map(|((alg, ctx), _)| if ambiguous(alg) { format!("{alg} ({ctx})") } else { alg.clone() })
        .collect();
    keyed
        .into_iter()
        .zip(labels)
        .map(|((_, mut s), label)| {
            s.points.sort_by(|a, b| a.x.total_cmp(&b.x));
            for p in &mut s.points {
                p.series = label.clone();
            }
            s.label = label;
            s
        })
        .collect()
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn render(series: &[Series], axis: &str, metric: &str) -> String {
    let points = series.iter().flat_map(|s| s.points.iter());
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x_lo = x_lo.min(p.x);
        x_hi = x_hi.max(p.x);
        y_lo = y_lo.min(p.mean - p.sem);
        y_hi = y_hi.max(p.mean + p.sem);
    }
    let (x_lo, x_hi) = span(x_lo, x_hi);
    let (y_lo, y_hi) = span(y_lo, y_hi);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, "<!-- x_axis={axis} metric={metric} -->");
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##
    );
    for i in 0..=4 {
        let fx = x_lo + (x_hi - x_lo) * i as f64 / 4.0;
        let fy = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(fx),
            HEIGHT - BOTTOM + 18.0,
            tick_label(fx)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            py(fy) + 4.0,
            tick_label(fy)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##,
            LEFT + plot_w,
            y = py(fy)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(axis)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(metric)
    );

    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        for p in &s.points {
            let _ = writeln!(
                svg,
                "<!-- data series=\"{}\" x={} mean={} sem={} count={} -->",
                escape(&s.label),
                p.x,
                p.mean,
                p.sem,
                p.count
            );
        }
        let vertices: Vec<String> = s.points.iter().map(|p| format!("{:.2},{:.2}", px(p.x), py(p.mean))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            vertices.join(" ")
        );
        for p in &s.points {
            if p.sem > 0.0 {
                let _ = writeln!(
                    svg,
                    r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#,
                    py(p.mean - p.sem),
                    py(p.mean + p.sem),
                    x = px(p.x)
                );
            }
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                px(p.x),
                py(p.mean)
            );
        }
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes an SVG chart of `summary` against `x_axis` to `out`, one line per
/// algorithm with standard-error bars, plus the plotted points as CSV next
/// to it (`out` with a `.csv` extension).
pub fn emit_plot(summary: &[SummaryRow], x_axis: &str, out: &Path) -> Result<PlotFiles> {
    if !AXES.contains(&x_axis) {
        return Err(Error::UnknownAxis(x_axis.to_string()));
    }
    if summary.is_empty() {
        return Err(Error::EmptyInput);
    }
    let series = group(summary, x_axis);
    if series.is_empty() {
        return Err(Error::InvalidConfig(format!("no finite points to plot against `{x_axis}`")));
    }
    let metric = summary[0].metric.as_str();
    let svg = render(&series, x_axis, metric);

    let mut w = csv::Writer::from_writer(Vec::new());
    for p in series.iter().flat_map(|s| s.points.iter()) {
        w.serialize(p)?;
    }
    let table = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;

    let csv_path = out.with_extension("csv");
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(out, svg)?;
    fs::write(&csv_path, table)?;
    Ok(PlotFiles {
        svg: out.to_path_buf(),
        csv: csv_path,
    })
}
