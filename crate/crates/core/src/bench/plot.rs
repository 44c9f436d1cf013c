//! Minimal SVG charts: grouped bars per category and path overlays.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{BenchError, SuiteReport, TrajectoryReport};

const PALETTE: [&str; 6] = ["#b0213f", "#7f7f7f", "#2f6db3", "#3a9a5b", "#c77c11", "#6b4c9a"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Canvas {
    body: String,
    width: f64,
    height: f64,
}

impl Canvas {
    fn new(width: f64, height: f64) -> Self {
        Self { body: String::new(), width, height }
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="{size}" text-anchor="{anchor}" font-family="sans-serif">{}</text>"#,
            esc(s)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(self.body, r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="1"/>"#);
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#);
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, dashed: bool) {
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let dash = if dashed { r#" stroke-dasharray="4 3""# } else { "" };
        let _ = writeln!(self.body, r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"{dash}/>"#, coords.join(" "));
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

/// Draws one bar panel with axes; `values[series][group]`.
fn bar_panel(
    c: &mut Canvas,
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    title: &str,
    groups: &[String],
    series: &[&str],
    values: &[Vec<Option<f64>>],
) {
    let max = values.iter().flatten().flatten().copied().fold(0.0, f64::max);
    let top = if max > 0.0 { nice_ceil(max) } else { 1.0 };
    let (left, bottom) = (x0 + 40.0, y0 + h - 30.0);
    let plot_h = h - 60.0;
    let plot_w = w - 50.0;
    c.text(x0 + w / 2.0, y0 + 16.0, 12.0, "middle", title);
    c.line(left, bottom, left + plot_w, bottom, "black");
    c.line(left, bottom, left, bottom - plot_h, "black");
    for k in 0..=4 {
        let v = top * k as f64 / 4.0;
        let y = bottom - plot_h * k as f64 / 4.0;
        c.line(left - 3.0, y, left, y, "black");
        c.text(left - 5.0, y + 3.0, 9.0, "end", &format_tick(v));
    }
    let n = groups.len().max(1) as f64;
    let slot = plot_w / n;
    let bar = slot * 0.8 / series.len().max(1) as f64;
    for (g, label) in groups.iter().enumerate() {
        let gx = left + slot * g as f64 + slot * 0.1;
        for (s, vals) in values.iter().enumerate() {
            if let Some(v) = vals.get(g).copied().flatten() {
                let bh = plot_h * v / top;
                c.rect(gx + bar * s as f64, bottom - bh, bar * 0.95, bh, PALETTE[s % PALETTE.len()]);
            }
        }
        c.text(left + slot * (g as f64 + 0.5), bottom + 14.0, 9.0, "middle", label);
    }
}

fn legend(c: &mut Canvas, x: f64, y: f64, series: &[&str]) {
    for (s, name) in series.iter().enumerate() {
        let yy = y + 14.0 * s as f64;
        c.rect(x, yy - 8.0, 10.0, 10.0, PALETTE[s % PALETTE.len()]);
        c.text(x + 14.0, yy, 10.0, "start", name);
    }
}

fn nice_ceil(v: f64) -> f64 {
    let mag = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * mag).find(|&x| x >= v).unwrap_or(10.0 * mag)
}

fn format_tick(v: f64) -> String {
    if v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn threshold_label(t: &crate::tasks::Thresholds) -> String {
    match t.orientation {
        Some(o) => format!("{:.0} mm + {:.0} deg", 1000.0 * t.position, o.to_degrees()),
        None if t.position >= 0.01 => format!("{:.0} cm", 100.0 * t.position),
        None => format!("{:.0} mm", 1000.0 * t.position),
    }
}

/// Median steps per category, one panel per threshold, one bar per report.
pub fn steps_chart(reports: &[(&str, &SuiteReport)]) -> String {
    let thresholds = reports.first().map(|(_, r)| r.thresholds.clone()).unwrap_or_default();
    let panels = thresholds.len().max(1);
    let (pw, ph) = (320.0, 260.0);
    let mut c = Canvas::new(pw * panels as f64, ph + 20.0 + 14.0 * reports.len() as f64);
    let groups: Vec<String> = reports.first().map(|(_, r)| (1..=r.categories.len()).map(|i| i.to_string()).collect()).unwrap_or_default();
    let names: Vec<&str> = reports.iter().map(|(n, _)| *n).collect();
    if thresholds.is_empty() {
        bar_panel(&mut c, 0.0, 0.0, pw, ph, "median steps", &groups, &names, &[]);
    }
    for (k, t) in thresholds.iter().enumerate() {
        let values: Vec<Vec<Option<f64>>> =
            reports.iter().map(|(_, r)| r.categories.iter().map(|cat| cat.thresholds[k].median_steps).collect()).collect();
        bar_panel(&mut c, pw * k as f64, 0.0, pw, ph, &format!("median steps to {}", threshold_label(t)), &groups, &names, &values);
    }
    legend(&mut c, 50.0, ph + 14.0, &names);
    c.finish()
}

/// Median robot travel per category, one bar per report.
pub fn travel_chart(reports: &[(&str, &SuiteReport)]) -> String {
    let (pw, ph) = (420.0, 260.0);
    let mut c = Canvas::new(pw, ph + 20.0 + 14.0 * reports.len() as f64);
    let groups: Vec<String> = reports.first().map(|(_, r)| (1..=r.categories.len()).map(|i| i.to_string()).collect()).unwrap_or_default();
    let names: Vec<&str> = reports.iter().map(|(n, _)| *n).collect();
    let values: Vec<Vec<Option<f64>>> =
        reports.iter().map(|(_, r)| r.categories.iter().map(|cat| Some(cat.travel_median)).collect()).collect();
    bar_panel(&mut c, 0.0, 0.0, pw, ph, "median robot travel (m)", &groups, &names, &values);
    legend(&mut c, 50.0, ph + 14.0, &names);
    c.finish()
}

/// Realized object paths (solid) over the desired paths (dashed).
pub fn trajectory_chart(report: &TrajectoryReport) -> String {
    let size = 260.0;
    let cols = 3;
    let n = report.results.len();
    let rows = n.div_ceil(cols).max(1);
    let mut c = Canvas::new(size * cols as f64, size * rows as f64);
    for (i, r) in report.results.iter().enumerate() {
        let (ox, oy) = (size * (i % cols) as f64, size * (i / cols) as f64);
        let pts = r.waypoints.iter().chain(&r.path);
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in pts.chain(std::iter::once(&[0.0, 0.0])) {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-3);
        let scale = (size - 50.0) / span;
        let map = |p: &[f64; 2]| (ox + 25.0 + (p[0] - lo[0]) * scale, oy + size - 25.0 - (p[1] - lo[1]) * scale);
        let mut desired = vec![map(&[0.0, 0.0])];
        desired.extend(r.waypoints.iter().map(map));
        c.polyline(&desired, PALETTE[1], true);
        c.polyline(&r.path.iter().map(map).collect::<Vec<_>>(), PALETTE[0], false);
        c.text(
            ox + size / 2.0,
            oy + 14.0,
            11.0,
            "middle",
            &format!("{} w={} err {:.1} mm", r.shape.label(), r.w_theta, 1000.0 * r.mean_path_error),
        );
    }
    c.finish()
}

/// Writes the step and travel charts for `report` into `out_dir`.
pub fn emit_plots(report: &SuiteReport, out_dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    std::fs::create_dir_all(out_dir)?;
    let steps = out_dir.join(format!("{}-steps.svg", report.name));
    let travel = out_dir.join(format!("{}-travel.svg", report.name));
    std::fs::write(&steps, steps_chart(&[(&report.name, report)]))?;
    std::fs::write(&travel, travel_chart(&[(&report.name, report)]))?;
    Ok(vec![steps, travel])
}

pub fn emit_trajectory_plots(report: &TrajectoryReport, out_dir: &Path) -> Result<PathBuf, BenchError> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("trajectories.svg");
    std::fs::write(&path, trajectory_chart(report))?;
    Ok(path)
}
