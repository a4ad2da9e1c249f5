//! Minimal SVG line plots for energy and tail tables.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::output::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `E₁`, `E₂` against `t`, logarithmic in the energy.
    Energy,
    /// Post-transient tail supremum against `λ_{m+1}`, log-log.
    Tail,
}

impl PlotKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "energy" => Some(PlotKind::Energy),
            "tail" => Some(PlotKind::Tail),
            _ => None,
        }
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    clipped: usize,
}

#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            let pad = if log { 0.5 } else { lo.abs().max(1.0) * 0.05 };
            lo -= pad;
            hi += pad;
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil();
        }
        Self { lo, hi, log }
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let step = ((self.hi - self.lo) / 8.0).ceil().max(1.0);
            let mut out = Vec::new();
            let mut e = self.lo;
            while e <= self.hi + 1e-9 {
                out.push((10f64.powf(e), format!("1e{}", e as i64)));
                e += step;
            }
            out
        } else {
            (0..=5)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 5.0;
                    (v, format!("{v:.3}"))
                })
                .collect()
        }
    }
}

fn series(table: &Table, x: &str, y: &str, log_x: bool) -> Result<Series> {
    let xs = table.column(x)?;
    let ys = table.column(y)?;
    let mut points = Vec::new();
    let mut clipped = 0;
    for (&a, &b) in xs.iter().zip(&ys) {
        let ok_x = a.is_finite() && (!log_x || a > 0.0);
        if ok_x && b.is_finite() && b > 0.0 {
            points.push((a, b));
        } else {
            clipped += 1;
        }
    }
    Ok(Series {
        label: y.to_string(),
        points,
        clipped,
    })
}

fn render(series: &[Series], x_label: &str, log_x: bool, title: &str) -> String {
    let x_axis = Axis::fit(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), log_x);
    let y_axis = Axis::fit(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)), true);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |v: f64| LEFT + x_axis.unit(v) * pw;
    let py = |v: f64| TOP + (1.0 - y_axis.unit(v)) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{title}</text>"#, WIDTH / 2.0);
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (v, label) in x_axis.ticks() {
        let x = px(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{}" stroke="#ddd"/><text x="{x:.2}" y="{}" text-anchor="middle">{label}</text>"##,
            TOP + ph,
            TOP + ph + 16.0
        );
    }
    for (v, label) in y_axis.ticks() {
        let y = py(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{label}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0
    );

    let mut notes = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        match s.points.len() {
            0 => {}
            1 => {
                let (x, y) = s.points[0];
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#,
                    px(x),
                    py(y)
                );
            }
            _ => {
                let path: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    path.join(" ")
                );
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            LEFT + pw - 90.0,
            TOP + 16.0 + 14.0 * i as f64,
            s.label
        );
        if s.clipped > 0 {
            notes.push(format!("{}: {} non-positive value(s) not shown", s.label, s.clipped));
        }
    }
    for (i, note) in notes.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-style="italic">{note}</text>"#,
            LEFT + 8.0,
            TOP + ph - 8.0 - 14.0 * i as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// SVG text for a table of the given kind.
pub fn plot_svg(table: &Table, kind: PlotKind) -> Result<String> {
    let svg = match kind {
        PlotKind::Energy => {
            let s = vec![series(table, "t", "E1", false)?, series(table, "t", "E2", false)?];
            render(&s, "t", false, "energy")
        }
        PlotKind::Tail => {
            let s = vec![series(table, "lambda_next", "sup_tail", true)?];
            render(&s, "λ_{m+1}", true, "post-transient tail energy")
        }
    };
    Ok(svg)
}

pub fn plot_series(table: &Table, kind: PlotKind, out: &Path) -> Result<()> {
    if table.rows.is_empty() {
        return Err(Error::Csv("nothing to plot".into()));
    }
    std::fs::write(out, plot_svg(table, kind)?)?;
    Ok(())
}
