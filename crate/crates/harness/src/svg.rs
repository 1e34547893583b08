//! Minimal deterministic SVG charts. Coordinates are printed with fixed precision,
//! so identical inputs give byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write;

use bfe_core::problems::LandscapeGrid;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 230.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Compact tick label.
fn label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 1e4 || v.abs() < 1e-2 {
        return format!("{v:.0e}");
    }
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Up to `n + 1` round tick positions covering `[lo, hi]`.
fn linear_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let raw = (hi - lo) / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

/// Maps data space onto the plot area.
#[derive(Clone, Copy)]
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    log_y: bool,
}

impl Frame {
    fn plot_w() -> f64 {
        WIDTH - LEFT - RIGHT
    }

    fn plot_h() -> f64 {
        HEIGHT - TOP - BOTTOM
    }

    fn fy(&self, v: f64) -> f64 {
        if self.log_y {
            v.log10()
        } else {
            v
        }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * Self::plot_w()
    }

    fn py(&self, y: f64) -> f64 {
        let (lo, hi) = (self.fy(self.y.0), self.fy(self.y.1));
        TOP + (1.0 - (self.fy(y) - lo) / (hi - lo)) * Self::plot_h()
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let d = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - d, hi + d)
    }
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + Frame::plot_w() / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{:.1}" height="{:.1}"/></clipPath>"#,
        Frame::plot_w(),
        Frame::plot_h()
    );
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1) = (LEFT, LEFT + Frame::plot_w());
    let (y0, y1) = (TOP, TOP + Frame::plot_h());
    let _ = writeln!(out, r#"<rect x="{x0}" y="{y0}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);
    for t in linear_ticks(frame.x.0, frame.x.1, 6) {
        let x = frame.px(t);
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{:.1}" stroke="black"/>"#, y1 + 5.0);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.1}" text-anchor="middle">{}</text>"#, y1 + 18.0, label(t));
    }
    let y_ticks: Vec<f64> = if frame.log_y {
        let (lo, hi) = (frame.y.0.log10().floor() as i32, frame.y.1.log10().ceil() as i32);
        let stride = ((hi - lo) / 8).max(1);
        (lo..=hi)
            .step_by(stride as usize)
            .map(|e| 10f64.powi(e))
            .filter(|v| *v >= frame.y.0 && *v <= frame.y.1)
            .collect()
    } else {
        linear_ticks(frame.y.0, frame.y.1, 6)
    };
    for t in y_ticks {
        let y = frame.py(t);
        let _ = writeln!(out, r#"<line x1="{:.1}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, y + 4.0, label(t));
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 18.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, names: &[&str]) {
    let x = WIDTH - RIGHT + 14.0;
    for (i, name) in names.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * i as f64;
        let _ = writeln!(out, r#"<line x1="{x}" y1="{y}" x2="{:.1}" y2="{y}" stroke="{}" stroke-width="2.5"/>"#, x + 22.0, color(i));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, x + 28.0, y + 4.0, escape(name));
    }
}

fn polyline(out: &mut String, frame: &Frame, points: impl Iterator<Item = (f64, f64)>, stroke: &str, width: f64) {
    let mut d = String::new();
    let mut last: Option<(f64, f64)> = None;
    let mut pending = None;
    for (x, y) in points {
        let p = (frame.px(x), frame.py(y));
        // points within half a pixel of the last one drawn add nothing visible
        if last.is_some_and(|l| (p.0 - l.0).hypot(p.1 - l.1) < 0.5) {
            pending = Some(p);
            continue;
        }
        let _ = write!(d, "{:.2},{:.2} ", p.0, p.1);
        last = Some(p);
        pending = None;
    }
    if let Some(p) = pending {
        let _ = write!(d, "{:.2},{:.2} ", p.0, p.1);
    }
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}" clip-path="url(#plot)"/>"#,
        d.trim_end()
    );
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Line chart of several series. With `log_y` non-positive values are dropped.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool) -> String {
    let keep = |&(x, y): &(f64, f64)| x.is_finite() && y.is_finite() && (!log_y || y > 0.0);
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied().filter(keep)).collect();
    let (xl, xh) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.0), h.max(p.0)));
    let (yl, yh) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.1), h.max(p.1)));
    let (x, mut y) = if all.is_empty() { ((0.0, 1.0), (0.1, 1.0)) } else { (padded(xl, xh), padded(yl, yh)) };
    if log_y {
        // pad by a fraction of a decade so curves do not hug the frame
        y = if y.0 > 0.0 { (y.0 / 1.5, y.1 * 1.5) } else { (y.1 / 10.0, y.1 * 1.5) };
    }
    let frame = Frame { x, y, log_y };
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &frame, x_label, y_label);
    // drawn last to first so the first series ends up on top
    for (i, s) in series.iter().enumerate().rev() {
        polyline(&mut out, &frame, s.points.iter().copied().filter(keep), color(i), 1.8);
    }
    legend(&mut out, &series.iter().map(|s| s.name.as_str()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Bar chart of counts per inner-loop value.
pub fn bar_chart(title: &str, bins: &BTreeMap<usize, usize>, mean: f64) -> String {
    let lo = *bins.keys().next().unwrap_or(&0) as f64 - 0.5;
    let hi = *bins.keys().last().unwrap_or(&0) as f64 + 0.5;
    let top = bins.values().copied().max().unwrap_or(1) as f64 * 1.05;
    let frame = Frame { x: (lo, hi), y: (0.0, top), log_y: false };
    let mut out = String::new();
    open(&mut out, title);
    let bar = 0.8 * Frame::plot_w() / (hi - lo);
    for (&k, &n) in bins {
        let x = frame.px(k as f64) - bar / 2.0;
        let y = frame.py(n as f64);
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{bar:.2}" height="{:.2}" fill="{}"/>"#,
            frame.py(0.0) - y,
            color(0)
        );
    }
    axes(&mut out, &frame, "inner loops per step", "count");
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">mean {mean:.3}</text>"#, WIDTH - RIGHT + 14.0, TOP + 10.0);
    out.push_str("</svg>\n");
    out
}

/// Dark blue → teal → yellow ramp for `t` in [0, 1].
fn ramp(t: f64) -> String {
    const STOPS: [(f64, [f64; 3]); 3] = [(0.0, [40.0, 30.0, 110.0]), (0.5, [40.0, 150.0, 140.0]), (1.0, [250.0, 230.0, 80.0])];
    let t = t.clamp(0.0, 1.0);
    let k = if t <= 0.5 { 0 } else { 1 };
    let (t0, c0) = STOPS[k];
    let (t1, c1) = STOPS[k + 1];
    let u = (t - t0) / (t1 - t0);
    let c: Vec<u8> = (0..3).map(|i| (c0[i] + u * (c1[i] - c0[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Contour line segments of `grid` at `level`, in data coordinates.
pub fn contour_segments(grid: &LandscapeGrid, level: f64) -> Vec<[(f64, f64); 2]> {
    let mut segments = Vec::new();
    let (nx, ny) = (grid.xs.len(), grid.ys.len());
    let lerp = |a: (f64, f64, f64), b: (f64, f64, f64)| {
        let t = (level - a.2) / (b.2 - a.2);
        (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
    };
    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            // corners counter-clockwise from bottom-left
            let c = [
                (grid.xs[ix], grid.ys[iy], grid.at(ix, iy)),
                (grid.xs[ix + 1], grid.ys[iy], grid.at(ix + 1, iy)),
                (grid.xs[ix + 1], grid.ys[iy + 1], grid.at(ix + 1, iy + 1)),
                (grid.xs[ix], grid.ys[iy + 1], grid.at(ix, iy + 1)),
            ];
            let above: Vec<bool> = c.iter().map(|p| p.2 >= level).collect();
            // crossing points on each edge (bottom, right, top, left)
            let crossings: Vec<(usize, (f64, f64))> = (0..4)
                .filter(|&e| above[e] != above[(e + 1) % 4])
                .map(|e| (e, lerp(c[e], c[(e + 1) % 4])))
                .collect();
            match crossings.len() {
                2 => segments.push([crossings[0].1, crossings[1].1]),
                4 => {
                    // saddle: split by the cell-centre value
                    let centre = c.iter().map(|p| p.2).sum::<f64>() / 4.0;
                    if (centre >= level) == above[0] {
                        segments.push([crossings[0].1, crossings[1].1]);
                        segments.push([crossings[2].1, crossings[3].1]);
                    } else {
                        segments.push([crossings[0].1, crossings[3].1]);
                        segments.push([crossings[1].1, crossings[2].1]);
                    }
                }
                _ => {}
            }
        }
    }
    segments
}

pub struct Trajectory {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Heat map of the loss grid with `levels` contour lines and the trajectories overlaid.
pub fn contour_plot(title: &str, grid: &LandscapeGrid, levels: usize, trajectories: &[Trajectory]) -> String {
    let (nx, ny) = (grid.xs.len(), grid.ys.len());
    let frame = Frame {
        x: (grid.xs[0], grid.xs[nx - 1]),
        y: (grid.ys[0], grid.ys[ny - 1]),
        log_y: false,
    };
    let lo = grid.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let mut out = String::new();
    open(&mut out, title);
    let _ = writeln!(out, r#"<g clip-path="url(#plot)">"#);
    let _ = writeln!(out, r#"<g shape-rendering="crispEdges">"#);
    // one cell per lattice point, centred on it
    let half = |v: &[f64], i: usize| {
        let l = if i == 0 { v[0] } else { (v[i - 1] + v[i]) / 2.0 };
        let h = if i + 1 == v.len() { v[i] } else { (v[i] + v[i + 1]) / 2.0 };
        (l, h)
    };
    for iy in 0..ny {
        let (y0, y1) = half(&grid.ys, iy);
        for ix in 0..nx {
            let (x0, x1) = half(&grid.xs, ix);
            let t = ((grid.at(ix, iy) - lo) / span).sqrt();
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                frame.px(x0),
                frame.py(y1),
                frame.px(x1) - frame.px(x0),
                frame.py(y0) - frame.py(y1),
                ramp(t)
            );
        }
    }
    out.push_str("</g>\n");
    for k in 1..=levels {
        // quadratic spacing gives evenly spaced rings on a bowl
        let level = lo + span * (k as f64 / (levels + 1) as f64).powi(2);
        let mut d = String::new();
        for [a, b] in contour_segments(grid, level) {
            let _ = write!(d, "M{:.2} {:.2}L{:.2} {:.2}", frame.px(a.0), frame.py(a.1), frame.px(b.0), frame.py(b.1));
        }
        if !d.is_empty() {
            let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="white" stroke-opacity="0.6" stroke-width="0.8"/>"#);
        }
    }
    for (i, t) in trajectories.iter().enumerate().rev() {
        polyline(&mut out, &frame, t.points.iter().copied(), color(i), 1.6);
    }
    if let Some(&(x, y)) = trajectories.first().and_then(|t| t.points.first()) {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="black"/>"#, frame.px(x), frame.py(y));
    }
    out.push_str("</g>\n");
    axes(&mut out, &frame, "θ₁", "θ₂");
    legend(&mut out, &trajectories.iter().map(|t| t.name.as_str()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}
