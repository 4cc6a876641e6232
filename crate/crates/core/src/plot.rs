//! Deterministic SVG renderings of a log: the trajectory map and the
//! speed-versus-time chart.

use std::fmt::Write;
use std::str::FromStr;

use crate::error::Error;
use crate::metrics::robot_speed;
use crate::sim::SimLog;
use crate::types::ScenarioSpec;

const SIZE: f64 = 640.0;
const MARGIN: f64 = 48.0;
/// Polylines are decimated to at most this many points.
const MAX_POINTS: usize = 1500;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Traj,
    Speed,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "traj" => Ok(PlotKind::Traj),
            "speed" => Ok(PlotKind::Speed),
            other => Err(Error::Usage(format!(
                "unknown plot kind `{other}` (traj|speed)"
            ))),
        }
    }
}

pub fn render(kind: PlotKind, log: &SimLog, spec: &ScenarioSpec) -> String {
    match kind {
        PlotKind::Traj => trajectory_svg(log, spec),
        PlotKind::Speed => speed_svg(log, spec),
    }
}

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn stride(len: usize) -> usize {
    len.div_ceil(MAX_POINTS).max(1)
}

/// Indices kept after decimation; the last sample is always kept.
fn sample_indices(len: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).step_by(stride(len)).collect();
    if len > 0 && idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#,
        SIZE / 2.0
    );
}

/// Affine map from data coordinates to the plot area (y up).
struct Frame {
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
}

impl Frame {
    fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        let w = (xmax - xmin).max(1e-9);
        let h = (ymax - ymin).max(1e-9);
        let span = SIZE - 2.0 * MARGIN;
        Frame {
            x0: xmin,
            y0: ymin,
            sx: span / w,
            sy: span / h,
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) * self.sx
    }

    fn py(&self, y: f64) -> f64 {
        SIZE - MARGIN - (y - self.y0) * self.sy
    }
}

fn polyline(out: &mut String, pts: impl Iterator<Item = (f64, f64)>, stroke: &str, extra: &str) {
    let mut d = String::new();
    for (k, (x, y)) in pts.enumerate() {
        if k > 0 {
            d.push(' ');
        }
        let _ = write!(d, "{x:.2},{y:.2}");
    }
    let _ = writeln!(
        out,
        r#"<polyline points="{d}" fill="none" stroke="{stroke}" stroke-width="1.5"{extra}/>"#
    );
}

fn axes(out: &mut String, f: &Frame, xr: (f64, f64), yr: (f64, f64), xlabel: &str, ylabel: &str) {
    let (l, r) = (f.px(xr.0), f.px(xr.1));
    let (b, t) = (f.py(yr.0), f.py(yr.1));
    let _ = writeln!(
        out,
        r##"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
        r - l,
        b - t
    );
    for k in 0..=4 {
        let fx = xr.0 + (xr.1 - xr.0) * k as f64 / 4.0;
        let fy = yr.0 + (yr.1 - yr.0) * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{fx:.2}</text>"#,
            f.px(fx),
            b + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{fy:.2}</text>"#,
            l - 4.0,
            f.py(fy) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text>"#,
        (l + r) / 2.0,
        SIZE - 8.0
    );
    let _ = writeln!(
        out,
        r#"<text x="12" y="{:.2}" text-anchor="middle" transform="rotate(-90 12 {:.2})">{ylabel}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0
    );
}

pub fn trajectory_svg(log: &SimLog, spec: &ScenarioSpec) -> String {
    let n = log.robot_count();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in &log.steps {
        for r in &s.robots {
            xs.push(r.pose.x);
            ys.push(r.pose.y);
        }
        for (o, p) in spec.obstacles.iter().zip(&s.obstacles) {
            xs.extend([p[0] - o.radius, p[0] + o.radius]);
            ys.extend([p[1] - o.radius, p[1] + o.radius]);
        }
    }
    let pad = spec
        .robots
        .iter()
        .map(|r| r.params.body_radius)
        .fold(0.5, f64::max);
    let (mut xmin, mut xmax) = min_max(&xs);
    let (mut ymin, mut ymax) = min_max(&ys);
    xmin -= pad;
    xmax += pad;
    ymin -= pad;
    ymax += pad;
    // equal aspect ratio
    let half = (xmax - xmin).max(ymax - ymin) / 2.0;
    let (cx, cy) = ((xmin + xmax) / 2.0, (ymin + ymax) / 2.0);
    let xr = (cx - half, cx + half);
    let yr = (cy - half, cy + half);
    let f = Frame::new(xr.0, xr.1, yr.0, yr.1);

    let mut out = String::new();
    header(&mut out, "trajectories");
    axes(&mut out, &f, xr, yr, "x [m]", "y [m]");
    let idx = sample_indices(log.steps.len());
    for (k, o) in spec.obstacles.iter().enumerate() {
        if o.velocity != [0.0, 0.0] {
            polyline(
                &mut out,
                idx.iter().map(|&s| {
                    let p = log.steps[s].obstacles[k];
                    (f.px(p[0]), f.py(p[1]))
                }),
                "#999",
                r#" stroke-dasharray="4 3""#,
            );
        }
        if let Some(last) = log.steps.last() {
            let p = last.obstacles[k];
            let _ = writeln!(
                out,
                r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#888" fill-opacity="0.45" stroke="#555"/>"##,
                f.px(p[0]),
                f.py(p[1]),
                o.radius * f.sx
            );
        }
    }
    for i in 0..n {
        polyline(
            &mut out,
            idx.iter().map(|&s| {
                let p = log.steps[s].robots[i].pose;
                (f.px(p.x), f.py(p.y))
            }),
            color(i),
            "",
        );
        if let Some(last) = log.steps.last() {
            let p = last.robots[i].pose;
            let (cx, cy) = (f.px(p.x), f.py(p.y));
            let rad = spec.robots[i].params.body_radius * f.sx;
            let _ = writeln!(
                out,
                r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{rad:.2}" fill="{}" fill-opacity="0.25" stroke="{}"/>"#,
                color(i),
                color(i)
            );
            let (s, c) = p.theta.sin_cos();
            let _ = writeln!(
                out,
                r#"<line x1="{cx:.2}" y1="{cy:.2}" x2="{:.2}" y2="{:.2}" stroke="{}"/>"#,
                cx + rad * c,
                cy - rad * s,
                color(i)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn speed_svg(log: &SimLog, spec: &ScenarioSpec) -> String {
    let n = log.robot_count();
    let speeds: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            log.steps
                .iter()
                .map(|s| robot_speed(&s.robots[i], &spec.robots[i].params))
                .collect()
        })
        .collect();
    let t_end = log.steps.last().map_or(0.0, |s| s.t).max(log.dt);
    let vmax = speeds.iter().flatten().copied().fold(0.0, f64::max);
    let vmax = if vmax > 0.0 { vmax * 1.1 } else { 1.0 };
    let xr = (0.0, t_end);
    let yr = (0.0, vmax);
    let f = Frame::new(xr.0, xr.1, yr.0, yr.1);

    let mut out = String::new();
    header(&mut out, "speed");
    axes(&mut out, &f, xr, yr, "t [s]", "speed [m/s]");
    let idx = sample_indices(log.steps.len());
    for (i, v) in speeds.iter().enumerate() {
        polyline(
            &mut out,
            idx.iter().map(|&k| (f.px(log.steps[k].t), f.py(v[k]))),
            color(i),
            "",
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" fill="{}">robot {i}</text>"#,
            SIZE - MARGIN + 4.0,
            MARGIN + 12.0 * i as f64,
            color(i)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn min_max(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() {
        (lo, hi)
    } else {
        (-1.0, 1.0)
    }
}
