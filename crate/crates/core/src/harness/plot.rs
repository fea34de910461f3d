//! Minimal SVG line charts of pH against time.

use std::fmt::Write as _;
use std::path::Path;

use super::schedule::SetpointSchedule;
use super::trace::SimTrace;
use crate::error::{Error, Result};

const W: f64 = 900.0;
const H: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 3000;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Axis limits: `[0, duration]` by `[min - 0.5, max + 0.5]` of everything
/// drawn (setpoint included).
pub fn plot_bounds(series: &[(&str, &SimTrace)], schedule: &SetpointSchedule) -> ((f64, f64), (f64, f64)) {
    let duration = series.iter().map(|(_, t)| t.t_end()).fold(0.0, f64::max);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, tr) in series {
        for r in &tr.rows {
            lo = lo.min(r.ph).min(schedule.value(r.t));
            hi = hi.max(r.ph).max(schedule.value(r.t));
        }
    }
    if !lo.is_finite() {
        (lo, hi) = schedule.range();
    }
    ((0.0, duration.max(f64::MIN_POSITIVE)), (lo - 0.5, hi + 0.5))
}

/// Round tick spacing giving roughly `target` intervals.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag)
}

fn ticks(lo: f64, hi: f64, step: f64) -> impl Iterator<Item = f64> {
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(move |k| k as f64 * step)
}

fn label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    format!("{v:.decimals$}")
}

fn polyline(pts: impl Iterator<Item = (f64, f64)>, color: &str, extra: &str) -> String {
    let mut s = format!(r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{extra} points=""#);
    for (x, y) in pts {
        let _ = write!(s, "{x:.2},{y:.2} ");
    }
    s.push_str("\"/>\n");
    s
}

/// SVG text for one or more measured traces over the setpoint.
pub fn render_svg(series: &[(&str, &SimTrace)], schedule: &SetpointSchedule) -> String {
    let ((x0, x1), (y0, y1)) = plot_bounds(series, schedule);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |t: f64| LEFT + (t - x0) / (x1 - x0) * pw;
    let sy = |v: f64| TOP + (y1 - v) / (y1 - y0) * ph;

    let mut s = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>
"#
    );

    let xs = tick_step(x1 - x0, 8.0);
    for t in ticks(x0, x1, xs) {
        let x = sx(t);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#ddd"/>"##, TOP, TOP + ph);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 16.0, label(t, xs));
    }
    let ys = tick_step(y1 - y0, 6.0);
    for v in ticks(y0, y1, ys) {
        let y = sy(v);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, label(v, ys));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">time (s)</text>"#, LEFT + pw / 2.0, H - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">pH</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    // Setpoint drawn as exact steps from the schedule's segments.
    let mut sp = Vec::new();
    for seg in schedule.segments(x1) {
        sp.push((sx(seg.t_start), sy(seg.value)));
        sp.push((sx(seg.t_end), sy(seg.value)));
    }
    s.push_str(&polyline(sp.into_iter(), "#555", r#" stroke-dasharray="6 4" class="setpoint""#));

    for (i, (_, tr)) in series.iter().enumerate() {
        let stride = tr.len().div_ceil(MAX_POINTS).max(1);
        let pts = tr.rows.iter().step_by(stride).map(|r| (sx(r.t), sy(r.ph)));
        s.push_str(&polyline(pts, COLORS[i % COLORS.len()], r#" class="measurement""#));
    }

    let mut ly = TOP + 14.0;
    let legend: Vec<(&str, &str)> = std::iter::once(("setpoint", "#555"))
        .chain(series.iter().enumerate().map(|(i, (l, _))| (*l, COLORS[i % COLORS.len()])))
        .collect();
    for (label, color) in legend {
        let lx = LEFT + pw - 150.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 24.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 30.0, ly + 4.0, escape(label));
        ly += 16.0;
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn plot(trace: &SimTrace, schedule: &SetpointSchedule, path: impl AsRef<Path>) -> Result<()> {
    plot_comparison(&[("pH", trace)], schedule, path)
}

/// Overlays several measured traces on one chart.
pub fn plot_comparison(
    series: &[(&str, &SimTrace)],
    schedule: &SetpointSchedule,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_svg(series, schedule)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::super::trace::TraceRow;
    use super::*;

    fn ramp(n: usize, slope: f64) -> SimTrace {
        SimTrace {
            rows: (0..n)
                .map(|k| {
                    let t = k as f64 * 0.5;
                    TraceRow {
                        t,
                        ph_sp: 7.0,
                        ph: 7.0 + slope * t,
                        f1_cmd: 0.0,
                        f2_cmd: 0.0,
                        f1: 0.0,
                        f2: 0.0,
                        alpha: 0.0,
                        beta: 0.0,
                        delta: 0.0,
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn bounds_follow_convention() {
        let s = SetpointSchedule::constant(7.0);
        let tr = ramp(200, 0.01);
        let ((x0, x1), (y0, y1)) = plot_bounds(&[("a", &tr)], &s);
        assert_eq!((x0, x1), (0.0, 100.0));
        assert!((y0 - 6.5).abs() < 1e-12);
        assert!((y1 - (7.0 + 0.01 * 99.5 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn svg_is_well_formed_and_counts_series() {
        let s = SetpointSchedule::PiecewiseConstant { steps: vec![(0.0, 7.0), (50.0, 8.0)] };
        let (a, b) = (ramp(200, 0.01), ramp(200, 0.005));
        let one = render_svg(&[("hybrid", &a)], &s);
        let two = render_svg(&[("hybrid", &a), ("fuzzy <only>", &b)], &s);
        assert!(one.starts_with("<svg") && one.trim_end().ends_with("</svg>"));
        assert_eq!(one.matches("class=\"measurement\"").count(), 1);
        assert_eq!(two.matches("class=\"measurement\"").count(), 2);
        assert!(two.contains("fuzzy &lt;only&gt;"));
        assert_eq!(two.matches('<').count(), two.matches('>').count());
    }

    #[test]
    fn tick_labels() {
        assert_eq!(tick_step(900.0, 8.0), 200.0);
        assert_eq!(tick_step(4.0, 6.0), 1.0);
        let v: Vec<String> = ticks(5.6, 6.5, 0.2).map(|t| label(t, 0.2)).collect();
        assert_eq!(v, ["5.6", "5.8", "6.0", "6.2", "6.4"]);
    }

    #[test]
    fn writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.svg");
        plot(&ramp(10, 0.1), &SetpointSchedule::constant(7.0), &p).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().contains("<polyline"));
        let bad = dir.path().join("missing/dir/x.svg");
        assert!(matches!(plot(&ramp(10, 0.1), &SetpointSchedule::constant(7.0), &bad), Err(Error::Io { .. })));
    }
}
