use serde::{Deserialize, Serialize};

use super::schedule::SetpointSchedule;
use super::trace::SimTrace;
use crate::error::{Error, Result};

/// Tolerance band around the setpoint used for entry and settling, pH.
pub const SETTLING_BAND: f64 = 0.1;
const MIN_SEGMENT_SAMPLES: usize = 5;

/// Response over one constant-setpoint interval. Times are measured from
/// the start of the segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentMetrics {
    pub t_start: f64,
    pub t_end: f64,
    /// Setpoint before the segment (initial measurement for the first).
    pub from: f64,
    pub to: f64,
    pub samples: usize,
    /// 10% to 90% of the step span; `None` without a step or if 90% is
    /// never reached.
    pub rise_time_s: Option<f64>,
    /// First entry into the band.
    pub entry_time_s: Option<f64>,
    /// Entry into the band never left again before the segment ends.
    pub settling_time_s: Option<f64>,
    /// Excursion past `to` in the direction of the step.
    pub overshoot_ph: f64,
    /// Peak-to-peak of the measurement after settling.
    pub settled_peak_to_peak_ph: Option<f64>,
    /// `|pH - to|` at the last sample.
    pub final_error_ph: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub segments: Vec<SegmentMetrics>,
    pub rmse_ph: f64,
    pub iae_ph_s: f64,
}

/// First time the linearly interpolated progress `(y - from)/(to - from)`
/// reaches `level`.
fn crossing(t: &[f64], y: &[f64], from: f64, to: f64, level: f64) -> Option<f64> {
    let frac = |v: f64| (v - from) / (to - from);
    if frac(y[0]) >= level {
        return Some(t[0]);
    }
    (1..y.len()).find(|&i| frac(y[i]) >= level).map(|i| {
        let (a, b) = (frac(y[i - 1]), frac(y[i]));
        t[i - 1] + (t[i] - t[i - 1]) * (level - a) / (b - a)
    })
}

pub fn segment_metrics(t: &[f64], y: &[f64], t_start: f64, t_end: f64, from: f64, to: f64) -> Result<SegmentMetrics> {
    if t.len() < MIN_SEGMENT_SAMPLES {
        return Err(Error::SegmentTooShort { t_start, samples: t.len() });
    }
    let step = to - from;
    let has_step = step.abs() > 1e-9;
    let rise_time_s = if has_step {
        match (crossing(t, y, from, to, 0.1), crossing(t, y, from, to, 0.9)) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        }
    } else {
        None
    };
    let in_band = |v: f64| (v - to).abs() <= SETTLING_BAND;
    let entry_time_s = y.iter().position(|v| in_band(*v)).map(|i| t[i] - t_start);
    let settle_idx = match y.iter().rposition(|v| !in_band(*v)) {
        None => Some(0),
        Some(i) if i + 1 < y.len() => Some(i + 1),
        Some(_) => None,
    };
    let settling_time_s = settle_idx.map(|i| t[i] - t_start);
    let settled_peak_to_peak_ph = settle_idx.map(|i| {
        let tail = &y[i..];
        tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - tail.iter().cloned().fold(f64::INFINITY, f64::min)
    });
    let overshoot_ph = if !has_step {
        0.0
    } else if step > 0.0 {
        (y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - to).max(0.0)
    } else {
        (to - y.iter().cloned().fold(f64::INFINITY, f64::min)).max(0.0)
    };
    Ok(SegmentMetrics {
        t_start,
        t_end,
        from,
        to,
        samples: t.len(),
        rise_time_s,
        entry_time_s,
        settling_time_s,
        overshoot_ph,
        settled_peak_to_peak_ph,
        final_error_ph: (y[y.len() - 1] - to).abs(),
    })
}

/// Per-segment step metrics plus whole-run RMSE and IAE against `schedule`.
pub fn compute_metrics(trace: &SimTrace, schedule: &SetpointSchedule) -> Result<Metrics> {
    if trace.is_empty() {
        return Err(Error::Config("cannot compute metrics of an empty trace".into()));
    }
    let dt = trace.dt().unwrap_or(0.0);
    let (mut sq, mut abs) = (0.0, 0.0);
    for r in &trace.rows {
        let e = r.ph - schedule.value(r.t);
        sq += e * e;
        abs += e.abs();
    }
    let n = trace.len() as f64;

    let mut segments = Vec::new();
    let mut from = trace.rows[0].ph;
    for seg in schedule.segments(trace.t_end()) {
        let (t, y): (Vec<f64>, Vec<f64>) =
            trace.rows.iter().filter(|r| r.t >= seg.t_start && r.t < seg.t_end).map(|r| (r.t, r.ph)).unzip();
        segments.push(segment_metrics(&t, &y, seg.t_start, seg.t_end, from, seg.value)?);
        from = seg.value;
    }
    Ok(Metrics { segments, rmse_ph: (sq / n).sqrt(), iae_ph_s: abs * dt })
}

impl Metrics {
    /// Aligned plain-text table, one line per segment plus a summary line.
    pub fn table(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.1}")).unwrap_or_else(|| "-".into());
        let mut s = format!(
            "{:>8} {:>8} {:>6} {:>6} {:>8} {:>8} {:>8} {:>9} {:>9}\n",
            "t0_s", "t1_s", "from", "to", "rise_s", "entry_s", "settle_s", "overshoot", "final_err"
        );
        for g in &self.segments {
            s.push_str(&format!(
                "{:>8.1} {:>8.1} {:>6.2} {:>6.2} {:>8} {:>8} {:>8} {:>9.3} {:>9.3}\n",
                g.t_start,
                g.t_end,
                g.from,
                g.to,
                opt(g.rise_time_s),
                opt(g.entry_time_s),
                opt(g.settling_time_s),
                g.overshoot_ph,
                g.final_error_ph
            ));
        }
        s.push_str(&format!("rmse_ph {:.4}  iae_ph_s {:.2}\n", self.rmse_ph, self.iae_ph_s));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::super::trace::TraceRow;
    use super::*;
    use approx::assert_abs_diff_eq;

    fn trace_of(dt: f64, n: usize, f: impl Fn(f64) -> f64, sched: &SetpointSchedule) -> SimTrace {
        SimTrace {
            rows: (0..n)
                .map(|k| {
                    let t = k as f64 * dt;
                    TraceRow {
                        t,
                        ph_sp: sched.value(t),
                        ph: f(t),
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
    fn perfect_tracking_has_zero_error() {
        let s = SetpointSchedule::PiecewiseConstant { steps: vec![(0.0, 7.0), (30.0, 9.0)] };
        let tr = trace_of(0.1, 600, |t| s.value(t), &s);
        let m = compute_metrics(&tr, &s).unwrap();
        assert_eq!(m.rmse_ph, 0.0);
        assert_eq!(m.iae_ph_s, 0.0);
        assert_eq!(m.segments.len(), 2);
        assert_eq!(m.segments[1].settling_time_s, Some(0.0));
    }

    #[test]
    fn first_order_rise_time() {
        let tau = 30.0;
        let s = SetpointSchedule::PiecewiseConstant { steps: vec![(0.0, 7.0), (100.0, 10.0)] };
        let y = |t: f64| if t < 100.0 { 7.0 } else { 10.0 - 3.0 * (-(t - 100.0) / tau).exp() };
        let tr = trace_of(0.1, 6000, y, &s);
        let m = compute_metrics(&tr, &s).unwrap();
        let up = m.segments[1];
        let expect = tau * ((1.0f64 / 0.1).ln() - (1.0f64 / 0.9).ln());
        assert_abs_diff_eq!(up.rise_time_s.unwrap(), expect, epsilon = 1e-3);
        // Band entry: 3·exp(−t/τ) = 0.1.
        let entry = tau * 30.0f64.ln();
        assert_abs_diff_eq!(up.entry_time_s.unwrap(), entry, epsilon = 0.11);
        assert_abs_diff_eq!(up.settling_time_s.unwrap(), entry, epsilon = 0.11);
        assert_eq!(up.overshoot_ph, 0.0);
        assert!(up.settling_time_s.unwrap() >= up.rise_time_s.unwrap());
    }

    #[test]
    fn overshoot_and_unsettled_segment() {
        let s = SetpointSchedule::PiecewiseConstant { steps: vec![(0.0, 10.0), (50.0, 7.0)] };
        let y = |t: f64| if t < 50.0 { 10.0 } else { 7.0 - 0.5 * (-(t - 50.0) / 5.0).exp() * (t - 50.0).cos() };
        let m = compute_metrics(&trace_of(0.1, 1000, y, &s), &s).unwrap();
        assert!(m.segments[1].overshoot_ph > 0.3);
        let osc = |t: f64| if t < 50.0 { 10.0 } else { 7.0 + 0.5 * t.sin() };
        let m = compute_metrics(&trace_of(0.1, 1000, osc, &s), &s).unwrap();
        assert_eq!(m.segments[1].settling_time_s, None);
        assert_eq!(m.segments[1].settled_peak_to_peak_ph, None);
    }

    #[test]
    fn short_segment_is_an_error() {
        let s = SetpointSchedule::PiecewiseConstant { steps: vec![(0.0, 7.0), (0.3, 8.0)] };
        let tr = trace_of(0.1, 100, |_| 7.0, &s);
        assert!(matches!(compute_metrics(&tr, &s), Err(Error::SegmentTooShort { samples: 3, .. })));
    }

    #[test]
    fn rmse_bounded_by_step_size() {
        let s = SetpointSchedule::PiecewiseConstant { steps: vec![(0.0, 7.0), (100.0, 9.0)] };
        let y = |t: f64| if t < 100.0 { 7.0 } else { 9.0 - 2.0 * (-(t - 100.0) / 20.0).exp() };
        let m = compute_metrics(&trace_of(0.1, 3000, y, &s), &s).unwrap();
        assert!(m.rmse_ph > 0.0 && m.rmse_ph <= 2.0);
        // IAE of the exponential tail: 2·τ.
        assert_abs_diff_eq!(m.iae_ph_s, 40.0, epsilon = 0.2);
        assert!(m.table().lines().count() == 4);
    }
}
