use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// pH setpoint as a function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetpointSchedule {
    /// `(t_start, value)` pairs; each value holds until the next start.
    /// Before the first start the first value applies.
    PiecewiseConstant { steps: Vec<(f64, f64)> },
    /// Low (`center - amplitude`) before `t_start`, then high for the first
    /// half period, low for the second, and so on.
    SquareWave { center: f64, amplitude: f64, period: f64, t_start: f64 },
}

/// Interval `[t_start, t_end)` over which the setpoint is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub value: f64,
}

fn ph_ok(v: f64) -> bool {
    (0.0..=14.0).contains(&v)
}

impl SetpointSchedule {
    pub fn constant(value: f64) -> Self {
        Self::PiecewiseConstant { steps: vec![(0.0, value)] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::PiecewiseConstant { steps } => {
                if steps.is_empty() {
                    return Err(Error::Config("schedule has no steps".into()));
                }
                if steps.iter().any(|(t, v)| !t.is_finite() || !ph_ok(*v)) {
                    return Err(Error::Config("schedule steps need finite times and values in [0, 14]".into()));
                }
                if steps.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(Error::Config("schedule step times must be strictly ascending".into()));
                }
            }
            Self::SquareWave { center, amplitude, period, t_start } => {
                if !(*period > 0.0 && period.is_finite()) || !t_start.is_finite() || !(*amplitude >= 0.0) {
                    return Err(Error::Config("square wave needs period > 0, amplitude >= 0, finite t_start".into()));
                }
                if !ph_ok(center - amplitude) || !ph_ok(center + amplitude) {
                    return Err(Error::Config("square wave leaves [0, 14]".into()));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Self::PiecewiseConstant { steps } => {
                steps.iter().take_while(|(ts, _)| *ts <= t).last().unwrap_or(&steps[0]).1
            }
            Self::SquareWave { center, amplitude, period, t_start } => {
                if t < *t_start {
                    return center - amplitude;
                }
                let half = ((t - t_start) / (0.5 * period)).floor() as i64;
                if half % 2 == 0 {
                    center + amplitude
                } else {
                    center - amplitude
                }
            }
        }
    }

    /// Constant-value intervals covering `[0, t_end)`, with adjacent equal
    /// values merged.
    pub fn segments(&self, t_end: f64) -> Vec<Segment> {
        let mut cuts: Vec<f64> = match self {
            Self::PiecewiseConstant { steps } => steps.iter().map(|(t, _)| *t).collect(),
            Self::SquareWave { period, t_start, .. } => {
                let half = 0.5 * period;
                let first = if *t_start >= 0.0 { 0 } else { (-t_start / half).ceil() as i64 };
                (first..).map(|k| t_start + k as f64 * half).take_while(|t| *t < t_end).collect()
            }
        };
        // A cut within rounding of the end would leave an empty sliver.
        let tol = 1e-9 * t_end.abs().max(1.0);
        cuts.retain(|t| *t > 0.0 && *t < t_end - tol);
        cuts.insert(0, 0.0);
        cuts.push(t_end);

        let mut out: Vec<Segment> = Vec::new();
        for w in cuts.windows(2) {
            let value = self.value(w[0]);
            match out.last_mut() {
                Some(last) if last.value == value => last.t_end = w[1],
                _ => out.push(Segment { t_start: w[0], t_end: w[1], value }),
            }
        }
        out
    }

    /// Smallest and largest setpoint.
    pub fn range(&self) -> (f64, f64) {
        match self {
            Self::PiecewiseConstant { steps } => {
                steps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| (lo.min(*v), hi.max(*v)))
            }
            Self::SquareWave { center, amplitude, .. } => (center - amplitude, center + amplitude),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp2() -> SetpointSchedule {
        SetpointSchedule::SquareWave { center: 8.5, amplitude: 1.5, period: 600.0, t_start: 300.0 }
    }

    #[test]
    fn piecewise_values() {
        let s = SetpointSchedule::PiecewiseConstant { steps: vec![(0.0, 7.0), (300.0, 10.0), (600.0, 7.0)] };
        assert_eq!(s.value(0.0), 7.0);
        assert_eq!(s.value(299.9), 7.0);
        assert_eq!(s.value(300.0), 10.0);
        assert_eq!(s.value(450.0), 10.0);
        assert_eq!(s.value(700.0), 7.0);
        let late = SetpointSchedule::PiecewiseConstant { steps: vec![(10.0, 8.0)] };
        assert_eq!(late.value(0.0), 8.0);
    }

    #[test]
    fn square_wave_values() {
        let s = exp2();
        assert_eq!(s.value(0.0), 7.0);
        assert_eq!(s.value(300.1), 10.0);
        assert_eq!(s.value(600.1), 7.0);
        for t in [310.0, 455.5, 777.0, 1234.5] {
            assert_eq!(s.value(t), s.value(t + 600.0));
        }
    }

    #[test]
    fn segments_merge_and_cover() {
        let s = exp2();
        let segs = s.segments(2400.0);
        assert_eq!(segs.len(), 8);
        assert_eq!(segs[0], Segment { t_start: 0.0, t_end: 300.0, value: 7.0 });
        assert_eq!(segs[1], Segment { t_start: 300.0, t_end: 600.0, value: 10.0 });
        assert_eq!(segs.last().unwrap().t_end, 2400.0);

        let p =
            SetpointSchedule::PiecewiseConstant { steps: vec![(0.0, 7.0), (100.0, 7.0), (200.0, 9.0), (5000.0, 6.0)] };
        let segs = p.segments(1000.0);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].t_end, 200.0);
    }

    #[test]
    fn end_rounding_adds_no_sliver() {
        let segs = exp2().segments(2400.0000000000005);
        assert_eq!(segs.len(), 8);
        assert_eq!(segs.last().unwrap().t_start, 2100.0);
    }

    #[test]
    fn validation() {
        assert!(exp2().validate().is_ok());
        assert!(SetpointSchedule::PiecewiseConstant { steps: vec![] }.validate().is_err());
        assert!(SetpointSchedule::PiecewiseConstant { steps: vec![(0.0, 7.0), (0.0, 8.0)] }.validate().is_err());
        assert!(SetpointSchedule::constant(15.0).validate().is_err());
        let s = SetpointSchedule::SquareWave { center: 13.0, amplitude: 2.0, period: 10.0, t_start: 0.0 };
        assert!(s.validate().is_err());
    }

    #[test]
    fn json_shape() {
        let text = serde_json::to_string(&exp2()).unwrap();
        assert!(text.contains("\"kind\":\"square_wave\""));
        assert_eq!(serde_json::from_str::<SetpointSchedule>(&text).unwrap(), exp2());
        let bad = r#"{"kind":"piecewise_constant","steps":[[0,7]],"extra":1}"#;
        assert!(serde_json::from_str::<SetpointSchedule>(bad).is_err());
    }
}
