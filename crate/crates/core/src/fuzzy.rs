//! Single-input Mamdani controller: pH error in, flow-split adjustment out.
//!
//! Min implication, max aggregation, centroid defuzzification by trapezoidal
//! quadrature on a uniform grid.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FuzzyError {
    #[error("aggregate membership is zero everywhere")]
    EmptyAggregate,
    #[error("invalid fuzzy controller: {0}")]
    Invalid(String),
    #[error("fuzzy controller file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MembershipFunction {
    Triangle { a: f64, b: f64, c: f64 },
    Trapezoid { a: f64, b: f64, c: f64, d: f64 },
}

impl MembershipFunction {
    pub fn triangle(a: f64, b: f64, c: f64) -> Result<Self, FuzzyError> {
        let mf = Self::Triangle { a, b, c };
        mf.validate()?;
        Ok(mf)
    }

    pub fn trapezoid(a: f64, b: f64, c: f64, d: f64) -> Result<Self, FuzzyError> {
        let mf = Self::Trapezoid { a, b, c, d };
        mf.validate()?;
        Ok(mf)
    }

    /// Breakpoints as a trapezoid; a triangle is a trapezoid with `b == c`.
    fn corners(&self) -> [f64; 4] {
        match *self {
            Self::Triangle { a, b, c } => [a, b, b, c],
            Self::Trapezoid { a, b, c, d } => [a, b, c, d],
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Self::Triangle { a, b, c } => vec![a, b, c],
            Self::Trapezoid { a, b, c, d } => vec![a, b, c, d],
        }
    }

    pub fn support(&self) -> (f64, f64) {
        let [a, _, _, d] = self.corners();
        (a, d)
    }

    fn validate(&self) -> Result<(), FuzzyError> {
        let p = self.breakpoints();
        if p.iter().any(|v| !v.is_finite()) || p.windows(2).any(|w| w[0] > w[1]) {
            return Err(FuzzyError::Invalid(format!("breakpoints {p:?} must be finite and ascending")));
        }
        Ok(())
    }

    /// Piecewise-linear degree. Closed intervals: a vertical edge (`a == b`
    /// or `c == d`) takes the plateau value at the breakpoint.
    pub fn degree(&self, x: f64) -> f64 {
        let [a, b, c, d] = self.corners();
        if x < a || x > d {
            0.0
        } else if x < b {
            (x - a) / (b - a)
        } else if x <= c {
            1.0
        } else {
            (d - x) / (d - c)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinguisticSet {
    pub label: String,
    pub mf: MembershipFunction,
}

impl LinguisticSet {
    fn new(label: &str, mf: MembershipFunction) -> Self {
        Self { label: label.to_owned(), mf }
    }
}

/// Pairs of (input label, output label); one rule per input label.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleBase {
    pub rules: Vec<(String, String)>,
}

/// Degree of each input set, in input-set order.
pub type Degrees = Vec<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyController {
    pub input_sets: Vec<LinguisticSet>,
    pub output_sets: Vec<LinguisticSet>,
    pub rules: RuleBase,
    pub input_universe: (f64, f64),
    pub output_universe: (f64, f64),
    pub defuzz_resolution: f64,
    /// `rule_map[i]` is the output-set index fired by input set `i`.
    rule_map: Vec<usize>,
}

pub const INPUT_LABELS: [&str; 9] = ["NXL", "NL", "NM", "NS", "Z", "PS", "PM", "PL", "PXL"];
pub const OUTPUT_LABELS: [&str; 9] = ["ONXL", "ONL", "ONM", "ONS", "OZ", "OPS", "OPM", "OPL", "OPXL"];

impl Default for FuzzyController {
    fn default() -> Self {
        use MembershipFunction::{Trapezoid as Tp, Triangle as Tr};
        let input = [
            Tp { a: -5.0, b: -5.0, c: -4.0, d: -2.0 },
            Tr { a: -3.0, b: -2.0, c: -1.0 },
            Tr { a: -2.0, b: -1.25, c: -0.5 },
            Tr { a: -1.0, b: -0.5, c: 0.0 },
            Tr { a: -0.5, b: 0.0, c: 0.5 },
            Tr { a: 0.0, b: 0.5, c: 1.0 },
            Tr { a: 0.5, b: 1.25, c: 2.0 },
            Tr { a: 1.0, b: 2.0, c: 3.0 },
            Tp { a: 2.0, b: 4.0, c: 5.0, d: 5.0 },
        ];
        let output = [
            Tp { a: -100.0, b: -100.0, c: -60.0, d: -45.0 },
            Tr { a: -50.0, b: -40.0, c: -30.0 },
            Tr { a: -35.0, b: -25.0, c: -15.0 },
            Tr { a: -20.0, b: -10.0, c: 0.0 },
            Tr { a: -0.5, b: 0.0, c: 0.5 },
            Tr { a: 0.0, b: 10.0, c: 20.0 },
            Tr { a: 15.0, b: 25.0, c: 35.0 },
            Tr { a: 30.0, b: 40.0, c: 50.0 },
            Tp { a: 45.0, b: 60.0, c: 100.0, d: 100.0 },
        ];
        Self::new(
            INPUT_LABELS.iter().zip(input).map(|(l, mf)| LinguisticSet::new(l, mf)).collect(),
            OUTPUT_LABELS.iter().zip(output).map(|(l, mf)| LinguisticSet::new(l, mf)).collect(),
            RuleBase {
                rules: INPUT_LABELS.iter().zip(OUTPUT_LABELS).map(|(i, o)| (i.to_string(), o.to_string())).collect(),
            },
            (-5.0, 5.0),
            (-100.0, 100.0),
            0.01,
        )
        .expect("built-in tables are valid")
    }
}

fn check_family(sets: &[LinguisticSet], universe: (f64, f64), what: &str) -> Result<(), FuzzyError> {
    if sets.is_empty() {
        return Err(FuzzyError::Invalid(format!("{what} sets are empty")));
    }
    let mut seen = HashSet::new();
    for s in sets {
        s.mf.validate()?;
        if !seen.insert(s.label.as_str()) {
            return Err(FuzzyError::Invalid(format!("duplicate {what} label {}", s.label)));
        }
    }
    // Coverage: sample densely and at every breakpoint inside the universe.
    let (lo, hi) = universe;
    let n = 10_000;
    let probes = (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .chain(sets.iter().flat_map(|s| s.mf.breakpoints()).filter(|x| (lo..=hi).contains(x)));
    for x in probes {
        if sets.iter().all(|s| s.mf.degree(x) <= 0.0) {
            return Err(FuzzyError::Invalid(format!("{what} universe not covered at {x}")));
        }
    }
    Ok(())
}

impl FuzzyController {
    pub fn new(
        input_sets: Vec<LinguisticSet>,
        output_sets: Vec<LinguisticSet>,
        rules: RuleBase,
        input_universe: (f64, f64),
        output_universe: (f64, f64),
        defuzz_resolution: f64,
    ) -> Result<Self, FuzzyError> {
        for (name, (lo, hi)) in [("input", input_universe), ("output", output_universe)] {
            if !(lo < hi) {
                return Err(FuzzyError::Invalid(format!("{name} universe [{lo}, {hi}] is empty")));
            }
        }
        if !(defuzz_resolution > 0.0 && defuzz_resolution < output_universe.1 - output_universe.0) {
            return Err(FuzzyError::Invalid(format!("defuzz_resolution {defuzz_resolution}")));
        }
        check_family(&input_sets, input_universe, "input")?;
        check_family(&output_sets, output_universe, "output")?;
        for s in &output_sets {
            let (a, d) = s.mf.support();
            if d - a < 2.0 * defuzz_resolution {
                return Err(FuzzyError::Invalid(format!(
                    "output set {} narrower than the defuzzification grid",
                    s.label
                )));
            }
        }

        if rules.rules.len() != input_sets.len() {
            return Err(FuzzyError::Invalid(format!(
                "{} rules for {} input sets (need exactly one per input label)",
                rules.rules.len(),
                input_sets.len()
            )));
        }
        let mut rule_map = vec![usize::MAX; input_sets.len()];
        let mut used_outputs = HashSet::new();
        for (inp, out) in &rules.rules {
            let i = input_sets
                .iter()
                .position(|s| &s.label == inp)
                .ok_or_else(|| FuzzyError::Invalid(format!("rule references unknown input label {inp}")))?;
            let o = output_sets
                .iter()
                .position(|s| &s.label == out)
                .ok_or_else(|| FuzzyError::Invalid(format!("rule references unknown output label {out}")))?;
            if rule_map[i] != usize::MAX {
                return Err(FuzzyError::Invalid(format!("input label {inp} has more than one rule")));
            }
            if !used_outputs.insert(o) {
                return Err(FuzzyError::Invalid(format!("output label {out} used by more than one rule")));
            }
            rule_map[i] = o;
        }

        Ok(Self { input_sets, output_sets, rules, input_universe, output_universe, defuzz_resolution, rule_map })
    }

    /// Degree of every input set at `e`, after clamping to the input universe.
    pub fn fuzzify(&self, e: f64) -> Degrees {
        let x = e.clamp(self.input_universe.0, self.input_universe.1);
        self.input_sets.iter().map(|s| s.mf.degree(x)).collect()
    }

    /// Clips each fired rule's consequent at its antecedent degree.
    pub fn infer(&self, degrees: &[f64]) -> Aggregate {
        let clipped = degrees
            .iter()
            .zip(&self.rule_map)
            .filter(|(d, _)| **d > 0.0)
            .map(|(d, &o)| (self.output_sets[o].mf, d.min(1.0)))
            .collect();
        Aggregate { clipped, universe: self.output_universe }
    }

    pub fn defuzzify(&self, aggregate: &Aggregate) -> Result<f64, FuzzyError> {
        aggregate.centroid(self.defuzz_resolution)
    }

    /// Crisp output for a pH error (setpoint minus measurement).
    pub fn controller_output(&self, e: f64) -> f64 {
        // Input coverage plus output-set width checks make the aggregate
        // non-empty for every e.
        self.defuzzify(&self.infer(&self.fuzzify(e))).expect("validated controller yields a non-empty aggregate")
    }

    pub fn from_json(text: &str) -> Result<Self, FuzzyError> {
        let file: ControllerFile = serde_json::from_str(text).map_err(|e| FuzzyError::Parse(e.to_string()))?;
        file.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ControllerFile::from(self)).expect("controller file serializes")
    }
}

/// Pointwise max of clipped consequent sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub clipped: Vec<(MembershipFunction, f64)>,
    pub universe: (f64, f64),
}

impl Aggregate {
    pub fn degree(&self, x: f64) -> f64 {
        self.clipped.iter().fold(0.0, |m, (mf, h)| m.max(mf.degree(x).min(*h)))
    }

    pub fn centroid(&self, resolution: f64) -> Result<f64, FuzzyError> {
        let (lo, hi) = self.universe;
        let n = ((hi - lo) / resolution).round().max(1.0) as usize;
        let step = (hi - lo) / n as f64;
        // Grid points outside every fired support contribute nothing.
        let (smin, smax) =
            self.clipped.iter().fold((hi, lo), |(a, b), (mf, _)| (a.min(mf.support().0), b.max(mf.support().1)));
        if smin > smax {
            return Err(FuzzyError::EmptyAggregate);
        }
        let first = (((smin - lo) / step).floor().max(0.0) as usize).min(n);
        let last = (((smax - lo) / step).ceil().max(0.0) as usize).min(n);
        let (mut num, mut den) = (0.0, 0.0);
        for i in first..=last {
            let x = lo + step * i as f64;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let mu = self.degree(x);
            num += w * x * mu;
            den += w * mu;
        }
        if den <= 0.0 {
            return Err(FuzzyError::EmptyAggregate);
        }
        Ok(num / den)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Shape {
    Triangle,
    Trapezoid,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetEntry {
    label: String,
    shape: Shape,
    breakpoints: Vec<f64>,
}

fn default_input_universe() -> (f64, f64) {
    (-5.0, 5.0)
}

fn default_output_universe() -> (f64, f64) {
    (-100.0, 100.0)
}

fn default_resolution() -> f64 {
    0.01
}

/// On-disk override format.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerFile {
    input_sets: Vec<SetEntry>,
    output_sets: Vec<SetEntry>,
    rules: Vec<(String, String)>,
    #[serde(default = "default_input_universe")]
    input_universe: (f64, f64),
    #[serde(default = "default_output_universe")]
    output_universe: (f64, f64),
    #[serde(default = "default_resolution")]
    defuzz_resolution: f64,
}

impl TryFrom<&SetEntry> for LinguisticSet {
    type Error = FuzzyError;

    fn try_from(e: &SetEntry) -> Result<Self, FuzzyError> {
        let mf = match (&e.shape, e.breakpoints.as_slice()) {
            (Shape::Triangle, &[a, b, c]) => MembershipFunction::triangle(a, b, c)?,
            (Shape::Trapezoid, &[a, b, c, d]) => MembershipFunction::trapezoid(a, b, c, d)?,
            (shape, p) => {
                return Err(FuzzyError::Invalid(format!("set {}: {shape:?} with {} breakpoints", e.label, p.len())))
            }
        };
        Ok(LinguisticSet { label: e.label.clone(), mf })
    }
}

impl From<&LinguisticSet> for SetEntry {
    fn from(s: &LinguisticSet) -> Self {
        let shape = match s.mf {
            MembershipFunction::Triangle { .. } => Shape::Triangle,
            MembershipFunction::Trapezoid { .. } => Shape::Trapezoid,
        };
        SetEntry { label: s.label.clone(), shape, breakpoints: s.mf.breakpoints() }
    }
}

impl TryFrom<ControllerFile> for FuzzyController {
    type Error = FuzzyError;

    fn try_from(f: ControllerFile) -> Result<Self, FuzzyError> {
        FuzzyController::new(
            f.input_sets.iter().map(LinguisticSet::try_from).collect::<Result<_, _>>()?,
            f.output_sets.iter().map(LinguisticSet::try_from).collect::<Result<_, _>>()?,
            RuleBase { rules: f.rules },
            f.input_universe,
            f.output_universe,
            f.defuzz_resolution,
        )
    }
}

impl From<&FuzzyController> for ControllerFile {
    fn from(c: &FuzzyController) -> Self {
        ControllerFile {
            input_sets: c.input_sets.iter().map(SetEntry::from).collect(),
            output_sets: c.output_sets.iter().map(SetEntry::from).collect(),
            rules: c.rules.rules.clone(),
            input_universe: c.input_universe,
            output_universe: c.output_universe,
            defuzz_resolution: c.defuzz_resolution,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn label_degree(fc: &FuzzyController, d: &[f64], label: &str) -> f64 {
        d[fc.input_sets.iter().position(|s| s.label == label).unwrap()]
    }

    #[test]
    fn membership_examples() {
        let z = MembershipFunction::triangle(-0.5, 0.0, 0.5).unwrap();
        assert_eq!(z.degree(0.0), 1.0);
        assert_abs_diff_eq!(z.degree(0.25), 0.5, epsilon = 1e-15);
        assert_eq!(z.degree(0.6), 0.0);
        let nxl = MembershipFunction::trapezoid(-5.0, -5.0, -4.0, -2.0).unwrap();
        assert_abs_diff_eq!(nxl.degree(-3.0), 0.5, epsilon = 1e-15);
        assert_eq!(nxl.degree(-5.0), 1.0);
        assert!(MembershipFunction::triangle(0.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn fuzzify_examples() {
        let fc = FuzzyController::default();
        let d = fc.fuzzify(0.0);
        assert_eq!(label_degree(&fc, &d, "Z"), 1.0);
        assert_eq!(d.iter().sum::<f64>(), 1.0);

        let d = fc.fuzzify(-2.0);
        assert_eq!(label_degree(&fc, &d, "NL"), 1.0);
        assert_eq!(d.iter().sum::<f64>(), 1.0);

        let d = fc.fuzzify(-7.0);
        assert_eq!(label_degree(&fc, &d, "NXL"), 1.0);
    }

    #[test]
    fn single_rule_aggregate_is_its_consequent() {
        let fc = FuzzyController::default();
        let agg = fc.infer(&fc.fuzzify(0.0));
        let oz = fc.output_sets[4].mf;
        for x in [-0.6, -0.25, 0.0, 0.1, 0.5, 3.0] {
            assert_eq!(agg.degree(x), oz.degree(x));
        }
    }

    #[test]
    fn two_rule_aggregate_is_max_of_clips() {
        let fc = FuzzyController::default();
        let mut d = vec![0.0; 9];
        d[4] = 0.5;
        d[5] = 0.5;
        let agg = fc.infer(&d);
        let (oz, ops) = (fc.output_sets[4].mf, fc.output_sets[5].mf);
        for i in 0..=400 {
            let x = -1.0 + i as f64 * 0.055;
            assert_eq!(agg.degree(x), oz.degree(x).min(0.5).max(ops.degree(x).min(0.5)));
        }
    }

    #[test]
    fn defuzzify_examples() {
        let fc = FuzzyController::default();
        let full = |i: usize| Aggregate { clipped: vec![(fc.output_sets[i].mf, 1.0)], universe: fc.output_universe };
        assert_abs_diff_eq!(fc.defuzzify(&full(4)).unwrap(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fc.defuzzify(&full(1)).unwrap(), -40.0, epsilon = 0.05);
        // Rectangle 60..100 (area 40, centroid 80) plus ramp 45..60 (area
        // 7.5, centroid 55).
        let opxl = (40.0 * 80.0 + 7.5 * 55.0) / 47.5;
        assert_abs_diff_eq!(fc.defuzzify(&full(8)).unwrap(), opxl, epsilon = 0.05);
        let empty = Aggregate { clipped: vec![], universe: fc.output_universe };
        assert_eq!(fc.defuzzify(&empty), Err(FuzzyError::EmptyAggregate));
    }

    #[test]
    fn crisp_map_examples() {
        let fc = FuzzyController::default();
        assert_abs_diff_eq!(fc.controller_output(0.0), 0.0, epsilon = 0.05);
        assert_abs_diff_eq!(fc.controller_output(-2.0), -40.0, epsilon = 0.5);
        assert_abs_diff_eq!(fc.controller_output(2.0), 40.0, epsilon = 0.5);
    }

    #[test]
    fn coverage_margin() {
        let fc = FuzzyController::default();
        for i in 0..=10_000 {
            let e = -5.0 + i as f64 * 1e-3;
            let best = fc.fuzzify(e).into_iter().fold(0.0, f64::max);
            assert!(best >= 0.25, "coverage {best} at {e}");
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let fc = FuzzyController::default();
        let back = FuzzyController::from_json(&fc.to_json()).unwrap();
        assert_eq!(back, fc);

        let mut v: serde_json::Value = serde_json::from_str(&fc.to_json()).unwrap();
        v["rules"][1][1] = serde_json::json!("ONXL");
        assert!(FuzzyController::from_json(&v.to_string()).is_err());

        let mut v: serde_json::Value = serde_json::from_str(&fc.to_json()).unwrap();
        v["input_sets"][4]["breakpoints"] = serde_json::json!([-0.1, 0.0, 0.1]);
        v["input_sets"][3]["breakpoints"] = serde_json::json!([-1.0, -0.5, -0.2]);
        let err = FuzzyController::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("not covered"), "{err}");

        let mut v: serde_json::Value = serde_json::from_str(&fc.to_json()).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(matches!(FuzzyController::from_json(&v.to_string()), Err(FuzzyError::Parse(_))));
    }
}
