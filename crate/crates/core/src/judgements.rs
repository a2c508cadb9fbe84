//! Percentile judgements `P(X < x) = p` and the imprecision box around each.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// z such that Φ(z) = 0.75 (printed to four places as 0.6745).
pub const NORMAL_QUARTILE: f64 = 0.674_489_750_196_081_7;
/// z such that Φ(z) = 0.9 (printed to four places as 1.2816).
pub const NORMAL_DECILE: f64 = 1.281_551_565_544_600_4;

/// The shared imprecision used by default for both coordinates.
pub const DEFAULT_IMPRECISION: f64 = 0.05;

/// Tolerance for treating two probabilities as complementary or as the median.
const PROB_MATCH_TOL: f64 = 1e-12;

pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Judgement {
    pub probability: f64,
    pub value: f64,
}

impl Judgement {
    pub fn new(probability: f64, value: f64) -> Self {
        Self { probability, value }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImprecisionBox {
    pub delta_p: f64,
    pub delta_x: f64,
}

impl ImprecisionBox {
    pub const ZERO: ImprecisionBox = ImprecisionBox { delta_p: 0.0, delta_x: 0.0 };

    pub fn new(delta_p: f64, delta_x: f64) -> Self {
        Self { delta_p, delta_x }
    }

    pub fn uniform(delta: f64) -> Self {
        Self { delta_p: delta, delta_x: delta }
    }

    pub fn is_zero(&self) -> bool {
        self.delta_p == 0.0 && self.delta_x == 0.0
    }

    /// `[p - delta_p, p + delta_p]` clipped to `[0, 1]`.
    pub fn probability_bounds(&self, p: f64) -> (f64, f64) {
        ((p - self.delta_p).max(0.0), (p + self.delta_p).min(1.0))
    }

    pub fn value_bounds(&self, x: f64) -> (f64, f64) {
        (x - self.delta_x, x + self.delta_x)
    }
}

/// An ordered list of judgements, each with its own imprecision box.
///
/// Construction never fails; use [`JudgementSet::validate`] to check
/// coherence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "JudgementSetWire", into = "JudgementSetWire")]
pub struct JudgementSet {
    judgements: Vec<Judgement>,
    boxes: Vec<ImprecisionBox>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JudgementRow {
    p: f64,
    x: f64,
    #[serde(default)]
    dp: f64,
    #[serde(default)]
    dx: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JudgementSetWire {
    judgements: Vec<JudgementRow>,
}

impl From<JudgementSetWire> for JudgementSet {
    fn from(w: JudgementSetWire) -> Self {
        w.judgements.into_iter().collect()
    }
}

impl From<JudgementSet> for JudgementSetWire {
    fn from(s: JudgementSet) -> Self {
        JudgementSetWire { judgements: s.rows().collect() }
    }
}

impl FromIterator<JudgementRow> for JudgementSet {
    fn from_iter<I: IntoIterator<Item = JudgementRow>>(iter: I) -> Self {
        let mut set = JudgementSet::default();
        for r in iter {
            set.push(Judgement::new(r.p, r.x), ImprecisionBox::new(r.dp, r.dx));
        }
        set
    }
}

impl JudgementSet {
    pub fn new(judgements: Vec<Judgement>) -> Self {
        let boxes = vec![ImprecisionBox::ZERO; judgements.len()];
        Self { judgements, boxes }
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        Self::new(pairs.iter().map(|&(p, x)| Judgement::new(p, x)).collect())
    }

    pub fn push(&mut self, judgement: Judgement, imprecision: ImprecisionBox) {
        self.judgements.push(judgement);
        self.boxes.push(imprecision);
    }

    /// Replaces every box with `imprecision`.
    pub fn with_uniform_box(mut self, imprecision: ImprecisionBox) -> Self {
        self.boxes.iter_mut().for_each(|b| *b = imprecision);
        self
    }

    pub fn with_box(mut self, index: usize, imprecision: ImprecisionBox) -> Self {
        self.boxes[index] = imprecision;
        self
    }

    pub fn len(&self) -> usize {
        self.judgements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgements.is_empty()
    }

    pub fn judgements(&self) -> &[Judgement] {
        &self.judgements
    }

    pub fn boxes(&self) -> &[ImprecisionBox] {
        &self.boxes
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Judgement, &ImprecisionBox)> {
        self.judgements.iter().zip(self.boxes.iter())
    }

    pub fn has_boxes(&self) -> bool {
        self.boxes.iter().any(|b| !b.is_zero())
    }

    /// Maps every value `x -> shift + factor * x` (and each `delta_x` by `factor`).
    pub fn affine(&self, shift: f64, factor: f64) -> Self {
        Self {
            judgements: self
                .judgements
                .iter()
                .map(|j| Judgement::new(j.probability, shift + factor * j.value))
                .collect(),
            boxes: self.boxes.iter().map(|b| ImprecisionBox::new(b.delta_p, factor.abs() * b.delta_x)).collect(),
        }
    }

    fn rows(&self) -> impl Iterator<Item = JudgementRow> + '_ {
        self.iter().map(|(j, b)| JudgementRow { p: j.probability, x: j.value, dp: b.delta_p, dx: b.delta_x })
    }

    /// Index of the judgement at p = 0.5, if any.
    pub fn median_index(&self) -> Option<usize> {
        self.judgements.iter().position(|j| (j.probability - 0.5).abs() <= PROB_MATCH_TOL)
    }

    /// Index pairs `(lower, upper)` whose probabilities sum to one, ordered
    /// from the outermost pair inwards.
    pub fn complementary_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for (i, a) in self.judgements.iter().enumerate() {
            if a.probability >= 0.5 - PROB_MATCH_TOL {
                break;
            }
            if let Some(j) =
                self.judgements.iter().rposition(|b| (a.probability + b.probability - 1.0).abs() <= PROB_MATCH_TOL)
            {
                pairs.push((i, j));
            }
        }
        pairs
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("judgement sets always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, JudgementIoError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), JudgementIoError> {
        let mut w = csv::Writer::from_writer(writer);
        for row in self.rows() {
            w.serialize(row)?;
        }
        if self.is_empty() {
            w.write_record(["p", "x", "dp", "dx"])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, JudgementIoError> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        r.deserialize::<JudgementRow>().collect::<Result<JudgementSet, _>>().map_err(JudgementIoError::from)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

#[derive(Debug, Error)]
pub enum JudgementIoError {
    #[error("invalid judgement JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid judgement CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The two judgement sets of the worked example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CanonicalKind {
    /// Median and quartiles of the standard normal.
    Three,
    /// Adds the 10th and 90th percentiles.
    Five,
}

impl std::str::FromStr for CanonicalKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "three" | "3" => Ok(CanonicalKind::Three),
            "five" | "5" => Ok(CanonicalKind::Five),
            other => Err(format!("unknown canonical set `{other}` (expected three or five)")),
        }
    }
}

/// Standard-normal percentile judgements; with `with_boxes` every judgement
/// gets a ±0.05 box in both coordinates.
pub fn canonical_set(kind: CanonicalKind, with_boxes: bool) -> JudgementSet {
    let pairs: &[(f64, f64)] = match kind {
        CanonicalKind::Three => &[(0.25, -NORMAL_QUARTILE), (0.5, 0.0), (0.75, NORMAL_QUARTILE)],
        CanonicalKind::Five => &[
            (0.1, -NORMAL_DECILE),
            (0.25, -NORMAL_QUARTILE),
            (0.5, 0.0),
            (0.75, NORMAL_QUARTILE),
            (0.9, NORMAL_DECILE),
        ],
    };
    let set = JudgementSet::from_pairs(pairs);
    if with_boxes {
        set.with_uniform_box(ImprecisionBox::uniform(DEFAULT_IMPRECISION))
    } else {
        set
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Empty,
    ProbabilityOutOfRange,
    NonFiniteValue,
    NonMonotoneProbability,
    DuplicateProbability,
    NonMonotoneValue,
    DuplicateValue,
    InvalidImprecision,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::Empty => "at least one judgement is required",
            Rule::ProbabilityOutOfRange => "probability must lie strictly between 0 and 1",
            Rule::NonFiniteValue => "value must be finite",
            Rule::NonMonotoneProbability => "probabilities must increase",
            Rule::DuplicateProbability => "probability repeats the previous judgement",
            Rule::NonMonotoneValue => "values must increase with probability",
            Rule::DuplicateValue => "value repeats the previous judgement",
            Rule::InvalidImprecision => "imprecision must be finite and non-negative",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: Option<usize>,
    pub rule: Rule,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    fn push(&mut self, index: Option<usize>, rule: Rule) {
        let message = match index {
            Some(i) => format!("judgement {i}: {rule}"),
            None => rule.to_string(),
        };
        self.violations.push(Violation { index, rule, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        let msgs: Vec<&str> = self.violations.iter().map(|v| v.message.as_str()).collect();
        f.write_str(&msgs.join("; "))
    }
}

/// Checks that the set describes a strictly increasing CDF.
// Negated comparisons so that NaN counts as out of order.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate(set: &JudgementSet) -> ValidationReport {
    let mut report = ValidationReport::default();
    if set.is_empty() {
        report.push(None, Rule::Empty);
        return report;
    }
    for (i, (j, b)) in set.iter().enumerate() {
        if !(j.probability > 0.0 && j.probability < 1.0) {
            report.push(Some(i), Rule::ProbabilityOutOfRange);
        }
        if !j.value.is_finite() {
            report.push(Some(i), Rule::NonFiniteValue);
        }
        let box_ok = |d: f64| d.is_finite() && d >= 0.0;
        if !(box_ok(b.delta_p) && box_ok(b.delta_x)) {
            report.push(Some(i), Rule::InvalidImprecision);
        }
    }
    for (i, w) in set.judgements.windows(2).enumerate() {
        let (prev, cur) = (w[0], w[1]);
        if cur.probability == prev.probability {
            report.push(Some(i + 1), Rule::DuplicateProbability);
        } else if !(cur.probability > prev.probability) {
            report.push(Some(i + 1), Rule::NonMonotoneProbability);
        }
        if cur.value == prev.value {
            report.push(Some(i + 1), Rule::DuplicateValue);
        } else if !(cur.value > prev.value) {
            report.push(Some(i + 1), Rule::NonMonotoneValue);
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryDiagnostic {
    pub symmetric: bool,
    pub center: f64,
    pub max_asymmetry: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("symmetry cannot be assessed without a median or a complementary pair")]
pub struct NotAssessable;

/// Measures how far the judgements depart from symmetry about their centre.
///
/// The centre is the median judgement when present, otherwise the midpoint
/// of the innermost complementary pair. `tolerance` is in units of X.
pub fn symmetry_diagnostic(set: &JudgementSet, tolerance: f64) -> Result<SymmetryDiagnostic, NotAssessable> {
    let pairs = set.complementary_pairs();
    let xs = &set.judgements;
    let center = match (set.median_index(), pairs.last()) {
        (Some(m), _) => xs[m].value,
        (None, Some(&(lo, hi))) => 0.5 * (xs[lo].value + xs[hi].value),
        (None, None) => return Err(NotAssessable),
    };
    let max_asymmetry =
        pairs.iter().map(|&(lo, hi)| ((xs[hi].value - center) - (center - xs[lo].value)).abs()).fold(0.0, f64::max);
    Ok(SymmetryDiagnostic { symmetric: max_asymmetry <= tolerance, center, max_asymmetry })
}
