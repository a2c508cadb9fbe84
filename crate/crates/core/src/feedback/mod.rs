//! What the expert is shown after a fit: quantiles the expert has not judged
//! (tertiles by default), tail exceedance probabilities, how far apart the
//! candidate families are, and plot data of the fitted CDFs against the
//! judgements and their boxes.

mod export;

pub use export::{CurveMeta, FigureSidecar};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{DomainError, FamilyKind, LineStyle, LocationScaleDistribution};
use crate::judgements::JudgementSet;

pub const TERTILES: [f64; 2] = [1.0 / 3.0, 2.0 / 3.0];

pub const KOLMOGOROV_GRID: usize = 4096;
pub const DEFAULT_FIGURE_POINTS: usize = 4001;

/// Upper-tail probabilities used for default tail thresholds.
const DEFAULT_TAIL_LEVELS: [f64; 3] = [0.9, 0.99, 0.999];
/// Default divergence thresholds, in multiples of the larger scale.
const DIVERGENCE_THRESHOLDS: [f64; 3] = [2.0, 3.0, 5.0];
/// Half-width of the default divergence range, in multiples of the larger scale.
const DIVERGENCE_HALF_WIDTH: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeedbackError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("at least one fitted distribution is required")]
    NoFits,
    #[error("figure needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("x range [{0}, {1}] is empty or not finite")]
    BadRange(f64, f64),
}

/// Quantiles of `dist` at each probability, in input order.
pub fn feedback_quantiles(dist: &LocationScaleDistribution, probs: &[f64]) -> Result<Vec<f64>, DomainError> {
    probs.iter().map(|&p| dist.quantile(p)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRatio {
    /// Index (in fit order) of the distribution in the numerator.
    pub numerator: usize,
    pub denominator: usize,
    /// `P_numerator(X > t) / P_denominator(X > t)` per threshold.
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub thresholds: Vec<f64>,
    pub fits: Vec<LocationScaleDistribution>,
    /// `exceedance[k][i] = P_k(X > thresholds[i])`.
    pub exceedance: Vec<Vec<f64>>,
    /// One entry per pair `(i, j)`, `i < j`, with `j` over `i`.
    pub ratios: Vec<TailRatio>,
}

pub fn tail_report(fits: &[LocationScaleDistribution], thresholds: &[f64]) -> Result<TailReport, FeedbackError> {
    if fits.is_empty() {
        return Err(FeedbackError::NoFits);
    }
    let exceedance = fits
        .iter()
        .map(|d| thresholds.iter().map(|&t| d.sf(t)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let mut ratios = Vec::new();
    for i in 0..fits.len() {
        for j in i + 1..fits.len() {
            ratios.push(TailRatio {
                numerator: j,
                denominator: i,
                ratios: exceedance[j].iter().zip(&exceedance[i]).map(|(a, b)| a / b).collect(),
            });
        }
    }
    Ok(TailReport { thresholds: thresholds.to_vec(), fits: fits.to_vec(), exceedance, ratios })
}

/// Upper quantiles of the first fit, used when no thresholds are given.
pub fn default_thresholds(fits: &[LocationScaleDistribution]) -> Vec<f64> {
    fits.first().map(|d| DEFAULT_TAIL_LEVELS.iter().filter_map(|&p| d.quantile(p).ok()).collect()).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRatio {
    pub threshold: f64,
    /// Heavier exceedance over lighter, so always ≥ 1.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    /// Largest vertical gap between the two CDFs.
    pub kolmogorov: f64,
    /// Where that gap is attained.
    pub argmax: f64,
    pub tail_ratios: Vec<ThresholdRatio>,
}

/// Kolmogorov distance and tail ratios with default range and thresholds:
/// the midpoint of the two locations ± 10 times the larger scale, and
/// thresholds at 2, 3 and 5 larger scales above that midpoint.
pub fn family_divergence(a: &LocationScaleDistribution, b: &LocationScaleDistribution) -> Divergence {
    let center = 0.5 * (a.location() + b.location());
    let spread = a.scale().max(b.scale());
    let half = DIVERGENCE_HALF_WIDTH * spread + 0.5 * (a.location() - b.location()).abs();
    let thresholds: Vec<f64> = DIVERGENCE_THRESHOLDS.iter().map(|k| center + k * spread).collect();
    family_divergence_over(a, b, (center - half, center + half), &thresholds)
        .expect("default range is finite and non-empty")
}

pub fn family_divergence_over(
    a: &LocationScaleDistribution,
    b: &LocationScaleDistribution,
    range: (f64, f64),
    thresholds: &[f64],
) -> Result<Divergence, FeedbackError> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(FeedbackError::BadRange(lo, hi));
    }
    let gap = |x: f64| (a.cdf_unchecked(x) - b.cdf_unchecked(x)).abs();
    let n = KOLMOGOROV_GRID;
    let step = (hi - lo) / (n - 1) as f64;
    let (mut k_best, mut best) = (0, gap(lo));
    for k in 1..n {
        let v = gap(lo + step * k as f64);
        if v > best {
            k_best = k;
            best = v;
        }
    }
    // golden-section refinement on the neighbouring cells
    let (mut l, mut r) = (lo + step * k_best.saturating_sub(1) as f64, lo + step * (k_best + 1).min(n - 1) as f64);
    let mut argmax = lo + step * k_best as f64;
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = r - INV_PHI * (r - l);
    let mut d = l + INV_PHI * (r - l);
    let (mut fc, mut fd) = (gap(c), gap(d));
    for _ in 0..80 {
        if fc > fd {
            r = d;
            d = c;
            fd = fc;
            c = r - INV_PHI * (r - l);
            fc = gap(c);
        } else {
            l = c;
            c = d;
            fc = fd;
            d = l + INV_PHI * (r - l);
            fd = gap(d);
        }
    }
    let refined = 0.5 * (l + r);
    if gap(refined) > best {
        best = gap(refined);
        argmax = refined;
    }
    let tail_ratios = thresholds
        .iter()
        .map(|&t| {
            let (sa, sb) = (a.sf(t)?, b.sf(t)?);
            Ok(ThresholdRatio { threshold: t, ratio: sa.max(sb) / sa.min(sb) })
        })
        .collect::<Result<Vec<_>, DomainError>>()?;
    Ok(Divergence { kolmogorov: best, argmax, tail_ratios })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    /// Column label, unique within a figure.
    pub label: String,
    pub dist: LocationScaleDistribution,
    pub style: LineStyle,
    pub cdf: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub x: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl Rectangle {
    pub fn contains(&self, x: f64, p: f64) -> bool {
        x >= self.x_min && x <= self.x_max && p >= self.p_min && p <= self.p_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureData {
    pub x: Vec<f64>,
    pub curves: Vec<Curve>,
    pub markers: Vec<Marker>,
    pub rectangles: Vec<Rectangle>,
}

/// `[min x - 2 IQR, max x + 2 IQR]`, with the IQR read off the judgements by
/// linear interpolation.
pub fn default_range(set: &JudgementSet) -> (f64, f64) {
    let js = set.judgements();
    if js.is_empty() {
        return (-1.0, 1.0);
    }
    let value_at = |p: f64| {
        if p <= js[0].probability {
            return js[0].value;
        }
        for w in js.windows(2) {
            if p <= w[1].probability {
                let t = (p - w[0].probability) / (w[1].probability - w[0].probability);
                return w[0].value + t * (w[1].value - w[0].value);
            }
        }
        js[js.len() - 1].value
    };
    let min = js.iter().map(|j| j.value).fold(f64::INFINITY, f64::min);
    let max = js.iter().map(|j| j.value).fold(f64::NEG_INFINITY, f64::max);
    let mut iqr = value_at(0.75) - value_at(0.25);
    if iqr.is_nan() || iqr <= 0.0 {
        iqr = (max - min).max(min.abs().max(1.0) * 0.5);
    }
    (min - 2.0 * iqr, max + 2.0 * iqr)
}

fn unique_labels(fits: &[LocationScaleDistribution]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::with_capacity(fits.len());
    for d in fits {
        let base = d.family().label();
        let mut label = base.clone();
        let mut k = 2;
        while labels.contains(&label) {
            label = format!("{base}_{k}");
            k += 1;
        }
        labels.push(label);
    }
    labels
}

/// Samples every fitted CDF on a uniform grid, plus the judgement markers
/// and (for non-zero boxes) the imprecision rectangles.
pub fn figure_data(
    fits: &[LocationScaleDistribution],
    set: &JudgementSet,
    x_range: Option<(f64, f64)>,
    n_points: usize,
) -> Result<FigureData, FeedbackError> {
    if n_points < 2 {
        return Err(FeedbackError::TooFewPoints(n_points));
    }
    let (lo, hi) = x_range.unwrap_or_else(|| default_range(set));
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(FeedbackError::BadRange(lo, hi));
    }
    let step = (hi - lo) / (n_points - 1) as f64;
    let x: Vec<f64> = (0..n_points).map(|i| if i == n_points - 1 { hi } else { lo + step * i as f64 }).collect();
    let curves = fits
        .iter()
        .zip(unique_labels(fits))
        .map(|(d, label)| Curve {
            label,
            dist: *d,
            style: d.family().line_style(),
            cdf: x.iter().map(|&xi| d.cdf_unchecked(xi)).collect(),
        })
        .collect();
    let markers = set.judgements().iter().map(|j| Marker { x: j.value, p: j.probability }).collect();
    let rectangles = set
        .iter()
        .filter(|(_, b)| !b.is_zero())
        .map(|(j, b)| {
            let (x_min, x_max) = b.value_bounds(j.value);
            let (p_min, p_max) = b.probability_bounds(j.probability);
            Rectangle { x_min, x_max, p_min, p_max }
        })
        .collect();
    Ok(FigureData { x, curves, markers, rectangles })
}

/// Which quantities to show the expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSpec {
    #[serde(default = "default_probabilities")]
    pub probabilities: Vec<f64>,
    /// Tail thresholds; empty means the first fit's 90/99/99.9% quantiles.
    #[serde(default)]
    pub thresholds: Vec<f64>,
}

fn default_probabilities() -> Vec<f64> {
    TERTILES.to_vec()
}

impl Default for FeedbackSpec {
    fn default() -> Self {
        Self { probabilities: default_probabilities(), thresholds: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileFeedback {
    pub family: FamilyKind,
    pub dist: LocationScaleDistribution,
    pub probabilities: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDivergence {
    pub a: usize,
    pub b: usize,
    pub divergence: Divergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub quantiles: Vec<QuantileFeedback>,
    pub tails: TailReport,
    pub divergences: Vec<PairDivergence>,
}

/// Quantiles, tail report and pairwise divergences for a list of fits.
pub fn feedback_report(
    fits: &[LocationScaleDistribution],
    spec: &FeedbackSpec,
) -> Result<FeedbackReport, FeedbackError> {
    if fits.is_empty() {
        return Err(FeedbackError::NoFits);
    }
    let quantiles = fits
        .iter()
        .map(|d| {
            Ok(QuantileFeedback {
                family: d.family(),
                dist: *d,
                probabilities: spec.probabilities.clone(),
                values: feedback_quantiles(d, &spec.probabilities)?,
            })
        })
        .collect::<Result<Vec<_>, DomainError>>()?;
    let thresholds = if spec.thresholds.is_empty() { default_thresholds(fits) } else { spec.thresholds.clone() };
    let tails = tail_report(fits, &thresholds)?;
    let mut divergences = Vec::new();
    for i in 0..fits.len() {
        for j in i + 1..fits.len() {
            divergences.push(PairDivergence { a: i, b: j, divergence: family_divergence(&fits[i], &fits[j]) });
        }
    }
    Ok(FeedbackReport { quantiles, tails, divergences })
}
