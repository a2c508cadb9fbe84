//! Symmetric unimodal location-scale families: normal, Student-t and Cauchy.
//!
//! Every family is evaluated through its standard form (location 0, scale 1).
//! Lower-tail probabilities are computed directly and the upper tail is
//! obtained by reflection, so `cdf(m - d) + cdf(m + d) == 1` holds to
//! rounding and tiny tail probabilities keep their relative accuracy.

use std::f64::consts::{FRAC_1_PI, PI};
use std::fmt;
use std::num::NonZeroU32;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{erfc, ln_beta, reg_inc_beta};

/// Degrees of freedom used when a Student-t family is requested without one.
pub const DEFAULT_DOF: u32 = 5;

/// Smallest probability `standard_cdf` will return.
pub const MIN_PROB: f64 = f64::MIN_POSITIVE;
/// Largest probability `standard_cdf` will return (the last double below 1).
pub const MAX_PROB: f64 = 1.0 - f64::EPSILON / 2.0;

const QUANTILE_TOL: f64 = 1e-13;
const QUANTILE_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("{what} must be finite, got {value}")]
    NonFinite { what: &'static str, value: f64 },
    #[error("probability must lie strictly between 0 and 1, got {0}")]
    ProbabilityOutOfRange(f64),
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("unknown family `{0}` (expected normal, cauchy or t<dof> such as t5)")]
    UnknownFamily(String),
}

fn finite(what: &'static str, value: f64) -> Result<f64, DomainError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(DomainError::NonFinite { what, value })
    }
}

fn open_unit(p: f64) -> Result<f64, DomainError> {
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(DomainError::ProbabilityOutOfRange(p))
    }
}

/// A symmetric unimodal standard family.
///
/// Serialized by its label: `normal`, `t<dof>` (for example `t5`) or `cauchy`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FamilyKind {
    Normal,
    StudentT(NonZeroU32),
    Cauchy,
}

impl FamilyKind {
    pub fn student_t(dof: u32) -> Option<Self> {
        NonZeroU32::new(dof).map(FamilyKind::StudentT)
    }

    /// The three families compared throughout: normal, t5 and Cauchy.
    pub fn reference_set() -> [FamilyKind; 3] {
        [FamilyKind::Normal, FamilyKind::StudentT(NonZeroU32::new(DEFAULT_DOF).unwrap()), FamilyKind::Cauchy]
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    /// Line style used when plotting: solid, dotted or dashed.
    pub fn line_style(&self) -> LineStyle {
        match self {
            FamilyKind::Normal => LineStyle::Solid,
            FamilyKind::StudentT(_) => LineStyle::Dotted,
            FamilyKind::Cauchy => LineStyle::Dashed,
        }
    }

    /// P(Z < z) for z ≤ 0, without clamping.
    fn lower_tail(&self, z: f64) -> f64 {
        debug_assert!(z <= 0.0);
        match self {
            FamilyKind::Normal => 0.5 * erfc(-z * std::f64::consts::FRAC_1_SQRT_2),
            FamilyKind::Cauchy => {
                if z < -1.0 {
                    (-1.0 / z).atan() * FRAC_1_PI
                } else {
                    0.5 + z.atan() * FRAC_1_PI
                }
            }
            FamilyKind::StudentT(dof) => {
                let nu = dof.get() as f64;
                let t2 = z * z;
                let denom = nu + t2;
                0.5 * reg_inc_beta(nu / denom, t2 / denom, 0.5 * nu, 0.5)
            }
        }
    }

    fn standard_density(&self, z: f64) -> f64 {
        match self {
            FamilyKind::Normal => (-0.5 * z * z).exp() / (2.0 * PI).sqrt(),
            FamilyKind::Cauchy => FRAC_1_PI / (1.0 + z * z),
            FamilyKind::StudentT(dof) => {
                let nu = dof.get() as f64;
                let ln_norm = -0.5 * nu.ln() - ln_beta(0.5 * nu, 0.5);
                (ln_norm - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p()).exp()
            }
        }
    }

    /// Starting point for quantile refinement, p < 0.5.
    fn quantile_guess(&self, p: f64) -> f64 {
        match self {
            FamilyKind::Normal => normal_quantile_guess(p),
            FamilyKind::Cauchy => -1.0 / (PI * p).tan(),
            FamilyKind::StudentT(dof) => {
                let nu = dof.get() as f64;
                let z = normal_quantile_guess(p);
                let z3 = z * z * z;
                let z5 = z3 * z * z;
                z + (z3 + z) / (4.0 * nu) + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * nu * nu)
            }
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::Normal => f.write_str("normal"),
            FamilyKind::StudentT(dof) => write!(f, "t{dof}"),
            FamilyKind::Cauchy => f.write_str("cauchy"),
        }
    }
}

impl FromStr for FamilyKind {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "normal" | "gaussian" => Ok(FamilyKind::Normal),
            "cauchy" => Ok(FamilyKind::Cauchy),
            "t" => Ok(FamilyKind::student_t(DEFAULT_DOF).unwrap()),
            other => other
                .strip_prefix('t')
                .and_then(|d| d.parse::<u32>().ok())
                .and_then(FamilyKind::student_t)
                .ok_or_else(|| DomainError::UnknownFamily(s.to_string())),
        }
    }
}

impl TryFrom<String> for FamilyKind {
    type Error = DomainError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<FamilyKind> for String {
    fn from(value: FamilyKind) -> Self {
        value.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineStyle {
    Solid,
    Dotted,
    Dashed,
}

/// Acklam's rational approximation to the normal quantile (relative error
/// about 1e-9), used only as a Newton starting point. Requires p < 0.5.
fn normal_quantile_guess(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_671_010_366_931,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] =
        [7.784_695_709_041_462e-3, 3.224_671_290_700_398e-1, 2.445_134_137_142_996, 3.754_408_361_507_144];
    if p < 0.024_25 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// P(Z < z) for the standard form of `family`, clamped to the open unit interval.
pub fn standard_cdf(family: FamilyKind, z: f64) -> Result<f64, DomainError> {
    let z = finite("z", z)?;
    Ok(standard_cdf_unchecked(family, z))
}

pub(crate) fn standard_cdf_unchecked(family: FamilyKind, z: f64) -> f64 {
    let p = if z <= 0.0 { family.lower_tail(z) } else { 1.0 - family.lower_tail(-z) };
    p.clamp(MIN_PROB, MAX_PROB)
}

/// P(Z > z), computed by reflection so that upper tails keep full relative
/// precision.
pub fn standard_sf(family: FamilyKind, z: f64) -> Result<f64, DomainError> {
    standard_cdf(family, -finite("z", z)?)
}

pub fn standard_density(family: FamilyKind, z: f64) -> Result<f64, DomainError> {
    Ok(family.standard_density(finite("z", z)?))
}

/// Inverse of [`standard_cdf`].
///
/// Solved for p < 1/2 and reflected, so `q(p) == -q(1 - p)` exactly.
pub fn standard_quantile(family: FamilyKind, p: f64) -> Result<f64, DomainError> {
    let p = open_unit(p)?;
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        return Ok(-lower_quantile(family, 1.0 - p));
    }
    Ok(lower_quantile(family, p))
}

/// Safeguarded Newton on `lower_tail(z) = p` over the bracket (lo, 0].
fn lower_quantile(family: FamilyKind, p: f64) -> f64 {
    if family == FamilyKind::Cauchy {
        return -1.0 / (PI * p).tan();
    }
    let mut z = family.quantile_guess(p).min(0.0);
    let mut hi = 0.0_f64;
    let mut lo = z.min(-1.0);
    while family.lower_tail(lo) > p {
        hi = lo;
        lo *= 2.0;
        if !lo.is_finite() {
            return f64::MIN;
        }
    }
    if !(z > lo && z < hi) {
        z = 0.5 * (lo + hi);
    }
    for _ in 0..QUANTILE_MAX_ITER {
        let f = family.lower_tail(z) - p;
        if f.abs() <= QUANTILE_TOL * p {
            break;
        }
        if f > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        let slope = family.standard_density(z);
        let mut next = z - f / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if next == z || (hi - lo) <= 4.0 * f64::EPSILON * z.abs() {
            z = next;
            break;
        }
        z = next;
    }
    z
}

/// A symmetric family shifted to `location` and stretched by `scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionWire")]
pub struct LocationScaleDistribution {
    family: FamilyKind,
    location: f64,
    scale: f64,
}

#[derive(Deserialize)]
struct DistributionWire {
    family: FamilyKind,
    location: f64,
    scale: f64,
}

impl TryFrom<DistributionWire> for LocationScaleDistribution {
    type Error = DomainError;

    fn try_from(w: DistributionWire) -> Result<Self, Self::Error> {
        LocationScaleDistribution::new(w.family, w.location, w.scale)
    }
}

impl LocationScaleDistribution {
    pub fn new(family: FamilyKind, location: f64, scale: f64) -> Result<Self, DomainError> {
        let location = finite("location", location)?;
        if !(scale.is_finite() && scale > 0.0) {
            return Err(DomainError::InvalidScale(scale));
        }
        Ok(Self { family, location, scale })
    }

    pub fn standard(family: FamilyKind) -> Self {
        Self { family, location: 0.0, scale: 1.0 }
    }

    pub fn family(&self) -> FamilyKind {
        self.family
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn standardize(&self, x: f64) -> Result<f64, DomainError> {
        Ok((finite("x", x)? - self.location) / self.scale)
    }

    pub fn cdf(&self, x: f64) -> Result<f64, DomainError> {
        Ok(standard_cdf_unchecked(self.family, self.standardize(x)?))
    }

    /// P(X > x).
    pub fn sf(&self, x: f64) -> Result<f64, DomainError> {
        Ok(standard_cdf_unchecked(self.family, -self.standardize(x)?))
    }

    pub fn quantile(&self, p: f64) -> Result<f64, DomainError> {
        Ok(self.location + self.scale * standard_quantile(self.family, p)?)
    }

    pub fn density(&self, x: f64) -> Result<f64, DomainError> {
        Ok(self.family.standard_density(self.standardize(x)?) / self.scale)
    }

    /// `cdf` for callers that have already checked `x` is finite.
    pub(crate) fn cdf_unchecked(&self, x: f64) -> f64 {
        standard_cdf_unchecked(self.family, (x - self.location) / self.scale)
    }
}

impl fmt::Display for LocationScaleDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(location={}, scale={})", self.family, self.location, self.scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t5() -> FamilyKind {
        FamilyKind::student_t(5).unwrap()
    }

    /// Composite Gauss-Legendre (5 point) integration; test oracle only.
    fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        const NODES: [f64; 5] =
            [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
        const WEIGHTS: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let mid = a + (k as f64 + 0.5) * h;
                NODES.iter().zip(WEIGHTS.iter()).map(|(n, w)| w * f(mid + 0.5 * h * n)).sum::<f64>() * 0.5 * h
            })
            .sum()
    }

    // Densities written out independently of the implementation.
    fn t5_pdf(t: f64) -> f64 {
        8.0 / (3.0 * PI * 5f64.sqrt()) * (1.0 + t * t / 5.0).powi(-3)
    }

    fn normal_pdf(z: f64) -> f64 {
        (-z * z / 2.0).exp() / (2.0 * PI).sqrt()
    }

    #[test]
    fn normal_quartile_matches_judgement() {
        let p = standard_cdf(FamilyKind::Normal, 0.6745).unwrap();
        assert!((p - 0.75).abs() < 1e-4);
    }

    #[test]
    fn cauchy_median_is_half() {
        assert_eq!(standard_cdf(FamilyKind::Cauchy, 0.0).unwrap(), 0.5);
        assert_eq!(standard_cdf(FamilyKind::Normal, 0.0).unwrap(), 0.5);
        assert_eq!(standard_cdf(t5(), 0.0).unwrap(), 0.5);
    }

    #[test]
    fn cdf_against_quadrature() {
        // t5 at 1.4759 is the 90th percentile
        let oracle = 0.5 + integrate(t5_pdf, 0.0, 1.4759, 200);
        assert!((oracle - 0.9).abs() < 1e-3);
        let got = standard_cdf(t5(), 1.4759).unwrap();
        assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");

        for &z in &[-6.0, -3.3, -1.0, -0.2, 0.4, 1.7, 2.5, 4.0] {
            let n_oracle = 0.5 + integrate(normal_pdf, 0.0, z, 400);
            let t_oracle = 0.5 + integrate(t5_pdf, 0.0, z, 400);
            let c_oracle = 0.5 + integrate(|u| FRAC_1_PI / (1.0 + u * u), 0.0, z, 400);
            assert!((standard_cdf(FamilyKind::Normal, z).unwrap() - n_oracle).abs() < 1e-12);
            assert!((standard_cdf(t5(), z).unwrap() - t_oracle).abs() < 1e-12);
            assert!((standard_cdf(FamilyKind::Cauchy, z).unwrap() - c_oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn t1_is_cauchy_and_large_dof_approaches_normal() {
        let t1 = FamilyKind::student_t(1).unwrap();
        let t1000 = FamilyKind::student_t(1000).unwrap();
        for &z in &[-20.0, -2.0, -0.3, 0.7, 5.0] {
            let a = standard_cdf(t1, z).unwrap();
            let b = standard_cdf(FamilyKind::Cauchy, z).unwrap();
            assert!((a - b).abs() < 1e-13);
            let c = standard_cdf(t1000, z).unwrap();
            let n = standard_cdf(FamilyKind::Normal, z).unwrap();
            assert!((c - n).abs() < 1e-3);
        }
    }

    #[test]
    fn quantile_examples() {
        let q = standard_quantile(FamilyKind::Normal, 0.9).unwrap();
        assert!((q - 1.2816).abs() < 1e-4);
        let q = standard_quantile(FamilyKind::Cauchy, 0.75).unwrap();
        assert!((q - 1.0).abs() < 1e-12);
        // oracle: bisection on the quadrature CDF
        let (mut lo, mut hi) = (0.0, 3.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if 0.5 + integrate(t5_pdf, 0.0, mid, 100) < 0.75 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 0.7267).abs() < 1e-3);
        let q = standard_quantile(t5(), 0.75).unwrap();
        assert!((q - lo).abs() < 1e-10);
    }

    #[test]
    fn quantile_domain_errors() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(standard_quantile(FamilyKind::Normal, p), Err(DomainError::ProbabilityOutOfRange(_))));
        }
        assert!(standard_cdf(FamilyKind::Normal, f64::INFINITY).is_err());
        assert!(standard_cdf(FamilyKind::Cauchy, f64::NAN).is_err());
    }

    #[test]
    fn extreme_arguments_stay_in_open_interval() {
        for fam in [FamilyKind::Normal, t5(), FamilyKind::Cauchy] {
            let lo = standard_cdf(fam, -1e300).unwrap();
            let hi = standard_cdf(fam, 1e300).unwrap();
            assert!(lo > 0.0 && lo < 1e-10);
            assert!(hi < 1.0 && hi > 1.0 - 1e-10);
        }
        assert_eq!(standard_cdf(FamilyKind::Normal, -50.0).unwrap(), MIN_PROB);
        assert_eq!(standard_cdf(FamilyKind::Normal, 50.0).unwrap(), MAX_PROB);
    }

    #[test]
    fn location_scale_examples() {
        let n = LocationScaleDistribution::standard(FamilyKind::Normal);
        assert!((n.cdf(-0.6745).unwrap() - 0.25).abs() < 1e-4);
        assert_eq!(n.quantile(0.5).unwrap(), 0.0);

        let c = LocationScaleDistribution::new(FamilyKind::Cauchy, 2.0, 3.0).unwrap();
        assert_eq!(c.cdf(2.0).unwrap(), 0.5);

        let c = LocationScaleDistribution::new(FamilyKind::Cauchy, 0.0, 0.6745).unwrap();
        let closed = 0.5 + (1.2816f64 / 0.6745).atan() / PI;
        assert!((closed - 0.8459).abs() < 1e-3);
        assert!((c.cdf(1.2816).unwrap() - closed).abs() < 1e-14);
        assert!((c.quantile(0.75).unwrap() - 0.6745).abs() < 1e-12);

        let n = LocationScaleDistribution::new(FamilyKind::Normal, 10.0, 2.0).unwrap();
        assert!((n.quantile(0.75).unwrap() - 11.3490).abs() < 1e-3);
    }

    #[test]
    fn density_examples() {
        let n = LocationScaleDistribution::standard(FamilyKind::Normal);
        assert!((n.density(0.0).unwrap() - 0.398_94).abs() < 1e-5);
        let c = LocationScaleDistribution::standard(FamilyKind::Cauchy);
        assert!((c.density(0.0).unwrap() - std::f64::consts::FRAC_1_PI).abs() < 1e-15);
        let t = LocationScaleDistribution::standard(t5());
        assert_eq!(t.density(-1.0).unwrap(), t.density(1.0).unwrap());
        assert!((t.density(0.3).unwrap() - t5_pdf(0.3)).abs() < 1e-14);
    }

    #[test]
    fn invalid_parameters() {
        assert!(LocationScaleDistribution::new(FamilyKind::Normal, 0.0, 0.0).is_err());
        assert!(LocationScaleDistribution::new(FamilyKind::Normal, 0.0, -1.0).is_err());
        assert!(LocationScaleDistribution::new(FamilyKind::Normal, f64::NAN, 1.0).is_err());
        assert!(FamilyKind::student_t(0).is_none());
        assert!("t0".parse::<FamilyKind>().is_err());
        assert!("weibull".parse::<FamilyKind>().is_err());
    }

    #[test]
    fn family_labels_round_trip() {
        for fam in [FamilyKind::Normal, t5(), FamilyKind::student_t(12).unwrap(), FamilyKind::Cauchy] {
            assert_eq!(fam.label().parse::<FamilyKind>().unwrap(), fam);
        }
        assert_eq!(t5().label(), "t5");
        let json = serde_json::to_string(&LocationScaleDistribution::standard(t5())).unwrap();
        assert_eq!(json, r#"{"family":"t5","location":0.0,"scale":1.0}"#);
        let bad = r#"{"family":"normal","location":0.0,"scale":-2.0}"#;
        assert!(serde_json::from_str::<LocationScaleDistribution>(bad).is_err());
    }
}
