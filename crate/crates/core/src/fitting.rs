//! Fitting location-scale families to a judgement set.
//!
//! Three questions are asked of each family:
//!
//! * exact symmetric interpolation through the median and one complementary
//!   pair of judgements,
//! * least squares in probability space, `sum (cdf(x_i) - p_i)^2`,
//! * feasibility: can some member of the family pass through every
//!   imprecision box? This is answered by minimizing the worst signed box
//!   violation (a Chebyshev problem).
//!
//! Both searches run Nelder-Mead over normalized coordinates
//! `location = m0 + s0 * u`, `scale = s0 * exp(v)` around a starting fit
//! `(m0, s0)`, which keeps scale positive and makes the search equivariant
//! under `x -> a + b x`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{standard_quantile, DomainError, FamilyKind, LocationScaleDistribution};
use crate::judgements::{symmetry_diagnostic, JudgementSet, ValidationReport, DEFAULT_SYMMETRY_TOL};
use crate::optim::NelderMead;

/// Worst-case box violation (probability units) still counted as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 2000;
const LS_FTOL: f64 = 1e-14;
const XTOL: f64 = 1e-10;
/// Extra restarts from the incumbent after the three fixed simplexes.
const MAX_POLISH_RESTARTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("judgement set is not coherent: {0}")]
    InvalidJudgements(ValidationReport),
    #[error("exact symmetric fit needs a complementary pair of judgements (p and 1 - p)")]
    InsufficientStructure,
    #[error("least-squares fit needs at least 2 judgements, got {count}")]
    InsufficientData { count: usize },
    #[error("no families requested")]
    NoFamilies,
    #[error(transparent)]
    Domain(#[from] DomainError),
}

impl FitError {
    pub fn code(&self) -> &'static str {
        match self {
            FitError::InvalidJudgements(_) => "invalid_judgements",
            FitError::InsufficientStructure => "insufficient_structure",
            FitError::InsufficientData { .. } => "insufficient_data",
            FitError::NoFamilies => "no_families",
            FitError::Domain(_) => "domain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    ExactSymmetric,
    LeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerReport {
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub dist: LocationScaleDistribution,
    /// `cdf(x_i) - p_i` per judgement.
    pub residuals: Vec<f64>,
    pub max_abs_residual: f64,
    pub sse: f64,
    pub method: FitMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerReport>,
}

impl FitResult {
    fn new(
        dist: LocationScaleDistribution,
        set: &JudgementSet,
        method: FitMethod,
        optimizer: Option<OptimizerReport>,
    ) -> Self {
        let residuals: Vec<f64> =
            set.judgements().iter().map(|j| dist.cdf_unchecked(j.value) - j.probability).collect();
        let max_abs_residual = residuals.iter().fold(0.0, |m, r| r.abs().max(m));
        let sse = residuals.iter().map(|r| r * r).sum();
        Self { dist, residuals, max_abs_residual, sse, method, optimizer }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityResult {
    pub feasible: bool,
    /// Present iff feasible: the member whose CDF clears every box by the
    /// widest margin.
    pub witness: Option<LocationScaleDistribution>,
    /// Smallest achievable worst-case box violation, in probability units.
    pub min_max_violation: f64,
    /// Minimizer of the worst-case violation, feasible or not.
    pub best: LocationScaleDistribution,
    /// Per-judgement violation at `best` (zero when the box is threaded).
    pub violations: Vec<f64>,
    pub optimizer: OptimizerReport,
}

fn require_valid(set: &JudgementSet) -> Result<(), FitError> {
    let report = set.validate();
    if report.is_ok() {
        Ok(())
    } else {
        Err(FitError::InvalidJudgements(report))
    }
}

/// Interpolates the median and the complementary pair nearest the quartiles.
pub fn fit_exact_symmetric(family: FamilyKind, set: &JudgementSet) -> Result<FitResult, FitError> {
    require_valid(set)?;
    let pairs = set.complementary_pairs();
    let &(lo, hi) = pairs
        .iter()
        .min_by(|a, b| {
            let da = (set.judgements()[a.0].probability - 0.25).abs();
            let db = (set.judgements()[b.0].probability - 0.25).abs();
            da.total_cmp(&db)
        })
        .ok_or(FitError::InsufficientStructure)?;
    let center = symmetry_diagnostic(set, DEFAULT_SYMMETRY_TOL).map_err(|_| FitError::InsufficientStructure)?.center;
    let (jl, jh) = (set.judgements()[lo], set.judgements()[hi]);
    let z = standard_quantile(family, 1.0 - jl.probability)?;
    let scale = (jh.value - jl.value) / (2.0 * z);
    let dist = LocationScaleDistribution::new(family, center, scale)?;
    Ok(FitResult::new(dist, set, FitMethod::ExactSymmetric, None))
}

/// Starting point when no exact symmetric fit exists: the line through the
/// outermost judgements in (standard quantile, value) space.
fn surrogate_start(family: FamilyKind, set: &JudgementSet) -> Result<LocationScaleDistribution, FitError> {
    let js = set.judgements();
    let (first, last) = (js[0], js[js.len() - 1]);
    let z0 = standard_quantile(family, first.probability)?;
    let z1 = standard_quantile(family, last.probability)?;
    let scale = (last.value - first.value) / (z1 - z0);
    let location = first.value - scale * z0;
    Ok(LocationScaleDistribution::new(family, location, scale)?)
}

fn starting_fit(family: FamilyKind, set: &JudgementSet) -> Result<LocationScaleDistribution, FitError> {
    match fit_exact_symmetric(family, set) {
        Ok(fit) => Ok(fit.dist),
        Err(FitError::InsufficientStructure) => surrogate_start(family, set),
        Err(e) => Err(e),
    }
}

/// Normalized search coordinates around a starting fit.
struct Frame {
    family: FamilyKind,
    location: f64,
    scale: f64,
}

impl Frame {
    fn new(start: &LocationScaleDistribution) -> Self {
        Self { family: start.family(), location: start.location(), scale: start.scale() }
    }

    fn dist(&self, uv: &[f64]) -> Option<LocationScaleDistribution> {
        LocationScaleDistribution::new(self.family, self.location + self.scale * uv[0], self.scale * uv[1].exp()).ok()
    }

    /// Runs the three fixed simplexes, then restarts from the incumbent
    /// until a restart stops improving it.
    fn search<F>(&self, objective: F, nm: NelderMead) -> (LocationScaleDistribution, f64, OptimizerReport)
    where
        F: Fn(&LocationScaleDistribution) -> f64,
    {
        let f = |uv: &[f64]| self.dist(uv).map_or(f64::INFINITY, |d| objective(&d));
        let shapes: [[f64; 4]; 3] = [[0.1, 0.0, 0.0, 0.1], [0.5, 0.0, 0.0, 0.5], [0.25, 0.25, -0.25, 0.25]];
        let simplex = |at: &[f64], s: &[f64; 4]| {
            vec![at.to_vec(), vec![at[0] + s[0], at[1] + s[1]], vec![at[0] + s[2], at[1] + s[3]]]
        };
        let mut best_point = vec![0.0, 0.0];
        let mut best_value = f(&best_point);
        let mut iterations = 0;
        let mut converged = true;
        let mut run = |shape: &[f64; 4], best_point: &mut Vec<f64>, best_value: &mut f64| -> bool {
            let m = nm.minimize(f, simplex(best_point, shape));
            iterations += m.iterations;
            converged &= m.converged;
            if m.value < *best_value {
                let gained = *best_value - m.value;
                *best_point = m.point;
                *best_value = m.value;
                gained > nm.ftol
            } else {
                false
            }
        };
        for shape in &shapes {
            run(shape, &mut best_point, &mut best_value);
        }
        for k in 0..MAX_POLISH_RESTARTS {
            if nm.target.is_some_and(|t| best_value <= t) {
                break;
            }
            if !run(&shapes[k % 2], &mut best_point, &mut best_value) {
                break;
            }
        }
        let dist = self.dist(&best_point).expect("search stays at finite parameters");
        (dist, best_value, OptimizerReport { iterations, converged })
    }
}

/// Minimizes `sum (cdf(x_i) - p_i)^2` over location and scale > 0.
pub fn fit_least_squares(family: FamilyKind, set: &JudgementSet) -> Result<FitResult, FitError> {
    require_valid(set)?;
    if set.len() < 2 {
        return Err(FitError::InsufficientData { count: set.len() });
    }
    let start = starting_fit(family, set)?;
    let sse = |d: &LocationScaleDistribution| {
        set.judgements().iter().map(|j| (d.cdf_unchecked(j.value) - j.probability).powi(2)).sum::<f64>()
    };
    let nm = NelderMead { max_iter: MAX_ITERATIONS, ftol: LS_FTOL, xtol: XTOL, target: None };
    let (dist, _, report) = Frame::new(&start).search(sse, nm);
    Ok(FitResult::new(dist, set, FitMethod::LeastSquares, Some(report)))
}

/// Signed violation of each box: positive when the CDF misses the box,
/// negative (slack) when it passes through.
pub fn box_violations(dist: &LocationScaleDistribution, set: &JudgementSet) -> Vec<f64> {
    set.iter()
        .map(|(j, b)| {
            let (p_lo, p_hi) = b.probability_bounds(j.probability);
            let (x_lo, x_hi) = b.value_bounds(j.value);
            (p_lo - dist.cdf_unchecked(x_hi)).max(dist.cdf_unchecked(x_lo) - p_hi)
        })
        .collect()
}

fn worst_violation(dist: &LocationScaleDistribution, set: &JudgementSet) -> f64 {
    box_violations(dist, set).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Whether some member of `family` threads every imprecision box.
pub fn check_feasibility(family: FamilyKind, set: &JudgementSet) -> Result<FeasibilityResult, FitError> {
    require_valid(set)?;
    let start = if set.len() >= 2 {
        starting_fit(family, set)?
    } else {
        let j = set.judgements()[0];
        LocationScaleDistribution::new(family, j.value, 1.0)?
    };
    let nm = NelderMead { max_iter: MAX_ITERATIONS, ftol: 1e-15, xtol: XTOL, target: None };
    let (best, worst, optimizer) = Frame::new(&start).search(|d| worst_violation(d, set), nm);
    let feasible = worst <= FEASIBILITY_TOL;
    Ok(FeasibilityResult {
        feasible,
        witness: feasible.then_some(best),
        min_max_violation: worst.max(0.0),
        best,
        violations: box_violations(&best, set).into_iter().map(|v| v.max(0.0)).collect(),
        optimizer,
    })
}

/// Either a computed value or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok(T),
    Error { code: String, message: String },
}

impl<T> Outcome<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok(v) => Some(v),
            Outcome::Error { .. } => None,
        }
    }
}

impl<T> From<Result<T, FitError>> for Outcome<T> {
    fn from(r: Result<T, FitError>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Error { code: e.code().to_string(), message: e.to_string() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyFit {
    pub family: FamilyKind,
    pub exact: Outcome<FitResult>,
    pub least_squares: Outcome<FitResult>,
    pub feasibility: Outcome<FeasibilityResult>,
}

impl FamilyFit {
    /// The fit to show the expert: the exact interpolant when there is one,
    /// otherwise the least-squares fit.
    pub fn preferred(&self) -> Option<&FitResult> {
        self.exact.ok().or_else(|| self.least_squares.ok())
    }
}

/// Runs every fit for every family, in input order.
pub fn fit_all(families: &[FamilyKind], set: &JudgementSet) -> Result<Vec<FamilyFit>, FitError> {
    require_valid(set)?;
    if families.is_empty() {
        return Err(FitError::NoFamilies);
    }
    Ok(families
        .iter()
        .map(|&family| FamilyFit {
            family,
            exact: fit_exact_symmetric(family, set).into(),
            least_squares: fit_least_squares(family, set).into(),
            feasibility: check_feasibility(family, set).into(),
        })
        .collect())
}
