//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Oracles here are written from scratch (quadrature, bisection,
//! closed forms, grid search) and share nothing with the solver.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use elicit::cli;
use elicit::distributions::{standard_quantile, FamilyKind, LocationScaleDistribution};
use elicit::feedback::{feedback_quantiles, tail_report, FeedbackSpec, Rectangle};
use elicit::fitting::{check_feasibility, fit_exact_symmetric, fit_least_squares};
use elicit::judgements::{canonical_set, CanonicalKind, ImprecisionBox, Judgement, JudgementSet};
use elicit::session::{ElicitationSession, SessionError, SessionEvent, SessionState};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Check {
    let elapsed = start.elapsed();
    ensure(elapsed <= limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn t5() -> FamilyKind {
    FamilyKind::student_t(5).unwrap()
}

// ---- oracles --------------------------------------------------------------

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Student-t density with 5 degrees of freedom; the constant is
/// Γ(3) / (√(5π) Γ(5/2)) = 8 / (3π√5).
fn t5_pdf(z: f64) -> f64 {
    8.0 / (3.0 * PI * 5f64.sqrt()) * (1.0 + z * z / 5.0).powi(-3)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// P(Z <= z) for a symmetric standard density by quadrature from 0.
fn oracle_cdf(family: FamilyKind, z: f64) -> f64 {
    match family {
        FamilyKind::Cauchy => 0.5 + z.atan() / PI,
        FamilyKind::Normal => 0.5 + simpson(normal_pdf, 0.0, z, 20_000),
        _ => 0.5 + simpson(t5_pdf, 0.0, z, 20_000),
    }
}

fn oracle_quantile(family: FamilyKind, p: f64) -> f64 {
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if oracle_cdf(family, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Worst box violation of a member, straight from the threading rule.
fn violation(family: FamilyKind, set: &JudgementSet, loc: f64, scale: f64) -> f64 {
    set.iter()
        .map(|(j, b)| {
            let upper = oracle_cdf(family, (j.value + b.delta_x - loc) / scale);
            let lower = oracle_cdf(family, (j.value - b.delta_x - loc) / scale);
            ((j.probability - b.delta_p) - upper).max(lower - (j.probability + b.delta_p)).max(0.0)
        })
        .fold(0.0, f64::max)
}

// ---- criteria -------------------------------------------------------------

fn reference_quantiles() -> Check {
    let start = Instant::now();
    let q75 = standard_quantile(FamilyKind::Normal, 0.75).map_err(|e| e.to_string())?;
    let q90 = standard_quantile(FamilyKind::Normal, 0.9).map_err(|e| e.to_string())?;
    ensure((q75 - 0.6745).abs() <= 1e-4, || format!("q(0.75) = {q75}"))?;
    ensure((q90 - 1.2816).abs() <= 1e-4, || format!("q(0.9) = {q90}"))?;
    within_time(start, Duration::from_millis(100))
}

fn three_curve_multiplicity() -> Check {
    let start = Instant::now();
    let three = canonical_set(CanonicalKind::Three, false);
    let quartile = three.judgements()[2].value;
    let t5_scale = quartile / oracle_quantile(t5(), 0.75);
    let expected = [(FamilyKind::Normal, 1.0), (t5(), t5_scale), (FamilyKind::Cauchy, quartile)];
    for (family, scale) in expected {
        let fit = fit_exact_symmetric(family, &three).map_err(|e| format!("{family}: {e}"))?;
        ensure(fit.max_abs_residual <= 1e-9, || format!("{family}: residual {}", fit.max_abs_residual))?;
        ensure(fit.dist.location().abs() <= 1e-12, || format!("{family}: location {}", fit.dist.location()))?;
        ensure((fit.dist.scale() - scale).abs() <= 1e-6, || {
            format!("{family}: scale {} vs {scale}", fit.dist.scale())
        })?;
    }
    ensure((t5_scale - 0.9282).abs() < 1e-4, || format!("t5 oracle scale {t5_scale}"))?;
    within_time(start, Duration::from_secs(1))
}

fn boxed_five_feasible() -> Check {
    let start = Instant::now();
    let five = canonical_set(CanonicalKind::Five, true);
    for family in FamilyKind::reference_set() {
        let r = check_feasibility(family, &five).map_err(|e| e.to_string())?;
        ensure(r.feasible, || format!("{family} infeasible ({})", r.min_max_violation))?;
        let w = r.witness.ok_or("feasible without witness")?;
        ensure(violation(family, &five, w.location(), w.scale()) <= 1e-9, || {
            format!("{family}: witness {w} misses a box")
        })?;
    }
    let cauchy = check_feasibility(FamilyKind::Cauchy, &five).unwrap().witness.unwrap();
    // Closed form at location 0: each box bound is atan((x ± dx)/s)/π vs p ∓ dp - 1/2.
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    for (j, b) in five.iter() {
        let (x, p) = (j.value, j.probability);
        let need_upper = p - b.delta_p - 0.5; // cdf(x + dx) >= p - dp
        let need_lower = p + b.delta_p - 0.5; // cdf(x - dx) <= p + dp
        let xu = x + b.delta_x;
        let xl = x - b.delta_x;
        if need_upper > 0.0 {
            hi = hi.min(xu / (PI * need_upper).tan());
        } else if xu < 0.0 {
            lo = lo.max(xu / (PI * need_upper).tan());
        }
        if need_lower < 0.0 {
            hi = hi.min(xl / (PI * need_lower).tan());
        } else if xl > 0.0 {
            lo = lo.max(xl / (PI * need_lower).tan());
        }
    }
    ensure(lo < hi, || format!("oracle interval empty [{lo}, {hi}]"))?;
    ensure(cauchy.location().abs() < 1e-6, || format!("Cauchy witness location {}", cauchy.location()))?;
    ensure((lo..=hi).contains(&cauchy.scale()), || format!("scale {} outside oracle [{lo}, {hi}]", cauchy.scale()))?;
    ensure((0.52..=0.69).contains(&cauchy.scale()), || format!("Cauchy witness scale {}", cauchy.scale()))?;
    within_time(start, Duration::from_secs(5))
}

fn zero_slack_discrimination() -> Check {
    let start = Instant::now();
    let five = canonical_set(CanonicalKind::Five, false);
    let normal = check_feasibility(FamilyKind::Normal, &five).map_err(|e| e.to_string())?;
    ensure(normal.feasible && normal.min_max_violation <= 1e-9, || format!("normal: {}", normal.min_max_violation))?;
    let cauchy = check_feasibility(FamilyKind::Cauchy, &five).map_err(|e| e.to_string())?;
    ensure(!cauchy.feasible, || "Cauchy reported feasible".into())?;

    let n = 400;
    let mut grid = f64::INFINITY;
    for i in 0..n {
        let loc = -0.5 + i as f64 / (n - 1) as f64;
        for k in 0..n {
            let scale = 0.3 + 1.2 * k as f64 / (n - 1) as f64;
            grid = grid.min(violation(FamilyKind::Cauchy, &five, loc, scale));
        }
    }
    ensure((grid - 0.032).abs() <= 0.005, || format!("grid oracle {grid}"))?;
    let v = cauchy.min_max_violation;
    ensure((v - 0.032).abs() <= 0.005, || format!("Cauchy min-max violation {v}"))?;
    ensure(v <= grid + 1e-9 && grid - v <= 1e-3, || format!("solver {v} vs grid {grid}"))?;
    within_time(start, Duration::from_secs(10))
}

fn tail_sensitivity() -> Check {
    let three = canonical_set(CanonicalKind::Three, false);
    let fits: Vec<LocationScaleDistribution> = FamilyKind::reference_set()
        .iter()
        .map(|&f| fit_exact_symmetric(f, &three).map(|r| r.dist))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let thresholds = [1.5, 2.0, 3.0, 5.0];
    let report = tail_report(&fits, &thresholds).map_err(|e| e.to_string())?;
    for (k, d) in fits.iter().enumerate() {
        for (i, &t) in thresholds.iter().enumerate() {
            let oracle = 1.0 - oracle_cdf(d.family(), (t - d.location()) / d.scale());
            let got = report.exceedance[k][i];
            ensure((got - oracle).abs() <= 1e-9 + 1e-6 * oracle, || {
                format!("{}: P(X > {t}) = {got} vs {oracle}", d.family())
            })?;
        }
    }
    for i in 0..thresholds.len() {
        let e: Vec<f64> = report.exceedance.iter().map(|row| row[i]).collect();
        ensure(e[0] < e[1] && e[1] < e[2], || format!("ordering fails at t = {}: {e:?}", thresholds[i]))?;
    }
    let ratio = report.exceedance[2][2] / report.exceedance[0][2];
    ensure((ratio - 52.0).abs() <= 3.0, || format!("Cauchy:Normal at 3 = {ratio}"))
}

fn tertile_feedback() -> Check {
    let q = feedback_quantiles(&LocationScaleDistribution::standard(FamilyKind::Normal), &[1.0 / 3.0, 2.0 / 3.0])
        .map_err(|e| e.to_string())?;
    let oracle = oracle_quantile(FamilyKind::Normal, 2.0 / 3.0);
    ensure((oracle - 0.4307).abs() <= 1e-3, || format!("oracle tertile {oracle}"))?;
    ensure((q[0] + oracle).abs() <= 1e-6 && (q[1] - oracle).abs() <= 1e-6, || format!("tertiles {q:?} vs ±{oracle}"))?;
    ensure((q[0] + 0.4307).abs() <= 1e-3 && (q[1] - 0.4307).abs() <= 1e-3, || format!("tertiles {q:?}"))
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config { cases, failure_persistence: None, ..Config::default() },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn property_suites() -> Check {
    let start = Instant::now();
    let families = [FamilyKind::Normal, t5(), FamilyKind::Cauchy];
    for family in families {
        let d = LocationScaleDistribution::new(family, 0.3, 1.7).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 1..=999 {
            let p = i as f64 / 1000.0;
            let x = d.quantile(p).map_err(|e| e.to_string())?;
            let back = d.cdf(x).map_err(|e| e.to_string())?;
            ensure((back - p).abs() <= 1e-9, || format!("{family}: cdf(quantile({p})) = {back}"))?;
            ensure(x > prev, || format!("{family}: quantile not increasing at {p}"))?;
            prev = x;
            let z = standard_quantile(family, p).unwrap();
            let mirror = standard_quantile(family, 1.0 - p).unwrap();
            ensure((z + mirror).abs() <= 1e-9 * (1.0 + z.abs()), || format!("{family}: quantile asymmetry at {p}"))?;
        }
        let mut prev = 0.0;
        for i in 0..=2000 {
            let x = -20.0 + 0.02 * i as f64;
            let f = d.cdf(x).unwrap();
            ensure(f >= prev, || format!("{family}: cdf decreasing at {x}"))?;
            prev = f;
            let g = d.cdf(2.0 * 0.3 - x).unwrap();
            ensure((f + g - 1.0).abs() <= 1e-12, || format!("{family}: cdf asymmetry at {x}"))?;
        }
    }

    let five = canonical_set(CanonicalKind::Five, false);
    runner(20)
        .run(&(-50.0f64..50.0, 0.05f64..20.0), |(a, b)| {
            let moved = five.affine(a, b);
            for family in families {
                let base = fit_least_squares(family, &five).unwrap().dist;
                let fit = fit_least_squares(family, &moved).unwrap().dist;
                let tol = 1e-6 * b * base.scale();
                prop_assert!(
                    (fit.location() - (a + b * base.location())).abs() <= tol,
                    "{family} location at a={a}, b={b}"
                );
                prop_assert!((fit.scale() - b * base.scale()).abs() <= tol, "{family} scale at a={a}, b={b}");
                let exact = fit_exact_symmetric(family, &moved).unwrap().dist;
                let exact0 = fit_exact_symmetric(family, &five).unwrap().dist;
                prop_assert!((exact.location() - (a + b * exact0.location())).abs() <= 1e-9 * (1.0 + a.abs()));
                prop_assert!((exact.scale() - b * exact0.scale()).abs() <= 1e-9 * b);
            }
            Ok(())
        })
        .map_err(|e| format!("equivariance: {e}"))?;

    let instance = (proptest::collection::vec(-0.15f64..0.15, 5), 0.0f64..0.04, 0.0f64..0.08, 1.0f64..3.0);
    runner(50)
        .run(&instance, |(noise, dp, dx, grow)| {
            let mut set = JudgementSet::default();
            for (j, e) in five.judgements().iter().zip(&noise) {
                set.push(Judgement::new(j.probability, j.value + e), ImprecisionBox::new(dp, dx));
            }
            let bigger = set.clone().with_uniform_box(ImprecisionBox::new(dp * grow, dx * grow));
            for family in families {
                let small = check_feasibility(family, &set).unwrap();
                let large = check_feasibility(family, &bigger).unwrap();
                prop_assert!(!small.feasible || large.feasible, "{family}: lost feasibility");
                prop_assert!(
                    large.min_max_violation <= small.min_max_violation + 1e-7,
                    "{family}: {} -> {}",
                    small.min_max_violation,
                    large.min_max_violation
                );
            }
            Ok(())
        })
        .map_err(|e| format!("box monotonicity: {e}"))?;
    within_time(start, Duration::from_secs(30))
}

fn session_determinism() -> Check {
    let families = FamilyKind::reference_set().to_vec();
    let events = vec![
        SessionEvent::AddJudgements { judgements: canonical_set(CanonicalKind::Three, false) },
        SessionEvent::Fit { families: families.clone() },
        SessionEvent::ShowFeedback { spec: FeedbackSpec::default() },
        SessionEvent::Revise { judgements: canonical_set(CanonicalKind::Five, true) },
        SessionEvent::Fit { families: families.clone() },
        SessionEvent::ShowFeedback { spec: FeedbackSpec::default() },
        SessionEvent::Finalize,
    ];
    let live = events
        .iter()
        .cloned()
        .try_fold(ElicitationSession::new("acc", "X"), |s, e| s.apply_event(e))
        .map_err(|e| e.to_string())?;
    let saved = live.save();
    let loaded = ElicitationSession::load(&saved).map_err(|e| e.to_string())?;
    let wire: Vec<SessionEvent> =
        serde_json::from_str(&serde_json::to_string(&events).unwrap()).map_err(|e| e.to_string())?;
    let replayed = ElicitationSession::replay("acc", "X", wire).map_err(|e| e.to_string())?;
    ensure(replayed.save() == saved, || "replay differs from the saved document".into())?;
    ensure(loaded.replayed().map_err(|e| e.to_string())?.save() == saved, || "reload-and-replay differs".into())?;

    // Every prefix lands in a known state; check each event against the table there.
    let probes = [
        SessionEvent::AddJudgements { judgements: canonical_set(CanonicalKind::Three, false) },
        SessionEvent::Fit { families: families.clone() },
        SessionEvent::ShowFeedback { spec: FeedbackSpec::default() },
        SessionEvent::Revise { judgements: canonical_set(CanonicalKind::Five, false) },
        SessionEvent::Finalize,
    ];
    let legal = |state: SessionState, event: &SessionEvent, has_round: bool| -> bool {
        use SessionState::*;
        matches!(
            (state, event),
            (Collecting, SessionEvent::AddJudgements { .. })
                | (Fitted, SessionEvent::ShowFeedback { .. })
                | (FeedbackGiven, SessionEvent::Revise { .. })
                | (FeedbackGiven, SessionEvent::Finalize)
        ) || (state == Collecting && has_round && matches!(event, SessionEvent::Fit { .. }))
    };
    let mut session = ElicitationSession::new("acc", "X");
    for step in 0..=events.len() {
        for probe in &probes {
            let expected = legal(session.state, probe, !session.rounds.is_empty());
            match session.apply_event(probe.clone()) {
                Ok(_) => ensure(expected, || format!("{} accepted in {}", probe.name(), session.state))?,
                Err(SessionError::InvalidTransition { .. }) => {
                    ensure(!expected, || format!("{} rejected in {}", probe.name(), session.state))?
                }
                Err(e) => return Err(format!("{} in {}: {e}", probe.name(), session.state)),
            }
        }
        if step < events.len() {
            session = session.apply_event(events[step].clone()).unwrap();
        }
    }
    ensure(session.state == SessionState::Finalized, || "loop did not finalize".into())
}

/// Header and numeric columns of CSV text.
fn csv_columns(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for record in reader.records() {
        let record = record.map_err(|e| e.to_string())?;
        for (c, field) in cols.iter_mut().zip(record.iter()) {
            c.push(field.parse::<f64>().map_err(|e| e.to_string())?);
        }
    }
    Ok((header, cols))
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&v| v < x).clamp(1, xs.len() - 1);
    let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    ys[i - 1] + t * (ys[i] - ys[i - 1])
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(std::iter::once("elicit").chain(args.iter().copied()), &mut out, &mut err);
    ensure(code == 0, || format!("{args:?} exited {code}: {}", String::from_utf8_lossy(&err)))?;
    String::from_utf8(out).map_err(|e| e.to_string())
}

fn cli_figure_reproduction() -> Check {
    let csv = run_cli(&["figure", "--canonical", "three", "--families", "normal,t5,cauchy", "--format", "csv"])?;
    let (header, cols) = csv_columns(&csv)?;
    ensure(header.len() == 4, || format!("header {header:?}"))?;
    for (j, _) in canonical_set(CanonicalKind::Three, false).iter() {
        for (c, name) in header.iter().enumerate().skip(1) {
            let f = interpolate(&cols[0], &cols[c], j.value);
            ensure((f - j.probability).abs() <= 1e-6, || {
                format!("{name} at x = {}: {f} vs {}", j.value, j.probability)
            })?;
        }
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("fig2.csv");
    run_cli(&[
        "figure",
        "--canonical",
        "five",
        "--dp",
        "0.05",
        "--dx",
        "0.05",
        "--families",
        "normal,t5,cauchy",
        "--out",
        out.to_str().unwrap(),
    ])?;
    let (header, cols) = csv_columns(&std::fs::read_to_string(&out).map_err(|e| e.to_string())?)?;
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let rects: Vec<Rectangle> = serde_json::from_value(sidecar["rectangles"].clone()).map_err(|e| e.to_string())?;
    ensure(rects.len() == 5 && header.len() == 4, || format!("{} rectangles, header {header:?}", rects.len()))?;
    for r in &rects {
        for (c, name) in header.iter().enumerate().skip(1) {
            // A non-decreasing curve crosses the rectangle iff it is not
            // entirely above or below it across [x_min, x_max].
            let left = interpolate(&cols[0], &cols[c], r.x_min);
            let right = interpolate(&cols[0], &cols[c], r.x_max);
            ensure(left <= r.p_max && right >= r.p_min, || format!("{name} misses {r:?}"))?;
        }
    }
    Ok(())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("normal quartile and decile", reference_quantiles),
        ("three judgements: exact normal, t5 and Cauchy fits", three_curve_multiplicity),
        ("five judgements with 0.05 boxes: all families feasible", boxed_five_feasible),
        ("zero boxes: normal feasible, Cauchy infeasible by 0.032", zero_slack_discrimination),
        ("tail sensitivity of quartile-matched fits", tail_sensitivity),
        ("tertile feedback for the standard normal", tertile_feedback),
        ("property suites", property_suites),
        ("session replay determinism and transition table", session_determinism),
        ("CLI figure reproduction from CSV", cli_figure_reproduction),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let ms = start.elapsed().as_millis();
        match result {
            Ok(()) => println!("criterion {}: PASS  {name} ({ms} ms)", i + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({ms} ms): {e}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
