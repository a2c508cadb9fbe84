//! Command-line front end. [`run`] does all the work so it can be driven
//! from tests; the `elicit` binary only forwards `argv` and the exit code.
//!
//! Exit codes: 0 on success (an infeasible family is an answer, not an
//! error), 1 when the judgements or a session event are rejected, 2 on
//! usage errors and unreadable inputs.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::distributions::{FamilyKind, LocationScaleDistribution};
use crate::feedback::{feedback_report, figure_data, FeedbackReport, FeedbackSpec, DEFAULT_FIGURE_POINTS, TERTILES};
use crate::fitting::{check_feasibility, fit_all, FamilyFit, FeasibilityResult, FitError, FitResult, Outcome};
use crate::judgements::{canonical_set, CanonicalKind, ImprecisionBox, JudgementSet};
use crate::service::FamilyFeasibility;
use crate::session::{ElicitationSession, SessionError, SessionEvent};

#[derive(Debug, Parser)]
#[command(name = "elicit", version, about = "Fit and check distributions against expert percentile judgements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit each family exactly and by least squares.
    Fit(FitArgs),
    /// Ask whether each family can pass through every imprecision box.
    Feasible(FitArgs),
    /// Quantiles, tail probabilities and divergences of the fitted families.
    Feedback(FeedbackArgs),
    /// Sample the fitted CDFs with the judgements and boxes.
    Figure(FigureArgs),
    /// Create, update and inspect session documents.
    #[command(subcommand)]
    Session(SessionCommand),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Args)]
#[group(skip)]
struct InputArgs {
    /// Judgement file (`.csv`, otherwise JSON).
    #[arg(long, value_name = "PATH", required_unless_present = "canonical", conflicts_with = "canonical")]
    judgements: Option<PathBuf>,
    /// Built-in standard-normal judgements.
    #[arg(long, value_name = "three|five")]
    canonical: Option<CanonicalKind>,
    /// Probability half-width applied to every judgement.
    #[arg(long, value_name = "DELTA")]
    dp: Option<f64>,
    /// Value half-width applied to every judgement.
    #[arg(long, value_name = "DELTA")]
    dx: Option<f64>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Families, comma separated or repeated (normal, t<dof>, cauchy).
    #[arg(long = "family", visible_alias = "families", value_delimiter = ',', value_name = "FAMILY")]
    families: Vec<FamilyKind>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Debug, Args)]
struct FeedbackArgs {
    #[command(flatten)]
    fit: FitArgs,
    /// Probabilities to report quantiles at (default: tertiles).
    #[arg(long, value_delimiter = ',', value_name = "P")]
    probs: Vec<f64>,
    /// Tail thresholds (default: the first fit's 90/99/99.9% quantiles).
    #[arg(long, value_delimiter = ',', value_name = "X", allow_negative_numbers = true)]
    thresholds: Vec<f64>,
}

#[derive(Debug, Args)]
struct FigureArgs {
    #[command(flatten)]
    fit: FitArgs,
    /// `.svg`, `.csv` or `.json`; SVG and CSV get a `.json` sidecar.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FIGURE_POINTS)]
    n_points: usize,
    #[arg(long, requires = "x_max", allow_negative_numbers = true)]
    x_min: Option<f64>,
    #[arg(long, requires = "x_min", allow_negative_numbers = true)]
    x_max: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum SessionCommand {
    /// Write an empty session document.
    New {
        #[arg(long)]
        id: String,
        #[arg(long, default_value = "")]
        label: String,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Apply events (JSON, or `@path`) in order and rewrite the document.
    Apply {
        session: PathBuf,
        #[arg(long = "event", required = true, value_name = "JSON|@PATH")]
        events: Vec<String>,
    },
    Show {
        session: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Rebuild a session from its event log and print the result.
    Replay {
        session: PathBuf,
        /// Exit 1 unless the replay is byte-identical to the file.
        #[arg(long)]
        check: bool,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory holding one JSON document per session.
    #[arg(long, default_value = "sessions")]
    store: PathBuf,
    /// Built UI bundle to serve at `/`.
    #[arg(long)]
    ui: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Rejected(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Rejected(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Rejected(m) => m,
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::InvalidJudgements(r) => CliError::Rejected(format!("invalid judgements:\n{r}")),
            FitError::NoFamilies => CliError::Usage(e.to_string()),
            other => CliError::Rejected(other.to_string()),
        }
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Parse { .. } | SessionError::UnsupportedVersion(_) => CliError::Usage(e.to_string()),
            other => CliError::Rejected(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn is_ext(path: &Path, ext: &str) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

impl InputArgs {
    fn load(&self) -> Result<JudgementSet, CliError> {
        let set = match (&self.judgements, self.canonical) {
            (Some(path), _) => {
                let text = read_file(path)?;
                let parsed = if is_ext(path, "csv") {
                    JudgementSet::read_csv(text.as_bytes())
                } else {
                    JudgementSet::from_json(&text)
                };
                parsed.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            (None, Some(kind)) => canonical_set(kind, false),
            (None, None) => return Err(CliError::Usage("give --judgements or --canonical".into())),
        };
        if self.dp.is_none() && self.dx.is_none() {
            return Ok(set);
        }
        let dp = self.dp.unwrap_or(0.0);
        let dx = self.dx.unwrap_or(0.0);
        Ok(set.with_uniform_box(ImprecisionBox::new(dp, dx)))
    }
}

impl FitArgs {
    fn families(&self) -> Vec<FamilyKind> {
        if self.families.is_empty() {
            FamilyKind::reference_set().to_vec()
        } else {
            self.families.clone()
        }
    }

    fn fit(&self) -> Result<(JudgementSet, Vec<FamilyFit>), CliError> {
        let set = self.input.load()?;
        let fits = fit_all(&self.families(), &set)?;
        Ok((set, fits))
    }
}

/// The curve to show for a family: the widest-margin member when the
/// judgements carry boxes and the family threads them, otherwise the exact
/// (or least-squares) fit.
fn shown(fit: &FamilyFit, set: &JudgementSet) -> Option<LocationScaleDistribution> {
    if set.has_boxes() {
        if let Some(w) = fit.feasibility.ok().and_then(|f| f.witness) {
            return Some(w);
        }
    }
    fit.preferred().map(|r| r.dist)
}

fn shown_all(fits: &[FamilyFit], set: &JudgementSet) -> Result<Vec<LocationScaleDistribution>, CliError> {
    fits.iter()
        .map(|f| shown(f, set).ok_or_else(|| CliError::Rejected(format!("no fit available for {}", f.family))))
        .collect()
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn csv_rows(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for r in rows {
        w.write_record(r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

/// Left-aligned columns separated by two spaces.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut s = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells.zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(s, "{}", parts.join("  ").trim_end());
    };
    line(&mut header.iter().copied());
    for r in rows {
        line(&mut r.iter().map(String::as_str));
    }
    s
}

fn num(x: f64) -> String {
    let s = format!("{x:.6}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

fn fit_rows(fits: &[FamilyFit]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for f in fits {
        for (method, outcome) in [("exact", &f.exact), ("least_squares", &f.least_squares)] {
            rows.push(match outcome {
                Outcome::Ok(FitResult { dist, max_abs_residual, sse, .. }) => vec![
                    f.family.to_string(),
                    method.to_string(),
                    num(dist.location()),
                    num(dist.scale()),
                    format!("{max_abs_residual:.3e}"),
                    format!("{sse:.3e}"),
                    "ok".to_string(),
                ],
                Outcome::Error { code, .. } => vec![
                    f.family.to_string(),
                    method.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    code.clone(),
                ],
            });
        }
    }
    rows
}

fn cmd_fit(args: &FitArgs) -> Result<String, CliError> {
    let (_, fits) = args.fit()?;
    let header = ["family", "method", "location", "scale", "max_abs_residual", "sse", "status"];
    Ok(match args.format {
        Format::Json => json(&fits),
        Format::Csv => {
            // Full precision for machine consumers.
            let rows: Vec<Vec<String>> = fits
                .iter()
                .flat_map(|f| {
                    [("exact", &f.exact), ("least_squares", &f.least_squares)].map(|(m, o)| match o {
                        Outcome::Ok(r) => vec![
                            f.family.to_string(),
                            m.to_string(),
                            r.dist.location().to_string(),
                            r.dist.scale().to_string(),
                            r.max_abs_residual.to_string(),
                            r.sse.to_string(),
                            "ok".to_string(),
                        ],
                        Outcome::Error { code, .. } => {
                            vec![
                                f.family.to_string(),
                                m.to_string(),
                                "".into(),
                                "".into(),
                                "".into(),
                                "".into(),
                                code.clone(),
                            ]
                        }
                    })
                })
                .collect();
            csv_rows(&header, &rows)
        }
        Format::Table => table(&header, &fit_rows(&fits)),
    })
}

fn cmd_feasible(args: &FitArgs) -> Result<String, CliError> {
    let set = args.input.load()?;
    let report = set.validate();
    if !report.is_ok() {
        return Err(FitError::InvalidJudgements(report).into());
    }
    let results: Vec<FamilyFeasibility> = args
        .families()
        .into_iter()
        .map(|family| FamilyFeasibility { family, feasibility: check_feasibility(family, &set).into() })
        .collect();
    let header = ["family", "verdict", "min_max_violation", "location", "scale"];
    let row = |r: &FamilyFeasibility, fmt: &dyn Fn(f64) -> String| match &r.feasibility {
        Outcome::Ok(FeasibilityResult { feasible, witness, best, min_max_violation, .. }) => {
            let d = witness.unwrap_or(*best);
            vec![
                r.family.to_string(),
                if *feasible { "feasible" } else { "infeasible" }.to_string(),
                fmt(*min_max_violation),
                fmt(d.location()),
                fmt(d.scale()),
            ]
        }
        Outcome::Error { code, .. } => {
            vec![r.family.to_string(), code.clone(), String::new(), String::new(), String::new()]
        }
    };
    Ok(match args.format {
        Format::Json => json(&results),
        Format::Csv => csv_rows(&header, &results.iter().map(|r| row(r, &|x| x.to_string())).collect::<Vec<_>>()),
        Format::Table => {
            let rows: Vec<Vec<String>> = results.iter().map(|r| row(r, &num)).collect();
            let mut s = table(&header, &rows);
            s.push_str("location/scale: widest-margin member when feasible, least-violating member otherwise\n");
            s
        }
    })
}

fn feedback_csv(report: &FeedbackReport, labels: &[String]) -> String {
    let mut rows = Vec::new();
    for q in &report.quantiles {
        for (p, v) in q.probabilities.iter().zip(&q.values) {
            rows.push(vec!["quantile".into(), q.family.to_string(), String::new(), p.to_string(), v.to_string()]);
        }
    }
    let tails = &report.tails;
    for (k, ex) in tails.exceedance.iter().enumerate() {
        for (t, e) in tails.thresholds.iter().zip(ex) {
            rows.push(vec!["exceedance".into(), labels[k].clone(), String::new(), t.to_string(), e.to_string()]);
        }
    }
    for r in &tails.ratios {
        for (t, v) in tails.thresholds.iter().zip(&r.ratios) {
            rows.push(vec![
                "tail_ratio".into(),
                labels[r.numerator].clone(),
                labels[r.denominator].clone(),
                t.to_string(),
                v.to_string(),
            ]);
        }
    }
    for d in &report.divergences {
        rows.push(vec![
            "kolmogorov".into(),
            labels[d.a].clone(),
            labels[d.b].clone(),
            d.divergence.argmax.to_string(),
            d.divergence.kolmogorov.to_string(),
        ]);
    }
    csv_rows(&["kind", "a", "b", "at", "value"], &rows)
}

fn feedback_table(report: &FeedbackReport, labels: &[String]) -> String {
    let mut s = String::new();
    let probs = report.quantiles.first().map(|q| q.probabilities.clone()).unwrap_or_default();
    let mut header = vec!["family".to_string(), "location".into(), "scale".into()];
    header.extend(probs.iter().map(|p| format!("q({p:.4})")));
    let rows: Vec<Vec<String>> = report
        .quantiles
        .iter()
        .zip(labels)
        .map(|(q, l)| {
            let mut r = vec![l.clone(), num(q.dist.location()), num(q.dist.scale())];
            r.extend(q.values.iter().map(|v| num(*v)));
            r
        })
        .collect();
    s.push_str(&table(&header.iter().map(String::as_str).collect::<Vec<_>>(), &rows));

    let tails = &report.tails;
    s.push('\n');
    let mut header = vec!["P(X > t)".to_string()];
    header.extend(tails.thresholds.iter().map(|t| format!("t={t:.4}")));
    let mut rows: Vec<Vec<String>> = tails
        .exceedance
        .iter()
        .zip(labels)
        .map(|(ex, l)| std::iter::once(l.clone()).chain(ex.iter().map(|e| format!("{e:.4e}"))).collect())
        .collect();
    for r in &tails.ratios {
        rows.push(
            std::iter::once(format!("{}/{}", labels[r.numerator], labels[r.denominator]))
                .chain(r.ratios.iter().map(|v| format!("{v:.4}")))
                .collect(),
        );
    }
    s.push_str(&table(&header.iter().map(String::as_str).collect::<Vec<_>>(), &rows));

    if !report.divergences.is_empty() {
        s.push('\n');
        let rows: Vec<Vec<String>> = report
            .divergences
            .iter()
            .map(|d| {
                vec![
                    labels[d.a].clone(),
                    labels[d.b].clone(),
                    format!("{:.6}", d.divergence.kolmogorov),
                    format!("{:.4}", d.divergence.argmax),
                ]
            })
            .collect();
        s.push_str(&table(&["a", "b", "max |F_a - F_b|", "at x"], &rows));
    }
    s
}

fn cmd_feedback(args: &FeedbackArgs) -> Result<String, CliError> {
    let (set, fits) = args.fit.fit()?;
    let dists = shown_all(&fits, &set)?;
    let spec = FeedbackSpec {
        probabilities: if args.probs.is_empty() { TERTILES.to_vec() } else { args.probs.clone() },
        thresholds: args.thresholds.clone(),
    };
    let report = feedback_report(&dists, &spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let labels: Vec<String> = fits.iter().map(|f| f.family.to_string()).collect();
    Ok(match args.fit.format {
        Format::Json => json(&report),
        Format::Csv => feedback_csv(&report, &labels),
        Format::Table => feedback_table(&report, &labels),
    })
}

fn cmd_figure(args: &FigureArgs) -> Result<String, CliError> {
    let (set, fits) = args.fit.fit()?;
    let dists = shown_all(&fits, &set)?;
    let range = args.x_min.zip(args.x_max);
    let fig = figure_data(&dists, &set, range, args.n_points).map_err(|e| CliError::Usage(e.to_string()))?;
    let Some(out) = &args.out else {
        return Ok(match args.fit.format {
            Format::Json => json(&fig),
            Format::Csv | Format::Table => fig.to_csv(),
        });
    };
    let mut written = Vec::new();
    if is_ext(out, "json") {
        write_file(out, &json(&fig))?;
    } else {
        let body = if is_ext(out, "svg") {
            fig.to_svg()
        } else if is_ext(out, "csv") {
            fig.to_csv()
        } else {
            return Err(CliError::Usage(format!("{}: output must end in .svg, .csv or .json", out.display())));
        };
        write_file(out, &body)?;
        let sidecar = out.with_extension("json");
        write_file(&sidecar, &fig.sidecar_json())?;
        written.push(out.clone());
        written.push(sidecar);
    }
    if written.is_empty() {
        written.push(out.clone());
    }
    Ok(written.iter().map(|p| format!("wrote {}\n", p.display())).collect())
}

fn load_session(path: &Path) -> Result<ElicitationSession, CliError> {
    let text = read_file(path)?;
    ElicitationSession::load(&text).map_err(|e| match e {
        SessionError::Parse { .. } | SessionError::UnsupportedVersion(_) => {
            CliError::Usage(format!("{}: {e}", path.display()))
        }
        other => other.into(),
    })
}

fn parse_event(arg: &str) -> Result<SessionEvent, CliError> {
    let (text, origin) = match arg.strip_prefix('@') {
        Some(path) => (read_file(Path::new(path))?, path.to_string()),
        None => (arg.to_string(), "--event".to_string()),
    };
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{origin}: invalid event: {e}")))
}

fn session_table(s: &ElicitationSession) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "id: {}", s.id);
    let _ = writeln!(out, "quantity: {}", s.quantity_label);
    let _ = writeln!(out, "state: {}", s.state);
    let _ = writeln!(out, "events: {}", s.events.len());
    for r in &s.rounds {
        let _ = writeln!(out, "\nround {} ({} judgements)", r.index, r.judgement_set.len());
        if let Some(fits) = &r.fits {
            let rows: Vec<Vec<String>> = fits
                .iter()
                .map(|f| {
                    let (loc, scale) =
                        f.preferred().map(|p| (num(p.dist.location()), num(p.dist.scale()))).unwrap_or_default();
                    let verdict = match &f.feasibility {
                        Outcome::Ok(r) if r.feasible => "feasible".to_string(),
                        Outcome::Ok(_) => "infeasible".to_string(),
                        Outcome::Error { code, .. } => code.clone(),
                    };
                    vec![f.family.to_string(), loc, scale, verdict]
                })
                .collect();
            out.push_str(&table(&["family", "location", "scale", "boxes"], &rows));
        }
        if let Some(resp) = r.expert_response {
            let _ = writeln!(out, "expert: {}", serde_json::to_value(resp).expect("serializes").as_str().unwrap_or(""));
        }
    }
    out
}

fn cmd_session(cmd: &SessionCommand) -> Result<String, CliError> {
    match cmd {
        SessionCommand::New { id, label, out } => {
            let s = ElicitationSession::new(id.clone(), label.clone());
            let doc = s.save();
            write_file(out, &doc)?;
            Ok(doc)
        }
        SessionCommand::Apply { session, events } => {
            let events = events.iter().map(|e| parse_event(e)).collect::<Result<Vec<_>, _>>()?;
            let mut s = load_session(session)?;
            for e in events {
                s = s.apply_event(e)?;
            }
            let doc = s.save();
            write_file(session, &doc)?;
            Ok(doc)
        }
        SessionCommand::Show { session, format } => {
            let s = load_session(session)?;
            Ok(match format {
                Format::Json => s.save(),
                Format::Table | Format::Csv => session_table(&s),
            })
        }
        SessionCommand::Replay { session, check, out } => {
            let original = read_file(session)?;
            let s = load_session(session)?;
            let doc = s.replayed()?.save();
            if let Some(out) = out {
                write_file(out, &doc)?;
            }
            if *check && doc != original {
                return Err(CliError::Rejected(format!(
                    "{}: replaying the event log does not reproduce the document",
                    session.display()
                )));
            }
            Ok(doc)
        }
    }
}

fn cmd_serve(args: &ServeArgs) -> Result<String, CliError> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Usage(e.to_string()))?;
    runtime
        .block_on(crate::service::serve(args.addr, args.store.clone(), args.ui.clone()))
        .map_err(|e| CliError::Usage(format!("serve: {e}")))?;
    Ok(String::new())
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                2
            } else {
                let _ = out.write_all(text.as_bytes());
                0
            };
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Feasible(a) => cmd_feasible(a),
        Command::Feedback(a) => cmd_feedback(a),
        Command::Figure(a) => cmd_figure(a),
        Command::Session(c) => cmd_session(c),
        Command::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}
