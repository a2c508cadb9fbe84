//! Event-sourced elicitation session: collect judgements, fit, show
//! feedback, then revise (opening a new round) or finalize.
//!
//! | state          | legal events                  | next state     |
//! |----------------|-------------------------------|----------------|
//! | Collecting     | AddJudgements                 | Collecting     |
//! | Collecting     | Fit (needs a round)           | Fitted         |
//! | Fitted         | ShowFeedback                  | FeedbackGiven  |
//! | FeedbackGiven  | Revise                        | Collecting     |
//! | FeedbackGiven  | Finalize                      | Finalized      |
//! | Finalized      | none                          |                |
//!
//! Sessions are values: [`ElicitationSession::apply_event`] returns a new
//! session and leaves the receiver untouched.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{FamilyKind, LocationScaleDistribution};
use crate::feedback::{feedback_report, FeedbackError, FeedbackReport, FeedbackSpec};
use crate::fitting::{fit_all, FamilyFit, FitError};
use crate::judgements::{JudgementSet, ValidationReport};

pub const SCHEMA_VERSION: u32 = 1;

const TOP_LEVEL_KEYS: [&str; 6] = ["schema_version", "id", "quantity_label", "state", "rounds", "events"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Collecting,
    Fitted,
    FeedbackGiven,
    Finalized,
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionState::Collecting => "collecting",
            SessionState::Fitted => "fitted",
            SessionState::FeedbackGiven => "feedback_given",
            SessionState::Finalized => "finalized",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SessionEvent {
    AddJudgements {
        judgements: JudgementSet,
    },
    Fit {
        families: Vec<FamilyKind>,
    },
    ShowFeedback {
        #[serde(default)]
        spec: FeedbackSpec,
    },
    Revise {
        judgements: JudgementSet,
    },
    Finalize,
}

impl SessionEvent {
    pub fn name(&self) -> &'static str {
        match self {
            SessionEvent::AddJudgements { .. } => "add_judgements",
            SessionEvent::Fit { .. } => "fit",
            SessionEvent::ShowFeedback { .. } => "show_feedback",
            SessionEvent::Revise { .. } => "revise",
            SessionEvent::Finalize => "finalize",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertResponse {
    Accepted,
    Revised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackShown {
    pub spec: FeedbackSpec,
    pub report: FeedbackReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Round {
    pub index: usize,
    pub judgement_set: JudgementSet,
    pub fits: Option<Vec<FamilyFit>>,
    pub feedback_shown: Option<FeedbackShown>,
    pub expert_response: Option<ExpertResponse>,
}

impl Round {
    fn new(index: usize, judgement_set: JudgementSet) -> Self {
        Self { index, judgement_set, fits: None, feedback_shown: None, expert_response: None }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("`{event}` is not allowed while the session is {state}")]
    InvalidTransition { state: SessionState, event: &'static str },
    #[error("invalid judgements: {0}")]
    InvalidJudgements(ValidationReport),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
    #[error("malformed session document at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported session document: {0}")]
    UnsupportedVersion(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElicitationSession {
    pub schema_version: u32,
    pub id: String,
    pub quantity_label: String,
    pub state: SessionState,
    pub rounds: Vec<Round>,
    pub events: Vec<SessionEvent>,
}

fn checked(set: &JudgementSet) -> Result<(), SessionError> {
    let report = set.validate();
    if report.is_ok() {
        Ok(())
    } else {
        Err(SessionError::InvalidJudgements(report))
    }
}

impl ElicitationSession {
    pub fn new(id: impl Into<String>, quantity_label: impl Into<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            id: id.into(),
            quantity_label: quantity_label.into(),
            state: SessionState::Collecting,
            rounds: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn current_round(&self) -> Option<&Round> {
        self.rounds.last()
    }

    /// Distributions shown as feedback for the current round: per family,
    /// the exact fit when available, otherwise least squares.
    pub fn current_fits(&self) -> Vec<LocationScaleDistribution> {
        self.current_round()
            .and_then(|r| r.fits.as_ref())
            .map(|fits| fits.iter().filter_map(|f| f.preferred().map(|r| r.dist)).collect())
            .unwrap_or_default()
    }

    pub fn is_legal(&self, event: &SessionEvent) -> bool {
        use SessionEvent::*;
        use SessionState::*;
        matches!(
            (self.state, event),
            (Collecting, AddJudgements { .. })
                | (Collecting, Fit { .. })
                | (Fitted, ShowFeedback { .. })
                | (FeedbackGiven, Revise { .. })
                | (FeedbackGiven, Finalize)
        ) && !(matches!(event, Fit { .. }) && self.rounds.is_empty())
    }

    pub fn apply_event(&self, event: SessionEvent) -> Result<Self, SessionError> {
        if !self.is_legal(&event) {
            return Err(SessionError::InvalidTransition { state: self.state, event: event.name() });
        }
        let mut next = self.clone();
        match &event {
            SessionEvent::AddJudgements { judgements } => {
                checked(judgements)?;
                match next.rounds.last_mut() {
                    Some(round) => round.judgement_set = judgements.clone(),
                    None => next.rounds.push(Round::new(0, judgements.clone())),
                }
            }
            SessionEvent::Fit { families } => {
                let round = next.rounds.last_mut().expect("legal fit has a round");
                checked(&round.judgement_set)?;
                round.fits = Some(fit_all(families, &round.judgement_set)?);
                next.state = SessionState::Fitted;
            }
            SessionEvent::ShowFeedback { spec } => {
                let report = feedback_report(&self.current_fits(), spec)?;
                let round = next.rounds.last_mut().expect("fitted session has a round");
                round.feedback_shown = Some(FeedbackShown { spec: spec.clone(), report });
                next.state = SessionState::FeedbackGiven;
            }
            SessionEvent::Revise { judgements } => {
                checked(judgements)?;
                let index = next.rounds.len();
                next.rounds.last_mut().expect("feedback was given on a round").expert_response =
                    Some(ExpertResponse::Revised);
                next.rounds.push(Round::new(index, judgements.clone()));
                next.state = SessionState::Collecting;
            }
            SessionEvent::Finalize => {
                next.rounds.last_mut().expect("feedback was given on a round").expert_response =
                    Some(ExpertResponse::Accepted);
                next.state = SessionState::Finalized;
            }
        }
        next.events.push(event);
        Ok(next)
    }

    /// Rebuilds a session from its identity and event log.
    pub fn replay<I>(id: &str, quantity_label: &str, events: I) -> Result<Self, SessionError>
    where
        I: IntoIterator<Item = SessionEvent>,
    {
        events.into_iter().try_fold(Self::new(id, quantity_label), |s, e| s.apply_event(e))
    }

    /// Replays this session's own event log from scratch.
    pub fn replayed(&self) -> Result<Self, SessionError> {
        Self::replay(&self.id, &self.quantity_label, self.events.iter().cloned())
    }

    pub fn save(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sessions always serialize");
        s.push('\n');
        s
    }

    pub fn load(document: &str) -> Result<Self, SessionError> {
        let parse_err =
            |e: serde_json::Error| SessionError::Parse { line: e.line(), column: e.column(), message: e.to_string() };
        let value: serde_json::Value = serde_json::from_str(document).map_err(parse_err)?;
        let obj = value.as_object().ok_or_else(|| SessionError::Parse {
            line: 1,
            column: 1,
            message: "session document must be a JSON object".into(),
        })?;
        match obj.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(SessionError::UnsupportedVersion(format!(
                    "schema_version {v} (this build reads {SCHEMA_VERSION})"
                )))
            }
            None => {
                return Err(SessionError::Parse {
                    line: 1,
                    column: 1,
                    message: "missing or non-integer schema_version".into(),
                })
            }
        }
        if let Some(key) = obj.keys().find(|k| !TOP_LEVEL_KEYS.contains(&k.as_str())) {
            return Err(SessionError::UnsupportedVersion(format!("unknown field `{key}`")));
        }
        serde_json::from_str(document).map_err(parse_err)
    }
}
