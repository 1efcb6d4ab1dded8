//! Events, the closed event catalog, and the standing registers.
//!
//! Events arrive as JSON Lines and are validated against [`EventCatalog`] on
//! ingest. `seq` is the authoritative order; `ts` has to agree with it.

mod ingest;
mod log;
mod registers;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Serialize, Serializer};

pub use ingest::{ingest_events, EventLogBuilder, IngestError};
pub use log::{events_before, EventLog};
pub use registers::{
    load_registers, CompetenceEntry, DatasheetEntry, IndependenceEntry, JobDescriptionEntry,
    OrgEntry, RegisterError, RegisterSet, COMPETENCE_FILE, DATASHEETS_FILE, INDEPENDENCE_FILE,
    JOBDESC_FILE, ORGCHART_FILE,
};
pub use ingest::IngestErrorKind;

macro_rules! event_types {
    ($($variant:ident => $name:literal [$($field:literal),*]),* $(,)?) => {
        /// Every event type the bot understands.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum EventType { $($variant),* }

        impl EventType {
            pub const ALL: &'static [EventType] = &[$(EventType::$variant),*];

            pub fn as_str(self) -> &'static str {
                match self { $(EventType::$variant => $name),* }
            }

            fn standard_fields(self) -> &'static [&'static str] {
                match self { $(EventType::$variant => &[$($field),*]),* }
            }
        }
    };
}

event_types! {
    DatasetRegistered => "dataset.registered" ["dataset_id"],
    DatasetBiasAssessment => "dataset.bias_assessment" ["dataset_id", "method"],
    BuildTrainingRun => "build.training_run" ["build_id", "dataset_id"],
    BuildRelease => "build.release" ["build_id"],
    DocReviewCompleted => "doc.review_completed" ["doc_id", "review_type", "severity", "author_org"],
    IssueOpened => "issue.opened" ["issue_id", "label"],
    IssueResolved => "issue.resolved" ["issue_id"],
    JobPostingDraft => "job_posting.draft" ["posting_id", "text"],
    JobPostingPublished => "job_posting.published" ["posting_id"],
    ActivitySession => "activity.session" ["start", "end"],
    ModelFeatureSnapshot => "model.feature_snapshot" ["feature", "phase", "histogram"],
    RuleOverride => "rule.override" ["rule_ref", "override_id"],
    RuleJustification => "rule.justification" ["override_id", "reason"],
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for EventType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// The closed set of event types and the payload fields each must carry.
#[derive(Debug, Clone)]
pub struct EventCatalog {
    _private: (),
}

impl Default for EventCatalog {
    fn default() -> Self {
        Self::standard()
    }
}

impl EventCatalog {
    pub fn standard() -> Self {
        EventCatalog { _private: () }
    }

    pub fn lookup(&self, name: &str) -> Option<EventType> {
        EventType::ALL.iter().copied().find(|t| t.as_str() == name)
    }

    pub fn required_fields(&self, ty: EventType) -> &'static [&'static str] {
        ty.standard_fields()
    }

    pub fn types(&self) -> impl Iterator<Item = EventType> {
        EventType::ALL.iter().copied()
    }
}

/// A scalar payload value.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum PayloadValue {
    Str(String),
    Num(f64),
    Bool(bool),
}

impl PayloadValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            PayloadValue::Str(s) => Some(s),
            _ => None,
        }
    }

    /// Text form used for joins, filters and messages: integral numbers print
    /// without a fractional part.
    pub fn render(&self) -> String {
        match self {
            PayloadValue::Str(s) => s.clone(),
            PayloadValue::Num(n) if n.fract() == 0.0 && n.abs() < 1e15 => {
                format!("{}", *n as i64)
            }
            PayloadValue::Num(n) => n.to_string(),
            PayloadValue::Bool(b) => b.to_string(),
        }
    }
}

/// Hashable identity of a payload value, used as an index key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JoinKey {
    Str(String),
    Num(u64),
    Bool(bool),
}

impl From<&PayloadValue> for JoinKey {
    fn from(v: &PayloadValue) -> Self {
        match v {
            PayloadValue::Str(s) => JoinKey::Str(s.clone()),
            // +0.0 and -0.0 compare equal, so they must share a key
            PayloadValue::Num(n) => JoinKey::Num(if *n == 0.0 { 0 } else { n.to_bits() }),
            PayloadValue::Bool(b) => JoinKey::Bool(*b),
        }
    }
}

/// One timestamped occurrence in the software lifecycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub seq: u64,
    pub ts: DateTime<Utc>,
    #[serde(rename = "type")]
    pub event_type: EventType,
    pub project: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actor: Option<String>,
    pub payload: BTreeMap<String, PayloadValue>,
}

impl Event {
    pub fn field(&self, name: &str) -> Option<&PayloadValue> {
        self.payload.get(name)
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        self.payload.get(name).and_then(PayloadValue::as_str)
    }

    /// The event as one JSON line, in the ingest format.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&EventLine::from(self)).expect("event serializes")
    }
}

#[derive(Serialize)]
struct EventLine<'a> {
    seq: u64,
    ts: String,
    #[serde(rename = "type")]
    event_type: &'static str,
    project: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    actor: Option<&'a str>,
    payload: &'a BTreeMap<String, PayloadValue>,
}

impl<'a> From<&'a Event> for EventLine<'a> {
    fn from(e: &'a Event) -> Self {
        EventLine {
            seq: e.seq,
            ts: format_ts(&e.ts),
            event_type: e.event_type.as_str(),
            project: &e.project,
            actor: e.actor.as_deref(),
            payload: &e.payload,
        }
    }
}

/// RFC 3339 with a `Z` suffix, sub-seconds only when present.
pub fn format_ts(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true)
}

/// Parses an RFC 3339 timestamp that must be in UTC with a `Z` suffix.
pub fn parse_utc(s: &str) -> Result<DateTime<Utc>, String> {
    if !(s.ends_with('Z') || s.ends_with('z')) {
        return Err(format!("timestamp `{s}` must be UTC with a Z suffix"));
    }
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("invalid timestamp `{s}`: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_closed() {
        let cat = EventCatalog::standard();
        assert_eq!(cat.types().count(), 13);
        assert_eq!(cat.lookup("issue.opened"), Some(EventType::IssueOpened));
        assert_eq!(cat.lookup("coffee.break"), None);
        assert_eq!(
            cat.required_fields(EventType::ModelFeatureSnapshot),
            &["feature", "phase", "histogram"]
        );
    }

    #[test]
    fn render_numbers() {
        assert_eq!(PayloadValue::Num(3.0).render(), "3");
        assert_eq!(PayloadValue::Num(0.5).render(), "0.5");
        assert_eq!(PayloadValue::Bool(true).render(), "true");
        assert_eq!(JoinKey::from(&PayloadValue::Num(-0.0)), JoinKey::from(&PayloadValue::Num(0.0)));
    }

    #[test]
    fn timestamps_must_be_utc() {
        assert!(parse_utc("2025-01-06T09:00:00Z").is_ok());
        assert!(parse_utc("2025-01-06T09:00:00+01:00").is_err());
        assert_eq!(
            format_ts(&parse_utc("2025-01-06T09:00:00.500Z").unwrap()),
            "2025-01-06T09:00:00.500Z"
        );
    }
}
