use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde_json::{Map, Value as Json};

use super::{parse_utc, Event, EventCatalog, EventLog, EventType, PayloadValue};
use crate::analytics::Histogram;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestErrorKind {
    Malformed,
    UnknownType,
    MissingField,
    SeqRegression,
    TsRegression,
    /// Register files only.
    Invariant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestError {
    /// 1-based line in the source, 0 when not tied to a line.
    pub line: usize,
    pub kind: IngestErrorKind,
    pub message: String,
    /// Register file name, when the error comes from a register.
    pub file: Option<String>,
}

impl IngestError {
    pub(crate) fn new(line: usize, kind: IngestErrorKind, message: impl Into<String>) -> Self {
        IngestError {
            line,
            kind,
            message: message.into(),
            file: None,
        }
    }
}

impl fmt::Display for IngestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.file {
            Some(file) if self.line > 0 => write!(f, "{file}:{}: {}", self.line, self.message),
            Some(file) => write!(f, "{file}: {}", self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

impl std::error::Error for IngestError {}

/// Validates events one line at a time. Both batch ingest and the streaming
/// watch mode go through this, so they accept exactly the same events.
#[derive(Debug, Default)]
pub struct EventLogBuilder {
    catalog: EventCatalog,
    log: EventLog,
    last: Option<(u64, DateTime<Utc>)>,
}

impl EventLogBuilder {
    pub fn new(catalog: EventCatalog) -> Self {
        EventLogBuilder {
            catalog,
            log: EventLog::default(),
            last: None,
        }
    }

    /// The events accepted so far.
    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn finish(self) -> EventLog {
        self.log
    }

    /// Validates one line and appends the event on success. A rejected line
    /// leaves the log untouched.
    pub fn push_line(&mut self, line_no: usize, line: &str) -> Result<&Event, IngestError> {
        let event = self.parse(line_no, line)?;
        if let Some((last_seq, last_ts)) = self.last {
            if event.seq <= last_seq {
                return Err(IngestError::new(
                    line_no,
                    IngestErrorKind::SeqRegression,
                    format!(
                        "seq regression at line {line_no}: {} follows {last_seq}",
                        event.seq
                    ),
                ));
            }
            if event.ts < last_ts {
                return Err(IngestError::new(
                    line_no,
                    IngestErrorKind::TsRegression,
                    format!("ts regression at line {line_no}: timestamp earlier than seq {last_seq}"),
                ));
            }
        }
        self.last = Some((event.seq, event.ts));
        self.log.push(event);
        Ok(self.log.events().last().unwrap())
    }

    fn parse(&self, line_no: usize, line: &str) -> Result<Event, IngestError> {
        let malformed = |msg: String| IngestError::new(line_no, IngestErrorKind::Malformed, msg);
        let json: Json = serde_json::from_str(line)
            .map_err(|e| malformed(format!("malformed line {line_no}: {e}")))?;
        let Json::Object(mut obj) = json else {
            return Err(malformed(format!("malformed line {line_no}: not a JSON object")));
        };

        let seq = match obj.remove("seq") {
            Some(Json::Number(n)) => n.as_u64().filter(|&s| s > 0),
            _ => None,
        }
        .ok_or_else(|| malformed(format!("malformed line {line_no}: seq must be a positive integer")))?;
        let ts = match obj.remove("ts") {
            Some(Json::String(s)) => {
                parse_utc(&s).map_err(|e| malformed(format!("malformed line {line_no}: {e}")))?
            }
            _ => return Err(malformed(format!("malformed line {line_no}: ts must be a string"))),
        };
        let type_name = take_string(&mut obj, "type")
            .ok_or_else(|| malformed(format!("malformed line {line_no}: type must be a string")))?;
        let project = take_string(&mut obj, "project").ok_or_else(|| {
            malformed(format!("malformed line {line_no}: project must be a string"))
        })?;
        let actor = match obj.remove("actor") {
            None | Some(Json::Null) => None,
            Some(Json::String(s)) => Some(s),
            Some(_) => {
                return Err(malformed(format!("malformed line {line_no}: actor must be a string")))
            }
        };
        let payload = match obj.remove("payload") {
            Some(Json::Object(p)) => p,
            None => Map::new(),
            Some(_) => {
                return Err(malformed(format!("malformed line {line_no}: payload must be an object")))
            }
        };
        if let Some(key) = obj.keys().next() {
            return Err(malformed(format!("malformed line {line_no}: unexpected key `{key}`")));
        }

        let event_type = self.catalog.lookup(&type_name).ok_or_else(|| {
            IngestError::new(
                line_no,
                IngestErrorKind::UnknownType,
                format!("unknown event type `{type_name}` at line {line_no}"),
            )
        })?;

        let mut fields = BTreeMap::new();
        for (k, v) in payload {
            let v = match v {
                Json::String(s) => PayloadValue::Str(s),
                Json::Bool(b) => PayloadValue::Bool(b),
                Json::Number(n) => PayloadValue::Num(n.as_f64().unwrap_or(f64::NAN)),
                _ => {
                    return Err(malformed(format!(
                        "malformed line {line_no}: payload field `{k}` must be a string, number or boolean"
                    )))
                }
            };
            fields.insert(k, v);
        }
        for f in self.catalog.required_fields(event_type) {
            if !fields.contains_key(*f) {
                return Err(IngestError::new(
                    line_no,
                    IngestErrorKind::MissingField,
                    format!("missing required payload field `{f}` for {event_type} at line {line_no}"),
                ));
            }
        }
        check_typed_fields(event_type, &fields).map_err(|e| malformed(format!("malformed line {line_no}: {e}")))?;

        Ok(Event {
            seq,
            ts,
            event_type,
            project,
            actor,
            payload: fields,
        })
    }
}

fn take_string(obj: &mut Map<String, Json>, key: &str) -> Option<String> {
    match obj.remove(key) {
        Some(Json::String(s)) => Some(s),
        _ => None,
    }
}

fn check_typed_fields(ty: EventType, fields: &BTreeMap<String, PayloadValue>) -> Result<(), String> {
    let text = |name: &str| -> Result<&str, String> {
        fields[name]
            .as_str()
            .ok_or_else(|| format!("payload field `{name}` must be a string"))
    };
    match ty {
        EventType::ActivitySession => {
            let start = parse_utc(text("start")?)?;
            let end = parse_utc(text("end")?)?;
            if start > end {
                return Err("session start is after its end".into());
            }
        }
        EventType::ModelFeatureSnapshot => {
            let phase = text("phase")?;
            if phase != "baseline" && phase != "current" {
                return Err(format!("phase must be baseline or current, found `{phase}`"));
            }
            Histogram::parse_compact(text("histogram")?).map_err(|e| e.to_string())?;
        }
        EventType::JobPostingDraft => {
            text("text")?;
        }
        _ => {}
    }
    Ok(())
}

/// Ingests a whole stream. Blank lines are ignored; every other line is
/// either accepted or yields exactly one error, and a log comes back only
/// when there are no errors.
pub fn ingest_events<I, S>(lines: I) -> Result<EventLog, Vec<IngestError>>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut builder = EventLogBuilder::new(EventCatalog::standard());
    let mut errors = Vec::new();
    for (i, line) in lines.into_iter().enumerate() {
        let line = line.as_ref();
        if line.trim().is_empty() {
            continue;
        }
        if let Err(e) = builder.push_line(i + 1, line) {
            errors.push(e);
        }
    }
    if errors.is_empty() {
        Ok(builder.finish())
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(seq: u64, ts: &str, ty: &str, payload: &str) -> String {
        format!(r#"{{"seq":{seq},"ts":"{ts}","type":"{ty}","project":"p","actor":"a","payload":{payload}}}"#)
    }

    #[test]
    fn three_good_lines() {
        let lines = [
            line(1, "2025-01-01T00:00:00Z", "dataset.registered", r#"{"dataset_id":"d1"}"#),
            line(2, "2025-01-01T01:00:00Z", "issue.opened", r#"{"issue_id":"i1","label":"ethics"}"#),
            line(3, "2025-01-01T01:00:00Z", "build.release", r#"{"build_id":"b1"}"#),
        ];
        let log = ingest_events(&lines).unwrap();
        assert_eq!(log.len(), 3);
    }

    #[test]
    fn seq_regression() {
        let lines = [
            line(1, "2025-01-01T00:00:00Z", "build.release", r#"{"build_id":"b1"}"#),
            line(3, "2025-01-01T00:00:00Z", "build.release", r#"{"build_id":"b2"}"#),
            line(2, "2025-01-01T00:00:00Z", "build.release", r#"{"build_id":"b3"}"#),
        ];
        let errs = ingest_events(&lines).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].kind, IngestErrorKind::SeqRegression);
        assert!(errs[0].message.starts_with("seq regression at line 3"));
    }

    #[test]
    fn ts_regression() {
        let lines = [
            line(1, "2025-01-02T00:00:00Z", "build.release", r#"{"build_id":"b1"}"#),
            line(2, "2025-01-01T00:00:00Z", "build.release", r#"{"build_id":"b2"}"#),
        ];
        let errs = ingest_events(&lines).unwrap_err();
        assert_eq!(errs[0].kind, IngestErrorKind::TsRegression);
    }

    #[test]
    fn unknown_type_and_missing_field() {
        let lines = [
            line(1, "2025-01-01T00:00:00Z", "coffee.break", "{}"),
            line(2, "2025-01-01T00:00:00Z", "issue.opened", r#"{"issue_id":"i1"}"#),
            "not json".to_string(),
        ];
        let errs = ingest_events(&lines).unwrap_err();
        let kinds: Vec<_> = errs.iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![
                IngestErrorKind::UnknownType,
                IngestErrorKind::MissingField,
                IngestErrorKind::Malformed
            ]
        );
        assert!(errs[0].message.contains("unknown event type"));
    }

    #[test]
    fn typed_payload_checks() {
        let bad_session = line(
            1,
            "2025-01-01T00:00:00Z",
            "activity.session",
            r#"{"start":"2025-01-01T10:00:00Z","end":"2025-01-01T09:00:00Z"}"#,
        );
        assert!(ingest_events([bad_session]).is_err());
        let bad_phase = line(
            1,
            "2025-01-01T00:00:00Z",
            "model.feature_snapshot",
            r#"{"feature":"age","phase":"later","histogram":"-inf,inf|1"}"#,
        );
        assert!(ingest_events([bad_phase]).is_err());
        let nested = line(1, "2025-01-01T00:00:00Z", "build.release", r#"{"build_id":["x"]}"#);
        assert!(ingest_events([nested]).is_err());
        let extra_key = r#"{"seq":1,"ts":"2025-01-01T00:00:00Z","type":"build.release","project":"p","payload":{"build_id":"b"},"oops":1}"#;
        assert!(ingest_events([extra_key]).is_err());
    }

    #[test]
    fn rejected_lines_do_not_advance_order() {
        let mut b = EventLogBuilder::new(EventCatalog::standard());
        b.push_line(1, &line(5, "2025-01-01T00:00:00Z", "build.release", r#"{"build_id":"b"}"#))
            .unwrap();
        assert!(b.push_line(2, &line(9, "2025-01-01T00:00:00Z", "nope.nope", "{}")).is_err());
        b.push_line(3, &line(6, "2025-01-01T00:00:00Z", "build.release", r#"{"build_id":"c"}"#))
            .unwrap();
        assert_eq!(b.log().len(), 2);
    }
}
