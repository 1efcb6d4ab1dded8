use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{Event, EventType, JoinKey, PayloadValue};

/// An ordered, validated event stream with lookup indexes.
///
/// Positions in the index vectors are ascending, so every indexed query comes
/// back in seq order.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    events: Vec<Event>,
    by_type: HashMap<EventType, Vec<usize>>,
    by_field: HashMap<(EventType, String, JoinKey), Vec<usize>>,
}

impl EventLog {
    pub(super) fn push(&mut self, event: Event) {
        let pos = self.events.len();
        self.by_type.entry(event.event_type).or_default().push(pos);
        for (name, value) in &event.payload {
            self.by_field
                .entry((event.event_type, name.clone(), JoinKey::from(value)))
                .or_default()
                .push(pos);
        }
        self.events.push(event);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event> {
        self.events.iter()
    }

    pub fn by_seq(&self, seq: u64) -> Option<&Event> {
        self.events
            .binary_search_by_key(&seq, |e| e.seq)
            .ok()
            .map(|i| &self.events[i])
    }

    pub fn of_type(&self, ty: EventType) -> impl Iterator<Item = &Event> + '_ {
        self.by_type
            .get(&ty)
            .into_iter()
            .flatten()
            .map(|&i| &self.events[i])
    }

    /// Events of `ty` whose payload `field` equals `value`, in seq order.
    pub fn matching(
        &self,
        ty: EventType,
        field: &str,
        value: &PayloadValue,
    ) -> impl Iterator<Item = &Event> + '_ {
        self.by_field
            .get(&(ty, field.to_string(), JoinKey::from(value)))
            .into_iter()
            .flatten()
            .map(|&i| &self.events[i])
    }

    /// Indexed form of [`events_before`].
    pub fn before(
        &self,
        seq: u64,
        ty: EventType,
        filter: Option<(&str, &PayloadValue)>,
    ) -> Vec<&Event> {
        let positions = match filter {
            None => self.by_type.get(&ty),
            Some((field, value)) => {
                self.by_field
                    .get(&(ty, field.to_string(), JoinKey::from(value)))
            }
        };
        let Some(positions) = positions else {
            return Vec::new();
        };
        let end = positions.partition_point(|&i| self.events[i].seq < seq);
        positions[..end].iter().map(|&i| &self.events[i]).collect()
    }

    /// A copy keeping only the payload fields `keep` admits, with the actor
    /// asked for as the field `actor`. Used to produce a minimal-disclosure
    /// log from a data-access manifest.
    pub fn retain_fields(&self, keep: impl Fn(EventType, &str) -> bool) -> EventLog {
        let mut out = EventLog::default();
        for e in &self.events {
            let mut e = e.clone();
            e.payload.retain(|k, _| keep(e.event_type, k));
            if !keep(e.event_type, "actor") {
                e.actor = None;
            }
            out.push(e);
        }
        out
    }

    /// SHA-256 over the events' JSON lines, each terminated by a newline.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for e in &self.events {
            h.update(e.to_json_line().as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Which payload fields appear at all, per event type.
    pub fn field_inventory(&self) -> BTreeMap<EventType, BTreeSet<String>> {
        let mut out: BTreeMap<EventType, BTreeSet<String>> = BTreeMap::new();
        for e in &self.events {
            out.entry(e.event_type)
                .or_default()
                .extend(e.payload.keys().cloned());
        }
        out
    }
}

impl<'a> IntoIterator for &'a EventLog {
    type Item = &'a Event;
    type IntoIter = std::slice::Iter<'a, Event>;

    fn into_iter(self) -> Self::IntoIter {
        self.events.iter()
    }
}

/// All events with `seq` strictly below the bound, of the given type, and
/// (when `filter` is given) whose payload field equals the value.
pub fn events_before<'a>(
    log: &'a EventLog,
    seq: u64,
    ty: EventType,
    filter: Option<(&str, &PayloadValue)>,
) -> Vec<&'a Event> {
    log.before(seq, ty, filter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::ingest_events;
    use proptest::prelude::*;

    fn sample_log() -> EventLog {
        let lines = [
            r#"{"seq":1,"ts":"2025-01-01T00:00:00Z","type":"dataset.registered","project":"p","payload":{"dataset_id":"d1"}}"#,
            r#"{"seq":5,"ts":"2025-01-01T00:00:00Z","type":"dataset.bias_assessment","project":"p","payload":{"dataset_id":"d1","method":"audit"}}"#,
            r#"{"seq":7,"ts":"2025-01-01T00:00:00Z","type":"dataset.bias_assessment","project":"p","payload":{"dataset_id":"d2","method":"audit"}}"#,
            r#"{"seq":9,"ts":"2025-01-01T00:00:00Z","type":"build.training_run","project":"p","payload":{"dataset_id":"d1","build_id":"b1"}}"#,
        ];
        ingest_events(lines).unwrap()
    }

    #[test]
    fn before_is_strict() {
        let log = sample_log();
        let d1 = PayloadValue::Str("d1".into());
        let hits = events_before(&log, 9, EventType::DatasetBiasAssessment, Some(("dataset_id", &d1)));
        assert_eq!(hits.iter().map(|e| e.seq).collect::<Vec<_>>(), vec![5]);
        let hits = events_before(&log, 5, EventType::DatasetBiasAssessment, Some(("dataset_id", &d1)));
        assert!(hits.is_empty());
        assert_eq!(events_before(&log, 100, EventType::DatasetBiasAssessment, None).len(), 2);
        assert!(events_before(&log, 100, EventType::IssueOpened, None).is_empty());
    }

    #[test]
    fn retain_and_lookup() {
        let log = sample_log();
        assert_eq!(log.by_seq(7).unwrap().seq, 7);
        assert!(log.by_seq(6).is_none());
        let slim = log.retain_fields(|_, f| f == "dataset_id");
        assert!(slim.iter().all(|e| !e.payload.contains_key("method")));
        assert_ne!(slim.digest(), log.digest());
    }

    const TYPES: [&str; 3] = ["dataset.bias_assessment", "build.training_run", "build.release"];

    fn arb_log() -> impl Strategy<Value = Vec<(u64, usize, u8)>> {
        prop::collection::vec((1u64..4, 0usize..3, 0u8..4), 0..200)
    }

    fn build(spec: &[(u64, usize, u8)]) -> EventLog {
        let mut seq = 0;
        let lines: Vec<String> = spec
            .iter()
            .map(|&(gap, ty, key)| {
                seq += gap;
                format!(
                    r#"{{"seq":{seq},"ts":"2025-01-01T00:00:00Z","type":"{}","project":"p","payload":{{"dataset_id":"d{key}","build_id":"b","method":"m"}}}}"#,
                    TYPES[ty]
                )
            })
            .collect();
        ingest_events(&lines).unwrap()
    }

    proptest! {
        #[test]
        fn index_matches_linear_scan(spec in arb_log(), bound in 0u64..700, ty in 0usize..3, key in prop::option::of(0u8..5)) {
            let log = build(&spec);
            let ty = crate::events::EventCatalog::standard().lookup(TYPES[ty]).unwrap();
            let value = key.map(|k| PayloadValue::Str(format!("d{k}")));
            let filter = value.as_ref().map(|v| ("dataset_id", v));
            let indexed: Vec<u64> = events_before(&log, bound, ty, filter).iter().map(|e| e.seq).collect();
            let scanned: Vec<u64> = log
                .iter()
                .filter(|e| e.seq < bound && e.event_type == ty)
                .filter(|e| value.as_ref().is_none_or(|v| e.payload.get("dataset_id") == Some(v)))
                .map(|e| e.seq)
                .collect();
            prop_assert_eq!(indexed, scanned);
        }

        #[test]
        fn iteration_is_strictly_increasing(spec in arb_log()) {
            let log = build(&spec);
            prop_assert!(log.events().windows(2).all(|w| w[0].seq < w[1].seq));
        }
    }
}
