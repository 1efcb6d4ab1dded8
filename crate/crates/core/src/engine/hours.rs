use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};

use super::Finding;
use crate::analytics::{covered_nanos, WeekKey};
use crate::events::{parse_utc, Event};
use crate::policy::{CompiledRule, HoursRule};

type Interval = (DateTime<Utc>, DateTime<Utc>);

#[derive(Debug, Default)]
struct ActorWeeks {
    /// Sessions touching each week: (seq, start, end).
    sessions: BTreeMap<WeekKey, Vec<(u64, Interval)>>,
    breaching: BTreeSet<WeekKey>,
}

/// Running weekly totals per actor. A session fires a finding when it
/// pushes some week strictly over the threshold for the first time and that
/// week is part of a run of at least `consecutive_weeks` breaching weeks.
#[derive(Debug, Default)]
pub(super) struct HoursState {
    actors: BTreeMap<String, ActorWeeks>,
}

impl HoursState {
    pub(super) fn push(&mut self, rule: &CompiledRule, h: &HoursRule, e: &Event) -> Option<Finding> {
        let actor = e.actor.as_deref()?;
        let start = parse_utc(e.text("start")?).ok()?;
        let end = parse_utc(e.text("end")?).ok()?;
        if start >= end {
            return None;
        }
        let state = self.actors.entry(actor.to_string()).or_default();

        let mut newly = Vec::new();
        let mut week = WeekKey::containing(start);
        while week.bounds().0 < end {
            let list = state.sessions.entry(week).or_default();
            let before = hours_of(list, week);
            list.push((e.seq, (start, end)));
            let after = hours_of(list, week);
            if before <= h.threshold_hours && after > h.threshold_hours {
                newly.push((week, after));
            }
            week = week.next();
        }
        for (w, _) in &newly {
            state.breaching.insert(*w);
        }

        for (w, hours) in newly {
            let run = run_length(&state.breaching, w);
            if run < h.consecutive_weeks as usize {
                continue;
            }
            let evidence = state.sessions[&w].iter().map(|(s, _)| *s).collect();
            return Some(
                Finding::new(
                    rule,
                    e.seq,
                    &e.project,
                    format!(
                        "{actor} worked {hours:.2} h in {w}, over the {} h limit ({run} consecutive week(s))",
                        h.threshold_hours
                    ),
                )
                .actor(Some(actor))
                .evidence(evidence)
                .metrics([
                    ("week_hours", hours),
                    ("threshold_hours", h.threshold_hours),
                    ("consecutive_weeks", run as f64),
                ]),
            );
        }
        None
    }
}

fn hours_of(list: &[(u64, Interval)], week: WeekKey) -> f64 {
    let intervals: Vec<Interval> = list.iter().map(|(_, iv)| *iv).collect();
    crate::analytics::nanos_to_hours(covered_nanos(&intervals, week))
}

fn run_length(breaching: &BTreeSet<WeekKey>, w: WeekKey) -> usize {
    let mut n = 1;
    let mut cur = w.prev();
    while breaching.contains(&cur) {
        n += 1;
        cur = cur.prev();
    }
    let mut cur = w.next();
    while breaching.contains(&cur) {
        n += 1;
        cur = cur.next();
    }
    n
}
