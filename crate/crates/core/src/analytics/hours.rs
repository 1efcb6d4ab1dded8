use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Datelike, Days, NaiveDate, NaiveTime, Utc};
use serde::Serialize;

use super::AnalyticsError;

type Interval = (DateTime<Utc>, DateTime<Utc>);

const NANOS_PER_HOUR: f64 = 3_600_000_000_000.0;

/// An ISO-8601 week, identified by its Monday.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WeekKey {
    monday: NaiveDate,
}

impl WeekKey {
    pub fn containing(t: DateTime<Utc>) -> WeekKey {
        let d = t.date_naive();
        let back = d.weekday().num_days_from_monday() as u64;
        WeekKey {
            monday: d - Days::new(back),
        }
    }

    pub fn monday(self) -> NaiveDate {
        self.monday
    }

    pub fn iso_year(self) -> i32 {
        self.monday.iso_week().year()
    }

    pub fn iso_week(self) -> u32 {
        self.monday.iso_week().week()
    }

    pub fn next(self) -> WeekKey {
        WeekKey {
            monday: self.monday + Days::new(7),
        }
    }

    pub fn prev(self) -> WeekKey {
        WeekKey {
            monday: self.monday - Days::new(7),
        }
    }

    /// `[Monday 00:00, next Monday 00:00)` in UTC.
    pub fn bounds(self) -> (DateTime<Utc>, DateTime<Utc>) {
        let start = self.monday.and_time(NaiveTime::MIN).and_utc();
        (start, self.next().monday.and_time(NaiveTime::MIN).and_utc())
    }
}

impl fmt::Display for WeekKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-W{:02}", self.iso_year(), self.iso_week())
    }
}

impl Serialize for WeekKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub actor: String,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

/// Hours worked per (actor, ISO week).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeekLedger {
    hours: BTreeMap<(String, WeekKey), f64>,
}

impl WeekLedger {
    pub fn get(&self, actor: &str, week: WeekKey) -> f64 {
        self.hours
            .get(&(actor.to_string(), week))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, WeekKey, f64)> + '_ {
        self.hours.iter().map(|((a, w), h)| (a.as_str(), *w, *h))
    }

    pub fn total(&self) -> f64 {
        self.hours.values().sum()
    }

    pub fn len(&self) -> usize {
        self.hours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hours.is_empty()
    }
}

/// Aggregates sessions into weekly hours.
///
/// An actor's overlapping sessions count once (time worked is the union of
/// their intervals), so no week can exceed 168 hours. Time is attributed to
/// the ISO week it falls in: a session that crosses Monday 00:00 UTC is split
/// at the boundary.
pub fn weekly_hours(sessions: &[Session]) -> Result<WeekLedger, AnalyticsError> {
    let mut by_actor: BTreeMap<&str, Vec<Interval>> = BTreeMap::new();
    for s in sessions {
        if s.start > s.end {
            return Err(AnalyticsError::SessionOrder {
                actor: s.actor.clone(),
            });
        }
        by_actor.entry(&s.actor).or_default().push((s.start, s.end));
    }

    let mut nanos: BTreeMap<(String, WeekKey), i128> = BTreeMap::new();
    for (actor, mut intervals) in by_actor {
        for (start, end) in merge(&mut intervals) {
            split_by_week(start, end, |week, n| {
                *nanos.entry((actor.to_string(), week)).or_default() += n;
            });
        }
    }
    Ok(WeekLedger {
        hours: nanos
            .into_iter()
            .map(|(k, n)| (k, n as f64 / NANOS_PER_HOUR))
            .collect(),
    })
}

fn merge(intervals: &mut [Interval]) -> Vec<Interval> {
    intervals.sort();
    let mut out: Vec<Interval> = Vec::new();
    for &(s, e) in intervals.iter() {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

fn split_by_week(start: DateTime<Utc>, end: DateTime<Utc>, mut add: impl FnMut(WeekKey, i128)) {
    let mut cur = start;
    while cur < end {
        let week = WeekKey::containing(cur);
        let seg_end = end.min(week.bounds().1);
        add(week, span_nanos(cur, seg_end));
        cur = seg_end;
    }
}

fn span_nanos(a: DateTime<Utc>, b: DateTime<Utc>) -> i128 {
    let d = b - a;
    d.num_seconds() as i128 * 1_000_000_000 + d.subsec_nanos() as i128
}

/// Length of the union of `intervals` clipped to `week`, in nanoseconds.
pub fn covered_nanos(intervals: &[Interval], week: WeekKey) -> i128 {
    let (lo, hi) = week.bounds();
    let mut clipped: Vec<_> = intervals
        .iter()
        .map(|&(s, e)| (s.max(lo), e.min(hi)))
        .filter(|(s, e)| s < e)
        .collect();
    merge(&mut clipped)
        .into_iter()
        .map(|(s, e)| span_nanos(s, e))
        .sum()
}

pub(crate) fn nanos_to_hours(n: i128) -> f64 {
    n as f64 / NANOS_PER_HOUR
}
