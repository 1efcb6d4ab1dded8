//! Deterministic synthetic scenario: a policy with every rule kind, the
//! registers it needs, an event log with known violations, and the list of
//! findings a correct audit must produce.
//!
//! Episodes are laid out on absolute timestamps, merged by time and cut to
//! the first `events` events. Every expected finding is known either from
//! the episode that produced it or from a plain pass over the final log for
//! the two order-dependent rules (open ethics issues and overrides).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use auditbot::events::{format_ts, CompetenceEntry, DatasheetEntry, IndependenceEntry, JobDescriptionEntry, OrgEntry};
use chrono::{DateTime, Duration, NaiveDate, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const POLICY_FILE: &str = "policy.audit";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const REGISTERS_DIR: &str = "registers";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

pub const PROJECTS: [&str; 3] = ["proj-alpha", "proj-beta", "proj-gamma"];

pub const POLICY: &str = r#"# Synthetic plan used by the acceptance fixture.
policy "fixture" { version = "1" organisation = "Fixture Works" }

severity_map { low = 0 medium = 1 high = 2 }

commitment fair_models {
  statement = "Models are trained on assessed data and watched for drift"
  rules = [bias, datasheet, age_drift]
}
commitment fair_hiring { statement = "Job adverts use balanced language" rules = [gender_gate] }
commitment wellbeing { statement = "Nobody routinely works over 48 hours" rules = [long_hours] }

rule bias {
  kind = obligation harm = 4
  description = "bias assessment precedes every training run"
  trigger = build.training_run require = dataset.bias_assessment
  mode = exists_before join_on = dataset_id
}

rule ethics_issues {
  kind = obligation harm = 5
  trigger = build.release require = issue.opened
  mode = all_closed_before close_type = issue.resolved join_on = issue_id filter = "label=ethics"
}

rule reviewer_competent {
  kind = legitimacy harm = 3
  trigger = doc.review_completed check = reviewer_competence qualification_field = review_type
}

rule reviewer_independent {
  kind = legitimacy harm = 3
  trigger = doc.review_completed check = reviewer_independence severity_field = severity
}

rule datasheet {
  kind = legitimacy harm = 2
  trigger = build.training_run check = register_lookup register = datasheets key_field = dataset_id
}

rule release_team {
  kind = legitimacy harm = 4 responsible_role = director
  trigger = build.release check = team_qualification qualification = "ethics-training"
}

rule overrides {
  kind = exception harm = 3 risk_cost = 100 mitigation_cost = 250
  override_type = rule.override justification_type = rule.justification join_on = override_id
}

rule long_hours { kind = hours harm = 2 threshold_hours = 48 }

rule gender_gate {
  kind = gate harm = 2
  trigger = job_posting.draft text_field = text lexicon = builtin
}

rule age_drift { kind = drift harm = 5 feature = age }
"#;

const BIASED: [&str; 3] = [
    "We want a competitive, driven rockstar engineer who can lead from the front.",
    "Ambitious and assertive analysts wanted to dominate a fast market.",
    "Fearless, decisive leaders with a strong individual drive.",
];

const NEUTRAL: [&str; 4] = [
    "We are looking for a software engineer to join our platform group.",
    "Supportive, collaborative people who enjoy working together and trust each other.",
    "A committed data analyst to help the team understand our customers.",
    "Join a kind and considerate team; lead the weekly review.",
];

const FLAT: &str = "-inf,20,40,60,inf|0.25,0.25,0.25,0.25";
const STABLE: [&str; 2] = [FLAT, "-inf,20,40,60,inf|0.3,0.25,0.25,0.2"];
const WARN: &str = "-inf,20,40,60,inf|0.45,0.25,0.15,0.15";
const ALARM: &str = "-inf,20,40,60,inf|0.6,0.2,0.1,0.1";

const REVIEW_TYPES: [&str; 3] = ["code", "design", "data"];
const SEVERITIES: [(&str, i64); 3] = [("low", 0), ("medium", 1), ("high", 2)];
const AUTHOR_ORGS: [&str; 2] = ["org-a", "org-b"];
const REVIEWERS: [&str; 6] = ["rev-1", "rev-2", "rev-3", "rev-4", "rev-5", "rev-6"];

/// One expected finding.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Expected {
    pub id: String,
    pub rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub justified: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub events: usize,
    pub findings: Vec<Expected>,
}

impl GroundTruth {
    pub fn ids(&self) -> BTreeSet<String> {
        self.findings.iter().map(|f| f.id.clone()).collect()
    }
}

pub struct Scenario {
    pub events: Vec<Value>,
    pub competence: Vec<CompetenceEntry>,
    pub independence: Vec<IndependenceEntry>,
    pub orgchart: Vec<OrgEntry>,
    pub jobdesc: Vec<JobDescriptionEntry>,
    pub datasheets: Vec<DatasheetEntry>,
    pub truth: GroundTruth,
}

/// What an event is known to cause.
#[derive(Debug, Clone)]
enum Tag {
    Finding(&'static str),
    Override(u64),
    Justification(u64),
    Release,
}

struct Draft {
    ts: DateTime<Utc>,
    order: (u64, u32),
    ty: &'static str,
    project: &'static str,
    actor: Option<String>,
    payload: Value,
    tags: Vec<Tag>,
}

struct Gen {
    rng: ChaCha8Rng,
    drafts: Vec<Draft>,
    episode: u64,
    step: u32,
    t0: DateTime<Utc>,
    /// Rough count of events produced so far, to know when to stop.
    count: usize,
    undocumented: BTreeSet<String>,
    datasets: Vec<String>,
}

fn t0() -> DateTime<Utc> {
    "2025-03-03T00:00:00Z".parse().unwrap()
}

/// Last day proj-beta's lead holds the team qualification.
pub fn beta_expiry() -> NaiveDate {
    (t0() + Duration::days(20)).date_naive()
}

fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

fn minutes(n: i64) -> Duration {
    Duration::minutes(n)
}

impl Gen {
    fn push(&mut self, ts: DateTime<Utc>, ty: &'static str, project: &'static str, actor: Option<String>, payload: Value, tags: Vec<Tag>) {
        self.drafts.push(Draft {
            ts,
            order: (self.episode, self.step),
            ty,
            project,
            actor,
            payload,
            tags,
        });
        self.step += 1;
        self.count += 1;
    }

    fn project(&mut self) -> &'static str {
        PROJECTS[self.rng.gen_range(0..PROJECTS.len())]
    }

    fn dev(&mut self, project: &str) -> String {
        format!("{}-dev-{}", &project[5..], self.rng.gen_range(1..=3))
    }

    fn dataset(&mut self, t: DateTime<Utc>) {
        let p = self.project();
        let id = format!("ds-{}", self.episode);
        let dev = self.dev(p);
        let lead = format!("{}-lead", &p[5..]);
        if self.rng.gen_bool(0.1) {
            self.undocumented.insert(id.clone());
        }
        self.datasets.push(id.clone());
        self.push(t, "dataset.registered", p, Some(dev.clone()), json!({"dataset_id": id}), vec![]);
        let assess = t + minutes(self.rng.gen_range(30..2880));
        let train = assess + minutes(self.rng.gen_range(30..4320));
        let variant = self.rng.gen_range(0..10);
        let mut tags = Vec::new();
        if variant >= 7 {
            tags.push(Tag::Finding("bias"));
        }
        if self.undocumented.contains(&id) {
            tags.push(Tag::Finding("datasheet"));
        }
        let build = json!({"dataset_id": id, "build_id": format!("b-{}", self.episode)});
        match variant {
            0..=6 => {
                self.push(assess, "dataset.bias_assessment", p, Some(lead), json!({"dataset_id": id, "method": "parity"}), vec![]);
                self.push(train, "build.training_run", p, Some(dev), build, tags);
            }
            7..=8 => self.push(train, "build.training_run", p, Some(dev), build, tags),
            _ => {
                self.push(assess, "build.training_run", p, Some(dev.clone()), build, tags);
                self.push(train, "dataset.bias_assessment", p, Some(lead), json!({"dataset_id": id, "method": "parity"}), vec![]);
            }
        }
    }

    fn issue(&mut self, t: DateTime<Utc>) {
        let p = self.project();
        let id = format!("iss-{}", self.episode);
        let ethics = self.rng.gen_bool(0.5);
        let label = if ethics { "ethics" } else { "perf" };
        let dev = self.dev(p);
        self.push(t, "issue.opened", p, Some(dev.clone()), json!({"issue_id": id, "label": label}), vec![]);
        let delay = match (ethics, self.rng.gen_range(0..10)) {
            (false, 0..=2) => None,
            (true, 9) => Some(minutes(self.rng.gen_range(20 * 1440..40 * 1440))),
            _ => Some(minutes(self.rng.gen_range(60..4 * 1440))),
        };
        if let Some(d) = delay {
            self.push(t + d, "issue.resolved", p, Some(dev), json!({"issue_id": id}), vec![]);
        }
    }

    fn release(&mut self, t: DateTime<Utc>) {
        let p = self.project();
        let dev = self.dev(p);
        let build = json!({"build_id": format!("rel-{}", self.episode)});
        self.push(t, "build.release", p, Some(dev), build, vec![Tag::Release]);
    }

    fn review(&mut self, t: DateTime<Utc>, regs: &Registers) {
        let p = self.project();
        let reviewer = *REVIEWERS.choose(&mut self.rng).unwrap();
        let review_type = *REVIEW_TYPES.choose(&mut self.rng).unwrap();
        let (severity, required) = *SEVERITIES.choose(&mut self.rng).unwrap();
        let org = *AUTHOR_ORGS.choose(&mut self.rng).unwrap();
        let mut tags = Vec::new();
        let d = t.date_naive();
        let competent = regs
            .competence
            .iter()
            .any(|c| c.actor == reviewer && c.qualification == review_type && c.valid_from <= d && d <= c.valid_to);
        if !competent {
            tags.push(Tag::Finding("reviewer_competent"));
        }
        let level = regs.independence.iter().find(|e| e.actor == reviewer && e.subject == org).map(|e| e.level);
        if level.is_none_or(|l| l < required) {
            tags.push(Tag::Finding("reviewer_independent"));
        }
        let payload = json!({"doc_id": format!("doc-{}", self.episode), "review_type": review_type, "severity": severity, "author_org": org});
        self.push(t, "doc.review_completed", p, Some(reviewer.to_string()), payload, tags);
    }

    fn exception(&mut self, t: DateTime<Utc>) {
        let p = self.project();
        let dev = self.dev(p);
        let id = format!("ovr-{}", self.episode);
        let rule_ref = *["bias", "datasheet", "release_team"].choose(&mut self.rng).unwrap();
        let ep = self.episode;
        self.push(t, "rule.override", p, Some(dev.clone()), json!({"override_id": id, "rule_ref": rule_ref}), vec![Tag::Override(ep)]);
        let delay = match self.rng.gen_range(0..10) {
            0..=5 => Some(minutes(self.rng.gen_range(60..10 * 1440))),
            6..=7 => Some(minutes(self.rng.gen_range(15 * 1440..25 * 1440))),
            _ => None,
        };
        if let Some(d) = delay {
            let payload = json!({"override_id": id, "reason": "deadline agreed with the ethics board"});
            self.push(t + d, "rule.justification", p, Some(dev), payload, vec![Tag::Justification(ep)]);
        }
    }

    fn hours(&mut self, t: DateTime<Utc>) {
        let p = self.project();
        let worker = format!("worker-{}", self.episode);
        let week = crate::fixture::monday_of(t);
        let days = self.rng.gen_range(4..=7);
        let mut total = 0i64;
        let mut fired = false;
        let mut sessions = Vec::new();
        for day in 0..days {
            let start = week + Duration::days(day) + Duration::hours(8) + minutes(self.rng.gen_range(0..60));
            let len = self.rng.gen_range(6 * 60..=9 * 60);
            sessions.push((start, len, len));
        }
        if days == 7 && self.rng.gen_bool(0.5) {
            // Sunday night shift running into the next week
            let start = week + Duration::days(6) + Duration::hours(20);
            sessions.push((start, 4 * 60 + self.rng.gen_range(0..240), 4 * 60));
        }
        for (start, len, in_week) in sessions {
            total += in_week;
            let mut tags = Vec::new();
            if total > 48 * 60 && !fired {
                fired = true;
                tags.push(Tag::Finding("long_hours"));
            }
            let end = start + minutes(len);
            let payload = json!({"start": format_ts(&start), "end": format_ts(&end)});
            self.push(end, "activity.session", p, Some(worker.clone()), payload, tags);
        }
    }

    fn posting(&mut self, t: DateTime<Utc>) {
        let p = self.project();
        let id = format!("post-{}", self.episode);
        let biased = self.rng.gen_bool(0.4);
        let text = if biased { *BIASED.choose(&mut self.rng).unwrap() } else { *NEUTRAL.choose(&mut self.rng).unwrap() };
        let tags = if biased { vec![Tag::Finding("gender_gate")] } else { vec![] };
        let dev = self.dev(p);
        self.push(t, "job_posting.draft", p, Some(dev.clone()), json!({"posting_id": id, "text": text}), tags);
        if self.rng.gen_bool(0.5) {
            let later = t + minutes(self.rng.gen_range(60..2880));
            self.push(later, "job_posting.published", p, Some(dev), json!({"posting_id": id}), vec![]);
        }
    }

    fn snapshot(&mut self, t: DateTime<Utc>) {
        let p = self.project();
        if self.rng.gen_bool(0.2) {
            let payload = json!({"feature": "income", "phase": "current", "histogram": ALARM});
            self.push(t, "model.feature_snapshot", p, None, payload, vec![]);
            return;
        }
        let (hist, tags) = match self.rng.gen_range(0..20) {
            0..=13 => (*STABLE.choose(&mut self.rng).unwrap(), vec![]),
            14..=16 => (WARN, vec![Tag::Finding("age_drift")]),
            _ => (ALARM, vec![Tag::Finding("age_drift")]),
        };
        let payload = json!({"feature": "age", "phase": "current", "histogram": hist});
        self.push(t, "model.feature_snapshot", p, None, payload, tags);
    }
}

pub(crate) fn monday_of(t: DateTime<Utc>) -> DateTime<Utc> {
    use chrono::Datelike;
    let d = t.date_naive();
    let monday = d - Duration::days(d.weekday().num_days_from_monday() as i64);
    monday.and_hms_opt(0, 0, 0).unwrap().and_utc()
}

struct Registers {
    competence: Vec<CompetenceEntry>,
    independence: Vec<IndependenceEntry>,
}

fn registers(rng: &mut ChaCha8Rng) -> Registers {
    let mut competence = Vec::new();
    let mut independence = Vec::new();
    for r in REVIEWERS {
        for q in REVIEW_TYPES {
            match rng.gen_range(0..6) {
                0 => {}
                1 => {
                    // lapses part way through the scenario
                    let lapse = t0().date_naive() + Duration::days(rng.gen_range(5..60));
                    competence.push(CompetenceEntry { actor: r.into(), qualification: q.into(), valid_from: date("2023-01-01"), valid_to: lapse });
                }
                _ => competence.push(CompetenceEntry {
                    actor: r.into(),
                    qualification: q.into(),
                    valid_from: date("2023-01-01"),
                    valid_to: date("2030-12-31"),
                }),
            }
        }
        for org in AUTHOR_ORGS {
            if rng.gen_range(0..8) > 0 {
                independence.push(IndependenceEntry { actor: r.into(), subject: org.into(), level: rng.gen_range(0..=2) });
            }
        }
    }
    let lead = |actor: &str, to: NaiveDate| CompetenceEntry {
        actor: actor.into(),
        qualification: "ethics-training".into(),
        valid_from: date("2024-01-01"),
        valid_to: to,
    };
    competence.push(lead("alpha-lead", date("2030-12-31")));
    competence.push(lead("beta-lead", beta_expiry()));
    Registers { competence, independence }
}

fn orgchart() -> Vec<OrgEntry> {
    let mut out = vec![OrgEntry { actor: "ceo".into(), role: "executive".into(), project: None, reports_to: None }];
    for p in PROJECTS {
        let short = &p[5..];
        let entry = |actor: String, role: &str, boss: Option<String>| OrgEntry {
            actor,
            role: role.into(),
            project: Some(p.to_string()),
            reports_to: boss,
        };
        out.push(entry(format!("{short}-director"), "director", Some("ceo".into())));
        out.push(entry(format!("{short}-lead"), "qa-lead", Some(format!("{short}-director"))));
        for i in 1..=3 {
            out.push(entry(format!("{short}-dev-{i}"), "developer", Some(format!("{short}-lead"))));
        }
    }
    for r in REVIEWERS {
        out.push(OrgEntry { actor: r.into(), role: "reviewer".into(), project: None, reports_to: Some("ceo".into()) });
    }
    out
}

fn jobdesc() -> Vec<JobDescriptionEntry> {
    let j = |role: &str, rules: &[&str]| JobDescriptionEntry {
        role: role.into(),
        rule_ids: rules.iter().map(|r| r.to_string()).collect(),
    };
    vec![
        j("qa-lead", &["bias", "datasheet", "ethics_issues", "reviewer_competent", "reviewer_independent"]),
        j("developer", &["overrides", "gender_gate"]),
        j("director", &["long_hours", "release_team"]),
    ]
}

/// Builds the scenario for `seed` with exactly `events` events.
pub fn generate(seed: u64, events: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let regs = registers(&mut rng);
    let mut g = Gen {
        rng,
        drafts: Vec::new(),
        episode: 0,
        step: 0,
        t0: t0(),
        count: 0,
        undocumented: BTreeSet::new(),
        datasets: Vec::new(),
    };

    for p in PROJECTS {
        let payload = json!({"feature": "age", "phase": "baseline", "histogram": FLAT});
        g.push(g.t0, "model.feature_snapshot", p, None, payload, vec![]);
    }
    let mut t = g.t0;
    // episodes spill past the cut, so generate a margin beyond `events`
    while events > 0 && g.count < events + events / 4 + 20 {
        g.episode += 1;
        g.step = 0;
        t += minutes(g.rng.gen_range(5..40));
        match g.rng.gen_range(0..100) {
            0..=17 => g.dataset(t),
            18..=29 => g.issue(t),
            30..=37 => g.release(t),
            38..=57 => g.review(t, &regs),
            58..=65 => g.exception(t),
            66..=71 => g.hours(t),
            72..=81 => g.posting(t),
            _ => g.snapshot(t),
        }
    }

    let mut drafts = std::mem::take(&mut g.drafts);
    drafts.sort_by_key(|d| (d.ts, d.order));
    drafts.truncate(events);

    let truth = ground_truth(seed, &drafts);
    let events = drafts
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let mut v = json!({
                "seq": i as u64 + 1,
                "ts": format_ts(&d.ts),
                "type": d.ty,
                "project": d.project,
                "payload": d.payload,
            });
            if let Some(a) = &d.actor {
                v["actor"] = json!(a);
            }
            v
        })
        .collect();
    let datasheets = g
        .datasets
        .iter()
        .filter(|d| !g.undocumented.contains(*d))
        .map(|d| DatasheetEntry {
            dataset_id: d.clone(),
            uri: format!("https://data.example/{d}"),
            properties: BTreeMap::from([("collected".to_string(), "2024".to_string())]),
        })
        .collect();
    Scenario {
        events,
        competence: regs.competence,
        independence: regs.independence,
        orgchart: orgchart(),
        jobdesc: jobdesc(),
        datasheets,
        truth,
    }
}

fn ground_truth(seed: u64, drafts: &[Draft]) -> GroundTruth {
    let mut out: Vec<(u64, Expected)> = Vec::new();
    let seq_of = |i: usize| i as u64 + 1;
    let found = |rule: &str, seq: u64| Expected {
        id: format!("{rule}:{seq}"),
        rule: rule.into(),
        justified: None,
    };

    // override episode -> (seq, ts, project, actor) and justification times
    let mut overrides = BTreeMap::new();
    let mut justifications = BTreeMap::new();
    // open ethics issues per project
    let mut open: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();

    for (i, d) in drafts.iter().enumerate() {
        let seq = seq_of(i);
        let issue = || d.payload["issue_id"].as_str().unwrap_or_default().to_string();
        match d.ty {
            "issue.opened" if d.payload["label"] == "ethics" => {
                open.entry(d.project).or_default().insert(issue());
            }
            "issue.resolved" => {
                open.entry(d.project).or_default().remove(&issue());
            }
            _ => {}
        }
        for tag in &d.tags {
            match tag {
                Tag::Finding(rule) => out.push((seq, found(rule, seq))),
                Tag::Override(ep) => {
                    overrides.insert(*ep, (seq, d.ts));
                }
                Tag::Justification(ep) => {
                    justifications.insert(*ep, d.ts);
                }
                Tag::Release => {
                    if open.get(d.project).is_some_and(|s| !s.is_empty()) {
                        out.push((seq, found("ethics_issues", seq)));
                    }
                    let team_ok = match d.project {
                        "proj-alpha" => true,
                        "proj-beta" => d.ts.date_naive() <= beta_expiry(),
                        _ => false,
                    };
                    if !team_ok {
                        out.push((seq, found("release_team", seq)));
                    }
                }
            }
        }
    }
    for (ep, (seq, ts)) in overrides {
        let justified = justifications.get(&ep).is_some_and(|j| *j - ts < Duration::days(14));
        let mut e = found("overrides", seq);
        e.justified = Some(justified);
        out.push((seq, e));
    }
    out.sort_by(|a, b| (a.0, &a.1.rule).cmp(&(b.0, &b.1.rule)));
    GroundTruth {
        seed,
        events: drafts.len(),
        findings: out.into_iter().map(|(_, e)| e).collect(),
    }
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    items.iter().map(|i| serde_json::to_string(i).unwrap() + "\n").collect()
}

/// Writes the scenario into `dir`, creating it if needed.
pub fn write_scenario(s: &Scenario, dir: &Path) -> std::io::Result<()> {
    use auditbot::events::{COMPETENCE_FILE, DATASHEETS_FILE, INDEPENDENCE_FILE, JOBDESC_FILE, ORGCHART_FILE};
    let regs = dir.join(REGISTERS_DIR);
    fs::create_dir_all(&regs)?;
    fs::write(dir.join(POLICY_FILE), POLICY)?;
    fs::write(dir.join(EVENTS_FILE), jsonl(&s.events))?;
    fs::write(regs.join(COMPETENCE_FILE), jsonl(&s.competence))?;
    fs::write(regs.join(INDEPENDENCE_FILE), jsonl(&s.independence))?;
    fs::write(regs.join(ORGCHART_FILE), jsonl(&s.orgchart))?;
    fs::write(regs.join(JOBDESC_FILE), jsonl(&s.jobdesc))?;
    fs::write(regs.join(DATASHEETS_FILE), jsonl(&s.datasheets))?;
    let truth = serde_json::to_string_pretty(&s.truth).unwrap() + "\n";
    fs::write(dir.join(GROUND_TRUTH_FILE), truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use auditbot::analytics::{lexicon_imbalance, psi, Histogram, Lexicon};

    #[test]
    fn templates_score_as_labelled() {
        let lex = Lexicon::builtin_english();
        for t in BIASED {
            assert!(lexicon_imbalance(t, &lex).imbalance >= 2, "{t}");
        }
        for t in NEUTRAL {
            assert!(lexicon_imbalance(t, &lex).imbalance < 2, "{t}");
        }
    }

    #[test]
    fn histograms_fall_in_their_bands() {
        let h = |s| Histogram::parse_compact(s).unwrap();
        for s in STABLE {
            assert!(psi(&h(FLAT), &h(s)).unwrap() < 0.1);
        }
        let w = psi(&h(FLAT), &h(WARN)).unwrap();
        assert!((0.1..0.25).contains(&w));
        assert!(psi(&h(FLAT), &h(ALARM)).unwrap() >= 0.25);
    }

    #[test]
    fn same_seed_same_scenario() {
        let a = generate(7, 300);
        let b = generate(7, 300);
        assert_eq!(a.events, b.events);
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.events.len(), 300);
        assert_ne!(generate(8, 300).events, a.events);
    }

    #[test]
    fn empty() {
        let s = generate(42, 0);
        assert!(s.events.is_empty());
        assert!(s.truth.findings.is_empty());
    }

    #[test]
    fn truth_covers_every_kind() {
        let s = generate(42, 3000);
        let rules: BTreeSet<&str> = s.truth.findings.iter().map(|f| f.rule.as_str()).collect();
        assert_eq!(rules.len(), 10, "{rules:?}");
    }
}
