use super::*;
use crate::events::{ingest_events, CompetenceEntry, EventCatalog, IndependenceEntry, OrgEntry};
use crate::policy::{compile_policy, parse_policy, Harm};
use chrono::NaiveDate;
use serde_json::json;

fn policy(rules: &str) -> CompiledPolicy {
    let text = format!("policy \"t\" {{}}\nseverity_map {{ low = 0 high = 2 }}\n{rules}");
    compile_policy(&parse_policy(&text).unwrap(), &EventCatalog::standard()).unwrap()
}

/// (seq, day offset from 2025-01-06, event type, actor, payload)
fn log(events: &[(u64, f64, &str, Option<&str>, serde_json::Value)]) -> EventLog {
    let base = chrono::DateTime::parse_from_rfc3339("2025-01-06T00:00:00Z").unwrap().to_utc();
    let lines: Vec<String> = events
        .iter()
        .map(|(seq, day, ty, actor, payload)| {
            let ts = base + chrono::Duration::seconds((day * 86_400.0) as i64);
            let mut v = json!({"seq": seq, "ts": crate::events::format_ts(&ts), "type": ty, "project": "P", "payload": payload});
            if let Some(a) = actor {
                v["actor"] = json!(a);
            }
            v.to_string()
        })
        .collect();
    ingest_events(lines).unwrap()
}

fn ids(fs: &[Finding]) -> Vec<String> {
    let mut v: Vec<String> = fs.iter().map(|f| f.id.clone()).collect();
    v.sort();
    v
}

const BIAS: &str = "rule bias { kind = obligation harm = 4 trigger = build.training_run
    require = dataset.bias_assessment mode = exists_before join_on = dataset_id }";

const ETHICS: &str = r#"rule ethics { kind = obligation harm = 5 trigger = build.release require = issue.opened
    mode = all_closed_before close_type = issue.resolved join_on = issue_id filter = "label=ethics" }"#;

#[test]
fn exists_before_in_order() {
    let p = policy(BIAS);
    let l = log(&[
        (3, 0.0, "dataset.bias_assessment", None, json!({"dataset_id": "d1", "method": "m"})),
        (8, 1.0, "build.training_run", None, json!({"dataset_id": "d1", "build_id": "b"})),
    ]);
    assert!(eval_obligation(&p.rules[0], &l).is_empty());
}

#[test]
fn exists_before_order_violated() {
    let p = policy(BIAS);
    let l = log(&[
        (8, 1.0, "build.training_run", Some("dev"), json!({"dataset_id": "d1", "build_id": "b"})),
        (12, 2.0, "dataset.bias_assessment", None, json!({"dataset_id": "d1", "method": "m"})),
    ]);
    let f = eval_obligation(&p.rules[0], &l);
    assert_eq!(ids(&f), ["bias:8"]);
    assert_eq!(f[0].evidence_seqs, [8]);
    assert_eq!(f[0].subject_actor.as_deref(), Some("dev"));
}

#[test]
fn all_closed_before_cites_open_issue() {
    let p = policy(ETHICS);
    let open = (5, 0.0, "issue.opened", None, json!({"issue_id": "i1", "label": "ethics"}));
    let other = (6, 0.0, "issue.opened", None, json!({"issue_id": "i2", "label": "perf"}));
    let release = (20, 2.0, "build.release", None, json!({"build_id": "b"}));
    let f = eval_obligation(&p.rules[0], &log(&[open.clone(), other.clone(), release.clone()]));
    assert_eq!(ids(&f), ["ethics:20"]);
    assert_eq!(f[0].evidence_seqs, [5, 20]);

    let resolved = (10, 1.0, "issue.resolved", None, json!({"issue_id": "i1"}));
    assert!(eval_obligation(&p.rules[0], &log(&[open, other, resolved, release])).is_empty());
}

#[test]
fn reviewer_competence() {
    let p = policy(
        "rule comp { kind = legitimacy harm = 3 trigger = doc.review_completed
         check = reviewer_competence qualification_field = review_type }",
    );
    let review = json!({"doc_id": "x", "review_type": "code", "severity": "low", "author_org": "o"});
    let l = log(&[(1, 0.0, "doc.review_completed", Some("r1"), review)]);
    let entry = |to: &str| CompetenceEntry {
        actor: "r1".into(),
        qualification: "code".into(),
        valid_from: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
        valid_to: NaiveDate::parse_from_str(to, "%Y-%m-%d").unwrap(),
    };
    let regs = RegisterSet { competence: vec![entry("2025-12-31")], ..Default::default() };
    assert!(eval_legitimacy(&p.rules[0], &l, &regs, &p.source.severity_map).is_empty());
    // valid_to is inclusive: the review is on 2025-01-06
    let regs = RegisterSet { competence: vec![entry("2025-01-06")], ..Default::default() };
    assert!(eval_legitimacy(&p.rules[0], &l, &regs, &p.source.severity_map).is_empty());
    let regs = RegisterSet { competence: vec![entry("2025-01-05")], ..Default::default() };
    assert_eq!(ids(&eval_legitimacy(&p.rules[0], &l, &regs, &p.source.severity_map)), ["comp:1"]);
}

#[test]
fn reviewer_independence_metrics() {
    let p = policy(
        "rule ind { kind = legitimacy harm = 4 trigger = doc.review_completed
         check = reviewer_independence severity_field = severity }",
    );
    let review = json!({"doc_id": "x", "review_type": "code", "severity": "high", "author_org": "orgA"});
    let l = log(&[(1, 0.0, "doc.review_completed", Some("r1"), review)]);
    let regs = |level| RegisterSet {
        independence: vec![IndependenceEntry { actor: "r1".into(), subject: "orgA".into(), level }],
        ..Default::default()
    };
    let f = eval_legitimacy(&p.rules[0], &l, &regs(1), &p.source.severity_map);
    assert_eq!(f.len(), 1);
    let m = f[0].metrics.as_ref().unwrap();
    assert_eq!((m["required"], m["actual"]), (2.0, 1.0));
    assert!(eval_legitimacy(&p.rules[0], &l, &regs(2), &p.source.severity_map).is_empty());
}

#[test]
fn team_qualification_needs_one_member() {
    let p = policy(
        r#"rule team { kind = legitimacy harm = 5 trigger = build.release
           check = team_qualification qualification = "ethics-training" }"#,
    );
    let l = log(&[(1, 0.0, "build.release", None, json!({"build_id": "b"}))]);
    let member = |a: &str| OrgEntry { actor: a.into(), role: "dev".into(), project: Some("P".into()), reports_to: None };
    let mut regs = RegisterSet {
        orgchart: vec![member("a"), member("b")],
        competence: vec![CompetenceEntry {
            actor: "z".into(),
            qualification: "ethics-training".into(),
            valid_from: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            valid_to: NaiveDate::from_ymd_opt(2026, 1, 1).unwrap(),
        }],
        ..Default::default()
    };
    assert_eq!(ids(&eval_legitimacy(&p.rules[0], &l, &regs, &p.source.severity_map)), ["team:1"]);
    regs.competence[0].actor = "b".into();
    assert!(eval_legitimacy(&p.rules[0], &l, &regs, &p.source.severity_map).is_empty());
}

#[test]
fn missing_register_is_one_configuration_finding() {
    let p = policy(
        "rule ds { kind = legitimacy harm = 3 trigger = build.training_run
         check = register_lookup register = datasheets key_field = dataset_id }",
    );
    let l = log(&[
        (1, 0.0, "build.training_run", None, json!({"dataset_id": "d1", "build_id": "b"})),
        (2, 0.0, "build.training_run", None, json!({"dataset_id": "d2", "build_id": "c"})),
    ]);
    let f = eval_legitimacy(&p.rules[0], &l, &RegisterSet::default(), &p.source.severity_map);
    assert_eq!(ids(&f), ["ds:1"]);
    assert!(f[0].message.contains("register unavailable"));
    assert_eq!(f[0].harm.get(), 3);
    let set = run_audit(&p, &l, &RegisterSet::default(), SeqWindow::new(Some(2), None));
    assert_eq!(ids(&set.findings), ["ds:2"]);
}

const EXC: &str = "rule exc { kind = exception harm = 4 override_type = rule.override
    justification_type = rule.justification join_on = override_id }";

fn override_log(just_day: Option<f64>) -> EventLog {
    let mut ev = vec![(1, 0.0, "rule.override", Some("a"), json!({"override_id": "o1", "rule_ref": "bias"}))];
    if let Some(d) = just_day {
        ev.push((2, d, "rule.justification", Some("a"), json!({"override_id": "o1", "reason": "r"})));
    }
    log(&ev)
}

#[test]
fn exception_windows() {
    let p = policy(EXC);
    let r = &p.rules[0];
    let f = eval_exception(r, &override_log(Some(3.0)));
    assert_eq!((f[0].justified, f[0].harm), (Some(true), Harm::MIN));
    assert_eq!(f[0].evidence_seqs, [1, 2]);
    let f = eval_exception(r, &override_log(None));
    assert_eq!((f[0].justified, f[0].harm.get()), (Some(false), 4));
    let f = eval_exception(r, &override_log(Some(20.0)));
    assert_eq!(f[0].justified, Some(false));
    // exactly at the deadline is late
    let f = eval_exception(r, &override_log(Some(14.0)));
    assert_eq!(f[0].justified, Some(false));
}

#[test]
fn hours_threshold_is_strict() {
    let p = policy("rule hrs { kind = hours harm = 3 }");
    let session = |seq: u64, day: u32, h0: u32, h1: u32| {
        (
            seq,
            day as f64,
            "activity.session",
            Some("w"),
            json!({"start": format!("2025-01-{:02}T{h0:02}:00:00Z", 6 + day), "end": format!("2025-01-{:02}T{h1:02}:00:00Z", 6 + day)}),
        )
    };
    // 6 days x 8 h = 48 h: not over
    let exact: Vec<_> = (0..6).map(|d| session(d as u64 + 1, d, 8, 16)).collect();
    assert!(run_audit(&p, &log(&exact), &RegisterSet::default(), SeqWindow::ALL).findings.is_empty());
    let mut over = exact.clone();
    over.push(session(7, 6, 8, 9));
    let f = run_audit(&p, &log(&over), &RegisterSet::default(), SeqWindow::ALL).findings;
    assert_eq!(ids(&f), ["hrs:7"]);
    let m = f[0].metrics.as_ref().unwrap();
    assert_eq!((m["week_hours"], m["threshold_hours"], m["consecutive_weeks"]), (49.0, 48.0, 1.0));
    assert!(f[0].message.contains("2025-W02"));
}

#[test]
fn hours_consecutive_weeks() {
    let p = policy("rule hrs { kind = hours harm = 3 threshold_hours = 10 consecutive_weeks = 2 }");
    let long = |seq: u64, date: &str| {
        (seq, (seq - 1) as f64 * 7.0, "activity.session", Some("w"),
         json!({"start": format!("{date}T00:00:00Z"), "end": format!("{date}T12:00:00Z")}))
    };
    let l = log(&[long(1, "2025-01-06"), long(2, "2025-01-13"), long(3, "2025-01-27")]);
    let f = run_audit(&p, &l, &RegisterSet::default(), SeqWindow::ALL).findings;
    assert_eq!(ids(&f), ["hrs:2"]);
}

#[test]
fn gate_and_drift() {
    let p = policy(
        "rule g { kind = gate harm = 2 trigger = job_posting.draft text_field = text lexicon = builtin }
         rule d { kind = drift harm = 5 feature = age }",
    );
    let base = "-inf,1,2,3,inf|0.25,0.25,0.25,0.25";
    let l = log(&[
        (1, 0.0, "job_posting.draft", None, json!({"posting_id": "p1", "text": "Dominant competitive leader, a rockstar"})),
        (2, 0.0, "job_posting.draft", None, json!({"posting_id": "p2", "text": "Supportive collaborative leader"})),
        (3, 0.0, "model.feature_snapshot", None, json!({"feature": "age", "phase": "baseline", "histogram": base})),
        (4, 1.0, "model.feature_snapshot", None, json!({"feature": "age", "phase": "current", "histogram": "-inf,1,2,3,inf|0.45,0.25,0.15,0.15"})),
        (5, 2.0, "model.feature_snapshot", None, json!({"feature": "age", "phase": "current", "histogram": "-inf,1,2,3,inf|0.6,0.2,0.1,0.1"})),
        (6, 3.0, "model.feature_snapshot", None, json!({"feature": "age", "phase": "current", "histogram": base})),
    ]);
    let set = run_audit(&p, &l, &RegisterSet::default(), SeqWindow::ALL);
    assert_eq!(ids(&set.findings), ["d:4", "d:5", "g:1"]);
    let d4 = set.get("d:4").unwrap();
    assert_eq!(d4.harm.get(), 3);
    assert!(d4.message.contains("cause for alarm"));
    // oracle values from an independent calculation
    assert!((d4.metrics.as_ref().unwrap()["psi"] - 0.21972245773362195).abs() < 1e-12);
    let d5 = set.get("d:5").unwrap();
    assert_eq!(d5.harm.get(), 5);
    assert!(d5.message.contains("the ML model might need to be changed"));
    assert!((d5.metrics.as_ref().unwrap()["psi"] - 0.5924584552018219).abs() < 1e-12);
    assert_eq!(d5.evidence_seqs, [3, 5]);
}

#[test]
fn run_is_sorted_and_deterministic() {
    let p = policy(&format!("{BIAS}\n{ETHICS}"));
    let l = log(&[
        (1, 0.0, "issue.opened", None, json!({"issue_id": "i1", "label": "ethics"})),
        (2, 0.0, "build.release", None, json!({"build_id": "b"})),
        (3, 0.0, "build.training_run", None, json!({"dataset_id": "d1", "build_id": "b"})),
    ]);
    let a = run_audit(&p, &l, &RegisterSet::default(), SeqWindow::ALL);
    let b = run_audit(&p, &l, &RegisterSet::default(), SeqWindow::ALL);
    assert_eq!(a, b);
    assert_eq!(a.findings.iter().map(|f| f.id.as_str()).collect::<Vec<_>>(), ["ethics:2", "bias:3"]);
    assert_eq!(a.meta.log_hash, l.digest());
}

#[test]
fn empty_policy_gives_empty_set_with_meta() {
    let p = policy("");
    let set = run_audit(&p, &EventLog::default(), &RegisterSet::default(), SeqWindow::ALL);
    assert!(set.findings.is_empty());
    assert_eq!(set.meta.policy_hash.len(), 64);
}

#[test]
fn window_parsing() {
    assert_eq!("3:9".parse::<SeqWindow>().unwrap(), SeqWindow::new(Some(3), Some(9)));
    assert_eq!(":9".parse::<SeqWindow>().unwrap(), SeqWindow::new(None, Some(9)));
    assert_eq!(":".parse::<SeqWindow>().unwrap(), SeqWindow::ALL);
    assert!("9:3".parse::<SeqWindow>().is_err());
    assert!("x".parse::<SeqWindow>().is_err());
    assert_eq!(SeqWindow::new(Some(3), None).to_string(), "3:");
}
