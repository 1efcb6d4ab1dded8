use std::collections::BTreeSet;

use auditbot::engine::{eval_obligation, eval_rule, run_audit, EvalContext, RuleMonitor, SeqWindow};
use auditbot::events::{ingest_events, EventCatalog, EventLog, EventLogBuilder, RegisterSet};
use auditbot::policy::{compile_policy, parse_policy, CompiledPolicy};
use proptest::prelude::*;
use serde_json::json;

#[derive(Debug, Clone)]
struct Ev {
    ty: &'static str,
    project: &'static str,
    key: Option<&'static str>,
    label: &'static str,
}

const TYPES: &[&str] = &[
    "build.training_run",
    "build.release",
    "dataset.bias_assessment",
    "dataset.registered",
    "issue.opened",
    "issue.resolved",
];

#[derive(Debug, Clone)]
enum Rule {
    Exists { trigger: &'static str, require: &'static str },
    Closed { trigger: &'static str, filtered: bool },
}

impl Rule {
    fn text(&self) -> String {
        let body = match self {
            Rule::Exists { trigger, require } => {
                format!("trigger = {trigger} require = {require} mode = exists_before join_on = dataset_id")
            }
            Rule::Closed { trigger, filtered } => format!(
                "trigger = {trigger} require = issue.opened mode = all_closed_before close_type = issue.resolved join_on = issue_id {}",
                if *filtered { "filter = \"label=ethics\"" } else { "" }
            ),
        };
        format!("policy \"p\" {{}}\nrule r {{ kind = obligation harm = 3 {body} }}")
    }

    /// Seqs of triggers that should produce a finding, straight from the
    /// definition. Events are 1-indexed by position.
    fn oracle(&self, log: &[Ev]) -> BTreeSet<u64> {
        let mut out = BTreeSet::new();
        for (i, t) in log.iter().enumerate() {
            let earlier = &log[..i];
            match self {
                Rule::Exists { trigger, require } if t.ty == *trigger => {
                    let key = if t.ty == "build.release" { None } else { t.key };
                    let ok = key.is_some_and(|k| {
                        earlier.iter().any(|e| e.ty == *require && e.project == t.project && e.key == Some(k))
                    });
                    if !ok {
                        out.insert(i as u64 + 1);
                    }
                }
                Rule::Closed { trigger, filtered } if t.ty == *trigger => {
                    let open = earlier.iter().any(|o| {
                        o.ty == "issue.opened"
                            && o.project == t.project
                            && (!filtered || o.label == "ethics")
                            && !earlier
                                .iter()
                                .any(|c| c.ty == "issue.resolved" && c.project == t.project && c.key == o.key)
                    });
                    if open {
                        out.insert(i as u64 + 1);
                    }
                }
                _ => {}
            }
        }
        out
    }
}

fn to_log(evs: &[Ev]) -> EventLog {
    let lines: Vec<String> = evs
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let key = e.key.unwrap_or("k0");
            let payload = match e.ty {
                "build.training_run" => json!({"build_id": "b", "dataset_id": key}),
                "build.release" => json!({"build_id": "b"}),
                "dataset.bias_assessment" => json!({"dataset_id": key, "method": "m"}),
                "dataset.registered" => json!({"dataset_id": key}),
                "issue.opened" => json!({"issue_id": key, "label": e.label}),
                _ => json!({"issue_id": key}),
            };
            json!({"seq": i + 1, "ts": format!("2025-01-01T00:{:02}:00Z", i), "type": e.ty, "project": e.project, "payload": payload})
                .to_string()
        })
        .collect();
    ingest_events(lines).unwrap()
}

fn event() -> impl Strategy<Value = Ev> {
    (
        prop::sample::select(TYPES),
        prop::sample::select(&["P", "Q"][..]),
        prop::sample::select(&["k1", "k2", "k3"][..]),
        prop::sample::select(&["ethics", "perf"][..]),
    )
        .prop_map(|(ty, project, key, label)| Ev { ty, project, key: Some(key), label })
}

fn rule() -> impl Strategy<Value = Rule> {
    let trig = prop::sample::select(&["build.training_run", "build.release"][..]);
    prop_oneof![
        (trig.clone(), prop::sample::select(&["dataset.bias_assessment", "dataset.registered"][..]))
            .prop_map(|(trigger, require)| Rule::Exists { trigger, require }),
        (trig, any::<bool>()).prop_map(|(trigger, filtered)| Rule::Closed { trigger, filtered }),
    ]
}

fn compile(text: &str) -> CompiledPolicy {
    compile_policy(&parse_policy(text).unwrap(), &EventCatalog::standard()).unwrap()
}

fn cx<'a>(log: &'a EventLog, regs: &'a RegisterSet, p: &'a CompiledPolicy, window: SeqWindow) -> EvalContext<'a> {
    EvalContext { log, registers: regs, severity_map: &p.source.severity_map, window }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn obligation_matches_definition(r in rule(), evs in prop::collection::vec(event(), 0..=20)) {
        let p = compile(&r.text());
        let got: BTreeSet<u64> = eval_obligation(&p.rules[0], &to_log(&evs)).iter().map(|f| f.trigger_seq).collect();
        prop_assert_eq!(got, r.oracle(&evs));
    }

    #[test]
    fn findings_grow_with_the_window(r in rule(), evs in prop::collection::vec(event(), 0..=20), a in 0u64..22, b in 0u64..22) {
        let p = compile(&r.text());
        let log = to_log(&evs);
        let regs = RegisterSet::default();
        let (lo, hi) = (a.min(b), a.max(b));
        let narrow = run_audit(&p, &log, &regs, SeqWindow::new(Some(lo), Some(lo + (hi - lo) / 2)));
        let wide = run_audit(&p, &log, &regs, SeqWindow::new(Some(lo), Some(hi)));
        for f in &narrow.findings {
            prop_assert!(wide.get(&f.id) == Some(f));
        }
    }

    #[test]
    fn streaming_over_prefixes_equals_batch(r in rule(), evs in prop::collection::vec(event(), 0..=20)) {
        let p = compile(&r.text());
        let full = to_log(&evs);
        let regs = RegisterSet::default();
        let batch = eval_rule(&p.rules[0], &cx(&full, &regs, &p, SeqWindow::ALL));

        let mut builder = EventLogBuilder::new(EventCatalog::standard());
        let mut m = RuleMonitor::new(&p.rules[0]);
        let mut streamed = Vec::new();
        for (i, e) in full.iter().enumerate() {
            builder.push_line(i + 1, &e.to_json_line()).unwrap();
            let log = builder.log();
            let last = log.events().last().unwrap();
            streamed.extend(m.on_event(&cx(log, &regs, &p, SeqWindow::ALL), last));
        }
        streamed.extend(m.finish());
        prop_assert_eq!(streamed, batch);
    }
}

#[test]
fn finding_ids_are_unique() {
    let evs: Vec<Ev> = (0..20)
        .map(|i| Ev { ty: TYPES[i % 2], project: "P", key: Some("k1"), label: "ethics" })
        .collect();
    let p = compile(&Rule::Exists { trigger: "build.training_run", require: "dataset.registered" }.text());
    let set = run_audit(&p, &to_log(&evs), &RegisterSet::default(), SeqWindow::ALL);
    let ids: BTreeSet<&str> = set.findings.iter().map(|f| f.id.as_str()).collect();
    assert_eq!(ids.len(), set.findings.len());
    assert_eq!(set.findings.len(), 10);
}
