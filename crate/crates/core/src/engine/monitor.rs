use std::collections::BTreeMap;

use chrono::{DateTime, Utc};

use super::hours::HoursState;
use super::{obligation, Finding, SeqWindow};
use crate::analytics::{lexicon_imbalance, psi, Histogram};
use crate::events::{Event, EventLog, PayloadValue, RegisterSet};
use crate::policy::{
    CompiledRule, DriftRule, ExceptionRule, GateRule, Harm, LegitimacyCheck, LegitimacyRule,
    RegisterName, RuleCheck,
};

/// What a monitor may consult while evaluating.
#[derive(Clone, Copy)]
pub struct EvalContext<'a> {
    pub log: &'a EventLog,
    pub registers: &'a RegisterSet,
    pub severity_map: &'a BTreeMap<String, u32>,
    pub window: SeqWindow,
}

#[derive(Debug)]
struct PendingOverride {
    seq: u64,
    ts: DateTime<Utc>,
    deadline: DateTime<Utc>,
    project: String,
    actor: Option<String>,
    subject: Option<PayloadValue>,
}

/// Streaming evaluator for one rule.
#[derive(Debug)]
pub struct RuleMonitor<'p> {
    rule: &'p CompiledRule,
    config_reported: bool,
    hours: HoursState,
    pending: Vec<PendingOverride>,
}

impl<'p> RuleMonitor<'p> {
    pub fn new(rule: &'p CompiledRule) -> Self {
        RuleMonitor {
            rule,
            config_reported: false,
            hours: HoursState::default(),
            pending: Vec::new(),
        }
    }

    pub fn rule(&self) -> &'p CompiledRule {
        self.rule
    }

    /// Feeds the next event. `cx.log` must contain every event up to and
    /// including `e`. Returns the findings that became definite.
    pub fn on_event(&mut self, cx: &EvalContext<'_>, e: &Event) -> Vec<Finding> {
        let rule = self.rule;
        if let RuleCheck::Exception(x) = &rule.check {
            return self.exception_event(x, e);
        }
        if e.event_type != rule.trigger() || !rule.in_scope(&e.project) {
            return Vec::new();
        }
        if let Some(problem) = self.configuration_problem(cx) {
            if cx.window.contains(e.seq) && !self.config_reported {
                self.config_reported = true;
                return vec![configuration_finding(rule, e, problem)];
            }
            return Vec::new();
        }
        let found = match &rule.check {
            RuleCheck::Obligation(o) => obligation::at_trigger(rule, o, cx, e),
            RuleCheck::Legitimacy(l) => legitimacy(rule, l, cx, e),
            RuleCheck::Hours(h) => self.hours.push(rule, h, e),
            RuleCheck::Gate(g) => gate(rule, g, e),
            RuleCheck::Drift(d) => drift(rule, d, cx, e),
            RuleCheck::Exception(_) => unreachable!(),
        };
        found.into_iter().collect()
    }

    /// End of input: overrides still waiting for a justification are
    /// unjustified.
    pub fn finish(&mut self) -> Vec<Finding> {
        let RuleCheck::Exception(x) = &self.rule.check else {
            return Vec::new();
        };
        std::mem::take(&mut self.pending)
            .into_iter()
            .map(|p| unjustified(self.rule, x, p))
            .collect()
    }

    /// Overrides seen but not yet decided.
    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    fn configuration_problem(&self, cx: &EvalContext<'_>) -> Option<String> {
        let missing = |r: RegisterName| {
            let empty = match r {
                RegisterName::Competence => cx.registers.competence.is_empty(),
                RegisterName::Independence => cx.registers.independence.is_empty(),
                RegisterName::Orgchart => cx.registers.orgchart.is_empty(),
                RegisterName::Jobdesc => cx.registers.jobdesc.is_empty(),
                RegisterName::Datasheets => cx.registers.datasheets.is_empty(),
            };
            empty.then(|| format!("register unavailable: {r} register is empty or missing"))
        };
        match &self.rule.check {
            RuleCheck::Legitimacy(l) => l.check.registers().into_iter().find_map(missing),
            RuleCheck::Gate(g) if g.lexicon.is_none() => {
                Some("lexicon unavailable: the rule's lexicon was not loaded".into())
            }
            _ => None,
        }
    }

    fn exception_event(&mut self, x: &ExceptionRule, e: &Event) -> Vec<Finding> {
        let rule = self.rule;
        let mut out = Vec::new();
        if e.event_type == x.justification_type {
            let subject = e.field(&x.join_on);
            let mut i = 0;
            while i < self.pending.len() {
                let p = &self.pending[i];
                let matches = subject.is_some()
                    && p.subject.as_ref() == subject
                    && p.project == e.project
                    && e.seq > p.seq
                    && e.ts - p.ts < x.window();
                if matches {
                    let p = self.pending.remove(i);
                    out.push(justified(rule, x, p, e));
                } else {
                    i += 1;
                }
            }
        }
        let (expired, open): (Vec<_>, Vec<_>) =
            std::mem::take(&mut self.pending).into_iter().partition(|p| e.ts >= p.deadline);
        self.pending = open;
        out.extend(expired.into_iter().map(|p| unjustified(rule, x, p)));

        if e.event_type == x.override_type && rule.in_scope(&e.project) {
            self.pending.push(PendingOverride {
                seq: e.seq,
                ts: e.ts,
                deadline: e.ts + x.window(),
                project: e.project.clone(),
                actor: e.actor.clone(),
                subject: e.field(&x.join_on).cloned(),
            });
        }
        out
    }
}

fn subject_text(x: &ExceptionRule, p: &PendingOverride) -> String {
    match &p.subject {
        Some(v) => format!("{}={}", x.join_on, v.render()),
        None => format!("without {}", x.join_on),
    }
}

fn justified(rule: &CompiledRule, x: &ExceptionRule, p: PendingOverride, just: &Event) -> Finding {
    let days = (just.ts - p.ts).num_milliseconds() as f64 / 86_400_000.0;
    let mut f = Finding::new(
        rule,
        p.seq,
        &p.project,
        format!(
            "{} {} at seq {} justified at seq {} after {days:.2} day(s), within {} day(s)",
            x.override_type,
            subject_text(x, &p),
            p.seq,
            just.seq,
            x.justify_within_days
        ),
    )
    .actor(p.actor.as_deref())
    .evidence(vec![p.seq, just.seq])
    .metrics([("days_to_justify", days), ("justify_within_days", x.justify_within_days)]);
    f.harm = Harm::MIN;
    f.justified = Some(true);
    f
}

fn unjustified(rule: &CompiledRule, x: &ExceptionRule, p: PendingOverride) -> Finding {
    let mut f = Finding::new(
        rule,
        p.seq,
        &p.project,
        format!(
            "{} {} at seq {} has no {} within {} day(s)",
            x.override_type,
            subject_text(x, &p),
            p.seq,
            x.justification_type,
            x.justify_within_days
        ),
    )
    .actor(p.actor.as_deref())
    .metrics([("justify_within_days", x.justify_within_days)]);
    f.justified = Some(false);
    f
}

fn configuration_finding(rule: &CompiledRule, e: &Event, problem: String) -> Finding {
    Finding::new(rule, e.seq, &e.project, format!("{problem}; rule {} cannot be checked", rule.id))
}

fn legitimacy(rule: &CompiledRule, l: &LegitimacyRule, cx: &EvalContext<'_>, e: &Event) -> Option<Finding> {
    let regs = cx.registers;
    let date = e.ts.date_naive();
    let new = |msg: String| Finding::new(rule, e.seq, &e.project, msg).actor(e.actor.as_deref());
    match &l.check {
        LegitimacyCheck::ReviewerCompetence { qualification_field } => {
            let Some(actor) = e.actor.as_deref() else {
                return Some(new(format!("{} at seq {} names no reviewer", e.event_type, e.seq)));
            };
            let Some(q) = e.field(qualification_field).map(PayloadValue::render) else {
                return Some(new(format!("{} at seq {} carries no {qualification_field}", e.event_type, e.seq)));
            };
            (!regs.holds_qualification(actor, &q, date)).then(|| {
                new(format!(
                    "reviewer {actor} holds no competence entry for {q} valid on {date}"
                ))
            })
        }
        LegitimacyCheck::ReviewerIndependence {
            severity_field,
            author_field,
            severities,
        } => {
            let Some(actor) = e.actor.as_deref() else {
                return Some(new(format!("{} at seq {} names no reviewer", e.event_type, e.seq)));
            };
            let Some(label) = e.field(severity_field).map(PayloadValue::render) else {
                return Some(new(format!("{} at seq {} carries no {severity_field}", e.event_type, e.seq)));
            };
            if !severities.is_empty() && !severities.contains(&label) {
                return None;
            }
            let Some(&required) = cx.severity_map.get(&label) else {
                return Some(new(format!("severity `{label}` at seq {} is not in the severity map", e.seq)));
            };
            let Some(author) = e.field(author_field).map(PayloadValue::render) else {
                return Some(new(format!("{} at seq {} carries no {author_field}", e.event_type, e.seq)));
            };
            match regs.independence_level(actor, &author) {
                Some(actual) if actual >= required as i64 => None,
                Some(actual) => Some(
                    new(format!(
                        "reviewer {actor} has independence {actual} from {author}, {label} severity needs {required}"
                    ))
                    .metrics([("required", required as f64), ("actual", actual as f64)]),
                ),
                None => Some(
                    new(format!(
                        "reviewer {actor} has no independence entry for {author}, {label} severity needs {required}"
                    ))
                    .metrics([("required", required as f64)]),
                ),
            }
        }
        LegitimacyCheck::TeamQualification { qualification } => {
            let members = regs.members(&e.project);
            if members.iter().any(|m| regs.holds_qualification(m, qualification, date)) {
                return None;
            }
            Some(
                Finding::new(
                    rule,
                    e.seq,
                    &e.project,
                    format!(
                        "no member of {} holds a valid {qualification} qualification on {date} ({} member(s) checked)",
                        e.project,
                        members.len()
                    ),
                )
                .actor(e.actor.as_deref()),
            )
        }
        LegitimacyCheck::RegisterLookup { register, key_field } => {
            let Some(key) = e.field(key_field).map(PayloadValue::render) else {
                return Some(new(format!("{} at seq {} carries no {key_field}", e.event_type, e.seq)));
            };
            let present = match register {
                RegisterName::Datasheets => regs.datasheets.iter().any(|d| d.dataset_id == key),
                RegisterName::Competence => regs.competence.iter().any(|c| c.actor == key),
                RegisterName::Independence => regs.independence.iter().any(|c| c.actor == key),
                RegisterName::Orgchart => regs.orgchart.iter().any(|o| o.actor == key),
                RegisterName::Jobdesc => regs.jobdesc.iter().any(|j| j.role == key),
            };
            (!present).then(|| new(format!("{key_field}={key} at seq {} is not in the {register} register", e.seq)))
        }
    }
}

fn gate(rule: &CompiledRule, g: &GateRule, e: &Event) -> Option<Finding> {
    let lexicon = g.lexicon.as_ref()?;
    let text = e.text(&g.text_field)?;
    let s = lexicon_imbalance(text, lexicon);
    if s.imbalance < g.max_imbalance {
        return None;
    }
    Some(
        Finding::new(
            rule,
            e.seq,
            &e.project,
            format!(
                "{} at seq {} has {} masculine-coded and {} feminine-coded words, imbalance {} >= {}",
                e.event_type, e.seq, s.masculine, s.feminine, s.imbalance, g.max_imbalance
            ),
        )
        .actor(e.actor.as_deref())
        .metrics([
            ("masculine", s.masculine as f64),
            ("feminine", s.feminine as f64),
            ("imbalance", s.imbalance as f64),
            ("max_imbalance", g.max_imbalance as f64),
        ]),
    )
}

fn drift(rule: &CompiledRule, d: &DriftRule, cx: &EvalContext<'_>, e: &Event) -> Option<Finding> {
    if e.text("feature") != Some(d.feature.as_str()) || e.text("phase") != Some("current") {
        return None;
    }
    let feature = PayloadValue::Str(d.feature.clone());
    let baseline = cx
        .log
        .before(e.seq, DriftRule::TRIGGER, Some(("feature", &feature)))
        .into_iter()
        .rev()
        .find(|b| b.project == e.project && b.text("phase") == Some("baseline"));
    let new = |msg: String| Finding::new(rule, e.seq, &e.project, msg).actor(e.actor.as_deref());
    let Some(baseline) = baseline else {
        return Some(new(format!(
            "no baseline snapshot for feature {} precedes seq {}; drift cannot be measured",
            d.feature, e.seq
        )));
    };
    let parse = |ev: &Event| ev.text("histogram").and_then(|h| Histogram::parse_compact(h).ok());
    let (Some(p), Some(q)) = (parse(baseline), parse(e)) else {
        return Some(new(format!("unreadable histogram for feature {}", d.feature)).evidence(vec![baseline.seq, e.seq]));
    };
    let value = match psi(&p, &q) {
        Ok(v) => v,
        Err(err) => {
            return Some(
                new(format!(
                    "feature {}: baseline seq {} and current seq {}: {err}; drift cannot be measured",
                    d.feature, baseline.seq, e.seq
                ))
                .evidence(vec![baseline.seq, e.seq]),
            )
        }
    };
    if value < d.warn_threshold {
        return None;
    }
    let (harm, verdict) = if value >= d.alarm_threshold {
        (rule.harm, "the ML model might need to be changed")
    } else {
        let h = Harm::new((rule.harm.get() as i64 - 2).max(1)).expect("in range");
        (h, "cause for alarm")
    };
    let mut f = new(format!(
        "feature {} drifted: psi {value:.4} against baseline seq {}; {verdict}",
        d.feature, baseline.seq
    ))
    .evidence(vec![baseline.seq, e.seq])
    .metrics([
        ("psi", value),
        ("warn_threshold", d.warn_threshold),
        ("alarm_threshold", d.alarm_threshold),
    ]);
    f.harm = harm;
    Some(f)
}
