//! Rule evaluation.
//!
//! Every rule runs as a [`RuleMonitor`]: a small state machine fed the log
//! one event at a time, in seq order. A batch audit feeds each monitor the
//! whole log (rules in parallel); watch mode feeds all monitors as lines
//! arrive. Both paths run the same code, which is what makes their outputs
//! equal. Monitors only look backwards from the current event, apart from
//! exception rules, which hold an override open until its justification
//! arrives or its deadline passes.

mod hours;
mod monitor;
mod obligation;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use monitor::{EvalContext, RuleMonitor};

use crate::alarp::AlarpParams;
use crate::events::{EventLog, RegisterSet};
use crate::policy::{CompiledPolicy, CompiledRule, Harm, RuleKind};

/// Inclusive range of seq numbers; either end may be open.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeqWindow {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<u64>,
}

impl SeqWindow {
    pub const ALL: SeqWindow = SeqWindow { start: None, end: None };

    pub fn new(start: Option<u64>, end: Option<u64>) -> Self {
        SeqWindow { start, end }
    }

    pub fn contains(&self, seq: u64) -> bool {
        self.start.is_none_or(|s| seq >= s) && self.end.is_none_or(|e| seq <= e)
    }
}

impl fmt::Display for SeqWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let part = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
        write!(f, "{}:{}", part(self.start), part(self.end))
    }
}

impl FromStr for SeqWindow {
    type Err = String;

    /// `START:END`, `START:`, `:END` or `:`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("window `{s}` must look like START:END"))?;
        let num = |x: &str| -> Result<Option<u64>, String> {
            let x = x.trim();
            if x.is_empty() {
                Ok(None)
            } else {
                x.parse().map(Some).map_err(|_| format!("`{x}` is not a seq number"))
            }
        };
        let w = SeqWindow::new(num(a)?, num(b)?);
        if let (Some(a), Some(b)) = (w.start, w.end) {
            if a > b {
                return Err(format!("window start {a} is after end {b}"));
            }
        }
        Ok(w)
    }
}

/// One detected (non)compliance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub id: String,
    pub rule_id: String,
    pub kind: RuleKind,
    pub harm: Harm,
    pub project: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_actor: Option<String>,
    pub trigger_seq: u64,
    pub evidence_seqs: Vec<u64>,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub justified: Option<bool>,
}

impl Finding {
    pub(crate) fn new(rule: &CompiledRule, trigger_seq: u64, project: &str, message: String) -> Finding {
        Finding {
            id: format!("{}:{trigger_seq}", rule.id),
            rule_id: rule.id.clone(),
            kind: rule.kind,
            harm: rule.harm,
            project: project.to_string(),
            subject_actor: None,
            trigger_seq,
            evidence_seqs: vec![trigger_seq],
            message,
            metrics: None,
            justified: None,
        }
    }

    pub(crate) fn actor(mut self, actor: Option<&str>) -> Self {
        self.subject_actor = actor.map(str::to_string);
        self
    }

    pub(crate) fn evidence(mut self, mut seqs: Vec<u64>) -> Self {
        seqs.sort_unstable();
        seqs.dedup();
        self.evidence_seqs = seqs;
        self
    }

    pub(crate) fn metrics<const N: usize>(mut self, m: [(&str, f64); N]) -> Self {
        self.metrics = Some(m.into_iter().map(|(k, v)| (k.to_string(), v)).collect());
        self
    }

    fn sort_key(&self) -> (u64, &str) {
        (self.trigger_seq, &self.rule_id)
    }
}

/// Metadata sealed with every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub policy_hash: String,
    pub log_hash: String,
    pub window: SeqWindow,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock: Option<String>,
    pub alarp: AlarpParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FindingSet {
    pub meta: RunMeta,
    pub findings: Vec<Finding>,
}

impl FindingSet {
    /// Sorts by (trigger_seq, rule_id) and drops findings outside the window.
    pub fn from_unsorted(meta: RunMeta, mut findings: Vec<Finding>) -> FindingSet {
        findings.retain(|f| meta.window.contains(f.trigger_seq));
        findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        FindingSet { meta, findings }
    }

    pub fn counts_by_rule(&self) -> BTreeMap<&str, usize> {
        let mut out = BTreeMap::new();
        for f in &self.findings {
            *out.entry(f.rule_id.as_str()).or_default() += 1;
        }
        out
    }

    pub fn get(&self, id: &str) -> Option<&Finding> {
        self.findings.iter().find(|f| f.id == id)
    }
}

pub fn run_meta(policy: &CompiledPolicy, log: &EventLog, window: SeqWindow) -> RunMeta {
    RunMeta {
        policy_hash: policy.source.digest(),
        log_hash: log.digest(),
        window,
        clock: None,
        alarp: policy.alarp,
    }
}

/// Evaluates one rule over the whole log.
pub fn eval_rule(rule: &CompiledRule, cx: &EvalContext<'_>) -> Vec<Finding> {
    let mut m = RuleMonitor::new(rule);
    let mut out = Vec::new();
    for e in cx.log {
        out.extend(m.on_event(cx, e));
    }
    out.extend(m.finish());
    out
}

/// Runs every rule over the log and returns the sorted findings whose
/// trigger lies in `window`, with run metadata.
pub fn run_audit(
    policy: &CompiledPolicy,
    log: &EventLog,
    registers: &RegisterSet,
    window: SeqWindow,
) -> FindingSet {
    let cx = EvalContext {
        log,
        registers,
        severity_map: &policy.source.severity_map,
        window,
    };
    let findings: Vec<Finding> = policy
        .rules
        .par_iter()
        .flat_map_iter(|r| eval_rule(r, &cx))
        .collect();
    FindingSet::from_unsorted(run_meta(policy, log, window), findings)
}

fn checked(rule: &CompiledRule, kind: RuleKind) {
    assert_eq!(rule.kind, kind, "rule {} is not a {kind} rule", rule.id);
}

fn whole_log<'a>(log: &'a EventLog, registers: &'a RegisterSet, severity_map: &'a BTreeMap<String, u32>) -> EvalContext<'a> {
    EvalContext {
        log,
        registers,
        severity_map,
        window: SeqWindow::ALL,
    }
}

pub fn eval_obligation(rule: &CompiledRule, log: &EventLog) -> Vec<Finding> {
    checked(rule, RuleKind::Obligation);
    let (regs, sev) = (RegisterSet::default(), BTreeMap::new());
    eval_rule(rule, &whole_log(log, &regs, &sev))
}

pub fn eval_legitimacy(
    rule: &CompiledRule,
    log: &EventLog,
    registers: &RegisterSet,
    severity_map: &BTreeMap<String, u32>,
) -> Vec<Finding> {
    checked(rule, RuleKind::Legitimacy);
    eval_rule(rule, &whole_log(log, registers, severity_map))
}

pub fn eval_exception(rule: &CompiledRule, log: &EventLog) -> Vec<Finding> {
    checked(rule, RuleKind::Exception);
    let (regs, sev) = (RegisterSet::default(), BTreeMap::new());
    eval_rule(rule, &whole_log(log, &regs, &sev))
}


#[cfg(test)]
mod tests;
