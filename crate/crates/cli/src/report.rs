use std::collections::BTreeMap;
use std::fmt::Write as _;

use auditbot::accountability::FailurePoint;
use auditbot::alarp::{RiskAssessment, Region};
use auditbot::engine::{Finding, RunMeta};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub findings: usize,
    /// Every region appears, zero or not.
    pub by_region: BTreeMap<&'static str, usize>,
    pub by_rule: BTreeMap<String, usize>,
}

impl Summary {
    pub fn tally(findings: &[Finding], assessments: &[RiskAssessment]) -> Summary {
        let mut by_region: BTreeMap<&'static str, usize> =
            [Region::BroadlyAcceptable, Region::Alarp, Region::Intolerable].iter().map(|r| (r.as_str(), 0)).collect();
        for a in assessments {
            *by_region.entry(a.region.as_str()).or_default() += 1;
        }
        let mut by_rule = BTreeMap::new();
        for f in findings {
            *by_rule.entry(f.rule_id.clone()).or_default() += 1;
        }
        Summary {
            findings: findings.len(),
            by_region,
            by_rule,
        }
    }

    pub fn intolerable(&self) -> usize {
        self.by_region[Region::Intolerable.as_str()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub meta: RunMeta,
    pub findings: Vec<Finding>,
    pub assessments: Vec<RiskAssessment>,
    pub summary: Summary,
    pub traces: Vec<FailurePoint>,
}

impl RunReport {
    pub fn new(meta: RunMeta, findings: Vec<Finding>, assessments: Vec<RiskAssessment>, traces: Vec<FailurePoint>) -> Self {
        let summary = Summary::tally(&findings, &assessments);
        RunReport {
            meta,
            findings,
            assessments,
            summary,
            traces,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let m = &self.meta;
        let _ = writeln!(s, "audit run");
        let _ = writeln!(s, "  policy  {}", m.policy_hash);
        let _ = writeln!(s, "  log     {}", m.log_hash);
        let _ = writeln!(s, "  window  {}", m.window);
        if let Some(c) = &m.clock {
            let _ = writeln!(s, "  clock   {c}");
        }
        let r = &self.summary.by_region;
        let _ = writeln!(
            s,
            "\n{} finding(s): {} intolerable, {} alarp, {} broadly acceptable",
            self.summary.findings, r["intolerable"], r["alarp"], r["broadly_acceptable"]
        );
        for (f, a) in self.findings.iter().zip(&self.assessments) {
            let _ = writeln!(
                s,
                "\n[{}] {}  {} / harm {} x likelihood {} = {}",
                a.region.as_str(),
                f.id,
                f.project,
                f.harm.get(),
                a.likelihood,
                a.score
            );
            let _ = writeln!(s, "  {}", f.message);
            let ev: Vec<String> = f.evidence_seqs.iter().map(u64::to_string).collect();
            let _ = writeln!(s, "  evidence: seq {}", ev.join(", "));
            let _ = writeln!(s, "  triage: {}", a.rationale);
            if let Some(t) = self.traces.iter().find(|t| t.finding_id == f.id) {
                let _ = writeln!(s, "  accountability: {}", t.narrative);
            }
        }
        if !self.summary.by_rule.is_empty() {
            let _ = writeln!(s, "\nby rule:");
            for (rule, n) in &self.summary.by_rule {
                let _ = writeln!(s, "  {rule:<24} {n}");
            }
        }
        s
    }
}

/// One alert line for the alert stream.
pub fn alert_line(f: &Finding, a: &RiskAssessment) -> String {
    format!(
        "ALERT intolerable {} [{}] harm {} x likelihood {} = {}: {}",
        f.id,
        f.project,
        f.harm.get(),
        a.likelihood,
        a.score,
        f.message
    )
}
