//! Tracing a finding to the place in the chain of command where the process
//! step was missed, via job descriptions, the org chart and the activity the
//! log shows for the people responsible.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::engine::Finding;
use crate::events::{Event, EventLog, PayloadValue, RegisterSet};
use crate::policy::{CompiledRule, ObligationMode, RuleCheck};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LocatedAt {
    ActorInaction,
    RoleUnfilled,
    NoResponsibilityDefined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Responsible {
    pub role: Option<String>,
    pub actors: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailurePoint {
    pub finding_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub responsible_role: Option<String>,
    pub responsible_actors: Vec<String>,
    pub located_at: LocatedAt,
    pub escalation_chain: Vec<String>,
    pub near_miss_seqs: Vec<u64>,
    pub narrative: String,
    pub warnings: Vec<String>,
}

/// The role answerable for a rule on a project, and who holds it there.
pub fn responsible_party(rule: &CompiledRule, project: &str, registers: &RegisterSet) -> Responsible {
    let (role, warning) = match &rule.responsible_role {
        Some(r) => (Some(r.clone()), None),
        None => {
            let roles = registers.roles_for_rule(&rule.id);
            let warning = (roles.len() > 1).then(|| {
                format!(
                    "rule {} appears in {} job descriptions ({}); chose {}",
                    rule.id,
                    roles.len(),
                    roles.join(", "),
                    roles[0]
                )
            });
            (roles.first().map(|r| r.to_string()), warning)
        }
    };
    let actors = role
        .as_deref()
        .map(|r| registers.holders_of_role(r, project).into_iter().map(String::from).collect())
        .unwrap_or_default();
    Responsible { role, actors, warning }
}

/// The project member with the shortest reporting chain, ties broken by
/// actor id.
fn most_senior(project: &str, registers: &RegisterSet) -> Option<String> {
    registers
        .members(project)
        .into_iter()
        .min_by_key(|m| (registers.chain_from(m, Some(project)).len(), *m))
        .map(String::from)
}

/// Join values of the subjects the finding is about.
fn subjects(finding: &Finding, rule: &CompiledRule, log: &EventLog) -> Vec<PayloadValue> {
    let trigger = log.by_seq(finding.trigger_seq);
    let mut out = Vec::new();
    match &rule.check {
        RuleCheck::Obligation(o) => match &o.mode {
            ObligationMode::ExistsBefore => out.extend(trigger.and_then(|t| t.field(&o.join_on)).cloned()),
            ObligationMode::AllClosedBefore { close_type, .. } => {
                for seq in &finding.evidence_seqs {
                    let Some(open) = log.by_seq(*seq).filter(|e| e.event_type == o.require) else {
                        continue;
                    };
                    let Some(v) = open.field(&o.join_on) else { continue };
                    let closed = log
                        .before(finding.trigger_seq, *close_type, Some((&o.join_on, v)))
                        .iter()
                        .any(|c| c.project == finding.project);
                    if !closed && !out.contains(v) {
                        out.push(v.clone());
                    }
                }
            }
        },
        RuleCheck::Exception(x) => out.extend(trigger.and_then(|t| t.field(&x.join_on)).cloned()),
        _ => {}
    }
    out
}

/// Where the expected process step was missed for this finding.
pub fn locate_failure(finding: &Finding, rule: &CompiledRule, log: &EventLog, registers: &RegisterSet) -> FailurePoint {
    let resp = responsible_party(rule, &finding.project, registers);
    let mut warnings: Vec<String> = resp.warning.iter().cloned().collect();
    let base = |located_at, chain: Vec<String>, narrative: String, near: Vec<u64>, warnings: Vec<String>| FailurePoint {
        finding_id: finding.id.clone(),
        responsible_role: resp.role.clone(),
        responsible_actors: resp.actors.clone(),
        located_at,
        escalation_chain: chain,
        near_miss_seqs: near,
        narrative,
        warnings,
    };

    let Some(role) = resp.role.as_deref() else {
        return base(
            LocatedAt::NoResponsibilityDefined,
            Vec::new(),
            format!(
                "No job description lists rule {} and the rule names no responsible role; \
                 the policy-to-job-description mapping is incomplete.",
                rule.id
            ),
            Vec::new(),
            warnings,
        );
    };

    if resp.actors.is_empty() {
        let top = most_senior(&finding.project, registers);
        let chain = top
            .as_deref()
            .map(|a| registers.chain_from(a, Some(&finding.project)))
            .unwrap_or_default();
        let escalate = match chain.first() {
            Some(a) => format!("escalating from {a}, the most senior member of the project"),
            None => "the project has no org-chart members to escalate to".to_string(),
        };
        if chain.is_empty() {
            warnings.push(format!("project {} has no org-chart entries", finding.project));
        }
        return base(
            LocatedAt::RoleUnfilled,
            chain,
            format!("Role {role} is responsible for rule {} but nobody holds it on {}; {escalate}.", rule.id, finding.project),
            Vec::new(),
            warnings,
        );
    }

    let chain = registers.chain_from(&resp.actors[0], Some(&finding.project));
    let actors = resp.actors.join(", ");
    let mut narrative = format!("Role {role} ({actors}) is responsible for rule {} on {}.", rule.id, finding.project);
    let mut near = Vec::new();

    match (rule.expected_activity(), rule.subject_field()) {
        (Some(expected), Some(field)) => {
            let subjects = subjects(finding, rule, log);
            let by_responsible = |e: &&Event| {
                e.project == finding.project
                    && e.actor.as_deref().is_some_and(|a| resp.actors.iter().any(|r| r == a))
            };
            let bound = match rule.check {
                RuleCheck::Exception(_) => u64::MAX,
                _ => finding.trigger_seq,
            };
            let done: Vec<&Event> = log.before(bound, expected, None).into_iter().filter(by_responsible).collect();
            let mut for_subject = BTreeSet::new();
            for e in &done {
                match e.field(field) {
                    Some(v) if subjects.contains(v) => {
                        for_subject.insert(e.seq);
                    }
                    _ => near.push(e.seq),
                }
            }
            let wanted = subjects.iter().map(|v| format!("{field}={}", v.render())).collect::<Vec<_>>().join(", ");
            narrative.push_str(&format!(" Expected {expected} for {wanted}"));
            if for_subject.is_empty() {
                narrative.push_str(" was not recorded from them.");
            } else {
                let seqs: Vec<String> = for_subject.iter().map(|s| format!("seq {s}")).collect();
                narrative.push_str(&format!(
                    " appears from them only outside the required order or project ({}).",
                    seqs.join(", ")
                ));
            }
            if !near.is_empty() {
                let seqs: Vec<String> = near.iter().map(|s| format!("seq {s}")).collect();
                narrative.push_str(&format!(
                    " They did record {expected} for other subjects ({}), so the step was known but missed here.",
                    seqs.join(", ")
                ));
            }
        }
        _ => narrative.push_str(&format!(
            " {} rules define no single expected activity; the finding is theirs to act on.",
            rule.kind
        )),
    }
    narrative.push_str(&format!(" Escalation: {}.", chain.join(" -> ")));
    base(LocatedAt::ActorInaction, chain, narrative, near, warnings)
}
