use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::compile::{
    CompiledPolicy, CompiledRule, LegitimacyCheck, ObligationMode, RegisterName, RuleCheck,
};
use crate::events::EventType;

/// One readable field: a payload field, or `actor` for the event's actor.
///
/// The envelope (`seq`, `ts`, `type`, `project`) is read for every event and
/// is not listed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct FieldRef {
    pub event_type: EventType,
    pub field: String,
}

impl FieldRef {
    pub fn new(event_type: EventType, field: impl Into<String>) -> Self {
        FieldRef {
            event_type,
            field: field.into(),
        }
    }
}

impl fmt::Display for FieldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.event_type, self.field)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub fields: BTreeSet<FieldRef>,
    pub registers: BTreeSet<RegisterName>,
}

/// What each rule is allowed to read.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct DataAccessManifest {
    pub entries: BTreeMap<String, ManifestEntry>,
}

impl DataAccessManifest {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Whether any rule reads `field` of events of type `ty`.
    pub fn admits(&self, ty: EventType, field: &str) -> bool {
        self.entries
            .values()
            .any(|e| e.fields.iter().any(|f| f.event_type == ty && f.field == field))
    }

    pub fn all_fields(&self) -> BTreeSet<&FieldRef> {
        self.entries.values().flat_map(|e| &e.fields).collect()
    }
}

pub fn required_fields(policy: &CompiledPolicy) -> DataAccessManifest {
    policy.manifest.clone()
}

pub(super) fn build_manifest(rules: &[CompiledRule]) -> DataAccessManifest {
    DataAccessManifest {
        entries: rules.iter().map(|r| (r.id.clone(), entry_for(r))).collect(),
    }
}

fn entry_for(rule: &CompiledRule) -> ManifestEntry {
    let mut e = ManifestEntry::default();
    let mut add = |ty: EventType, f: &str| {
        e.fields.insert(FieldRef::new(ty, f));
    };
    add(rule.trigger(), "actor");
    match &rule.check {
        RuleCheck::Obligation(o) => {
            add(o.trigger, &o.join_on);
            add(o.require, &o.join_on);
            add(o.require, "actor");
            if let ObligationMode::AllClosedBefore { close_type, filter } = &o.mode {
                add(*close_type, &o.join_on);
                add(*close_type, "actor");
                if let Some((key, _)) = filter {
                    add(o.require, key);
                }
            }
        }
        RuleCheck::Legitimacy(l) => match &l.check {
            LegitimacyCheck::ReviewerCompetence { qualification_field } => {
                add(l.trigger, qualification_field)
            }
            LegitimacyCheck::ReviewerIndependence {
                severity_field,
                author_field,
                ..
            } => {
                add(l.trigger, severity_field);
                add(l.trigger, author_field);
            }
            LegitimacyCheck::TeamQualification { .. } => {}
            LegitimacyCheck::RegisterLookup { key_field, .. } => add(l.trigger, key_field),
        },
        RuleCheck::Exception(x) => {
            add(x.override_type, &x.join_on);
            add(x.justification_type, &x.join_on);
            add(x.justification_type, "actor");
        }
        RuleCheck::Hours(_) => {
            add(EventType::ActivitySession, "start");
            add(EventType::ActivitySession, "end");
        }
        RuleCheck::Gate(g) => add(g.trigger, &g.text_field),
        RuleCheck::Drift(_) => {
            for f in ["feature", "phase", "histogram"] {
                add(EventType::ModelFeatureSnapshot, f);
            }
        }
    }
    if let RuleCheck::Legitimacy(l) = &rule.check {
        e.registers.extend(l.check.registers());
    }
    e
}
