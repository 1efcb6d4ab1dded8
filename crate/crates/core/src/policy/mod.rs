//! The policy language.
//!
//! A policy file is the machine-readable safety, ethics and quality plan: it
//! names the organisation's public commitments, the rules implementing them,
//! the harm each rule's violation carries, and the thresholds bounding the
//! range of acceptable answers. Text goes through [`parse_policy`] into a
//! [`PolicyDocument`], then through [`compile_policy`] into a
//! [`CompiledPolicy`] with typed parameters and a [`DataAccessManifest`].

mod compile;
mod glob;
mod lexer;
mod manifest;
mod parser;
mod printer;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use compile::{
    compile_policy, param_fields, CompileError, CompiledPolicy, CompiledRule, DriftRule, ExceptionRule,
    GateRule, HoursRule, LegitimacyCheck, LegitimacyRule, ObligationMode, ObligationRule,
    LexiconLoadError, LexiconSource, RegisterName, RuleCheck,
};
pub use glob::ProjectGlob;
pub use manifest::{required_fields, DataAccessManifest, FieldRef, ManifestEntry};
pub use parser::{parse_policy, ParseError};
pub use printer::to_policy_text;

/// The six families of rule the engine knows how to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Obligation,
    Legitimacy,
    Exception,
    Hours,
    Gate,
    Drift,
}

impl RuleKind {
    pub const ALL: [RuleKind; 6] = [
        RuleKind::Obligation,
        RuleKind::Legitimacy,
        RuleKind::Exception,
        RuleKind::Hours,
        RuleKind::Gate,
        RuleKind::Drift,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::Obligation => "obligation",
            RuleKind::Legitimacy => "legitimacy",
            RuleKind::Exception => "exception",
            RuleKind::Hours => "hours",
            RuleKind::Gate => "gate",
            RuleKind::Drift => "drift",
        }
    }

    pub fn from_name(name: &str) -> Option<RuleKind> {
        RuleKind::ALL.into_iter().find(|k| k.as_str() == name)
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordinal harm level, 1 (negligible) to 5 (severe).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Harm(u8);

impl Harm {
    pub const MIN: Harm = Harm(1);
    pub const MAX: Harm = Harm(5);

    pub fn new(level: i64) -> Option<Harm> {
        (1..=5).contains(&level).then_some(Harm(level as u8))
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl<'de> Deserialize<'de> for Harm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Harm::new(v).ok_or_else(|| serde::de::Error::custom(format!("harm out of range 1..5: {v}")))
    }
}

/// A right-hand side in a `key = value` field.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Int(i64),
    Real(f64),
    Ident(String),
    List(Vec<String>),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Str(_) => "string",
            Value::Int(_) => "integer",
            Value::Real(_) => "number",
            Value::Ident(_) => "identifier",
            Value::List(_) => "list",
        }
    }

    /// Identifiers and strings are interchangeable wherever a name is expected.
    pub fn as_name(&self) -> Option<&str> {
        match self {
            Value::Str(s) | Value::Ident(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match *self {
            Value::Int(i) => Some(i as f64),
            Value::Real(r) => Some(r),
            _ => None,
        }
    }
}

/// Overrides for the ALARP thresholds, given in the policy header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlarpOverrides {
    pub intolerable_min: Option<i64>,
    pub acceptable_max: Option<i64>,
    pub disproportion_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Commitment {
    pub id: String,
    pub statement: String,
    pub rule_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleSpec {
    pub id: String,
    pub kind: RuleKind,
    pub harm: Harm,
    pub scope: Option<String>,
    pub description: Option<String>,
    pub responsible_role: Option<String>,
    /// Kind-specific parameters, validated by [`compile_policy`].
    pub params: BTreeMap<String, Value>,
}

/// A parsed, structurally valid policy file.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDocument {
    pub name: String,
    pub version: String,
    pub organisation: String,
    pub alarp: AlarpOverrides,
    pub commitments: Vec<Commitment>,
    pub severity_map: BTreeMap<String, u32>,
    pub rules: Vec<RuleSpec>,
}

impl PolicyDocument {
    pub fn rule(&self, id: &str) -> Option<&RuleSpec> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Non-fatal findings about the document itself.
    pub fn warnings(&self) -> Vec<String> {
        self.commitments
            .iter()
            .filter(|c| c.rule_ids.is_empty())
            .map(|c| format!("commitment {} is not implemented by any rule", c.id))
            .collect()
    }

    /// SHA-256 of the canonical rendering; insensitive to comments and layout.
    pub fn digest(&self) -> String {
        crate::vault::sha256_hex(to_policy_text(self).as_bytes())
    }
}
