use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::Duration;
use serde::Serialize;

use super::manifest::{build_manifest, DataAccessManifest};
use super::{Harm, PolicyDocument, ProjectGlob, RuleKind, RuleSpec, Value};
use crate::alarp::AlarpParams;
use crate::analytics::Lexicon;
use crate::events::{EventCatalog, EventType};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompileError {
    pub rule_id: Option<String>,
    pub message: String,
}

impl fmt::Display for CompileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.rule_id {
            Some(id) => write!(f, "rule {id}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for CompileError {}

/// The five standing registers, by file stem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegisterName {
    Competence,
    Independence,
    Orgchart,
    Jobdesc,
    Datasheets,
}

impl RegisterName {
    pub const ALL: [RegisterName; 5] = [
        RegisterName::Competence,
        RegisterName::Independence,
        RegisterName::Orgchart,
        RegisterName::Jobdesc,
        RegisterName::Datasheets,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegisterName::Competence => "competence",
            RegisterName::Independence => "independence",
            RegisterName::Orgchart => "orgchart",
            RegisterName::Jobdesc => "jobdesc",
            RegisterName::Datasheets => "datasheets",
        }
    }

    pub fn from_name(name: &str) -> Option<RegisterName> {
        RegisterName::ALL.into_iter().find(|r| r.as_str() == name)
    }
}

impl fmt::Display for RegisterName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObligationMode {
    ExistsBefore,
    AllClosedBefore {
        close_type: EventType,
        /// `key=value` on the require (opening) events.
        filter: Option<(String, String)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObligationRule {
    pub trigger: EventType,
    pub require: EventType,
    pub join_on: String,
    pub mode: ObligationMode,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LegitimacyCheck {
    ReviewerCompetence { qualification_field: String },
    ReviewerIndependence {
        severity_field: String,
        author_field: String,
        /// Labels the rule declares it will meet; all are in the severity map.
        severities: Vec<String>,
    },
    TeamQualification { qualification: String },
    RegisterLookup { register: RegisterName, key_field: String },
}

impl LegitimacyCheck {
    pub fn name(&self) -> &'static str {
        match self {
            LegitimacyCheck::ReviewerCompetence { .. } => "reviewer_competence",
            LegitimacyCheck::ReviewerIndependence { .. } => "reviewer_independence",
            LegitimacyCheck::TeamQualification { .. } => "team_qualification",
            LegitimacyCheck::RegisterLookup { .. } => "register_lookup",
        }
    }

    pub fn registers(&self) -> Vec<RegisterName> {
        match self {
            LegitimacyCheck::ReviewerCompetence { .. } => vec![RegisterName::Competence],
            LegitimacyCheck::ReviewerIndependence { .. } => vec![RegisterName::Independence],
            LegitimacyCheck::TeamQualification { .. } => {
                vec![RegisterName::Competence, RegisterName::Orgchart]
            }
            LegitimacyCheck::RegisterLookup { register, .. } => vec![*register],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegitimacyRule {
    pub trigger: EventType,
    pub check: LegitimacyCheck,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExceptionRule {
    pub override_type: EventType,
    pub justification_type: EventType,
    pub join_on: String,
    pub justify_within_days: f64,
}

impl ExceptionRule {
    pub fn window(&self) -> Duration {
        Duration::milliseconds((self.justify_within_days * 86_400_000.0).round() as i64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoursRule {
    pub threshold_hours: f64,
    pub consecutive_weeks: u32,
}

impl HoursRule {
    pub const TRIGGER: EventType = EventType::ActivitySession;
}

#[derive(Debug, Clone, PartialEq)]
pub enum LexiconSource {
    Builtin,
    File(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateRule {
    pub trigger: EventType,
    pub text_field: String,
    pub source: LexiconSource,
    pub max_imbalance: i64,
    /// Filled at compile time for the builtin list, by
    /// [`CompiledPolicy::load_lexicons`] for files.
    pub lexicon: Option<Arc<Lexicon>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftRule {
    pub feature: String,
    pub warn_threshold: f64,
    pub alarm_threshold: f64,
}

impl DriftRule {
    pub const TRIGGER: EventType = EventType::ModelFeatureSnapshot;
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuleCheck {
    Obligation(ObligationRule),
    Legitimacy(LegitimacyRule),
    Exception(ExceptionRule),
    Hours(HoursRule),
    Gate(GateRule),
    Drift(DriftRule),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledRule {
    pub id: String,
    pub kind: RuleKind,
    pub harm: Harm,
    pub scope: Option<ProjectGlob>,
    pub description: Option<String>,
    pub responsible_role: Option<String>,
    pub risk_cost: Option<f64>,
    pub mitigation_cost: Option<f64>,
    pub check: RuleCheck,
}

impl CompiledRule {
    pub fn in_scope(&self, project: &str) -> bool {
        self.scope.as_ref().is_none_or(|g| g.matches(project))
    }

    /// The event type whose occurrences this rule is evaluated at.
    pub fn trigger(&self) -> EventType {
        match &self.check {
            RuleCheck::Obligation(o) => o.trigger,
            RuleCheck::Legitimacy(l) => l.trigger,
            RuleCheck::Exception(e) => e.override_type,
            RuleCheck::Hours(_) => HoursRule::TRIGGER,
            RuleCheck::Gate(g) => g.trigger,
            RuleCheck::Drift(_) => DriftRule::TRIGGER,
        }
    }

    /// The event type a responsible person was expected to produce, if any.
    pub fn expected_activity(&self) -> Option<EventType> {
        match &self.check {
            RuleCheck::Obligation(o) => match &o.mode {
                ObligationMode::ExistsBefore => Some(o.require),
                ObligationMode::AllClosedBefore { close_type, .. } => Some(*close_type),
            },
            RuleCheck::Exception(e) => Some(e.justification_type),
            _ => None,
        }
    }

    /// The payload field naming the subject the expected activity concerns.
    pub fn subject_field(&self) -> Option<&str> {
        match &self.check {
            RuleCheck::Obligation(o) => Some(&o.join_on),
            RuleCheck::Exception(e) => Some(&e.join_on),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledPolicy {
    pub source: PolicyDocument,
    pub rules: Vec<CompiledRule>,
    pub manifest: DataAccessManifest,
    pub alarp: AlarpParams,
}

#[derive(Debug, thiserror::Error)]
#[error("rule {rule_id}: cannot load lexicon {path}: {message}")]
pub struct LexiconLoadError {
    pub rule_id: String,
    pub path: PathBuf,
    pub message: String,
}

impl CompiledPolicy {
    pub fn rule(&self, id: &str) -> Option<&CompiledRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Loads every file lexicon a gate rule names. Relative paths are tried
    /// against each directory of `search` in order.
    pub fn load_lexicons(&mut self, search: &[PathBuf]) -> Result<(), LexiconLoadError> {
        for rule in &mut self.rules {
            let RuleCheck::Gate(gate) = &mut rule.check else {
                continue;
            };
            let LexiconSource::File(name) = &gate.source else {
                continue;
            };
            let path = resolve(name, search);
            let text = fs::read_to_string(&path).map_err(|e| LexiconLoadError {
                rule_id: rule.id.clone(),
                path: path.clone(),
                message: e.to_string(),
            })?;
            let lex = Lexicon::parse(&text).map_err(|e| LexiconLoadError {
                rule_id: rule.id.clone(),
                path: path.clone(),
                message: e.to_string(),
            })?;
            gate.lexicon = Some(Arc::new(lex));
        }
        Ok(())
    }
}

fn resolve(name: &str, search: &[PathBuf]) -> PathBuf {
    let p = Path::new(name);
    if p.is_absolute() {
        return p.to_path_buf();
    }
    search
        .iter()
        .map(|d| d.join(p))
        .find(|c| c.is_file())
        .unwrap_or_else(|| search.first().map_or_else(|| p.to_path_buf(), |d| d.join(p)))
}

const COMMON_KEYS: [&str; 2] = ["risk_cost", "mitigation_cost"];

fn kind_keys(kind: RuleKind) -> &'static [&'static str] {
    match kind {
        RuleKind::Obligation => &["trigger", "require", "mode", "join_on", "close_type", "filter"],
        RuleKind::Legitimacy => &[
            "trigger",
            "check",
            "qualification_field",
            "severity_field",
            "author_field",
            "severities",
            "qualification",
            "register",
            "key_field",
        ],
        RuleKind::Exception => &["override_type", "justification_type", "join_on", "justify_within_days"],
        RuleKind::Hours => &["threshold_hours", "consecutive_weeks"],
        RuleKind::Gate => &["trigger", "text_field", "lexicon", "max_imbalance"],
        RuleKind::Drift => &["feature", "warn_threshold", "alarm_threshold"],
    }
}

/// Validates a parsed document against the event catalog and produces typed
/// rules with defaults filled in, plus the data-access manifest.
pub fn compile_policy(
    doc: &PolicyDocument,
    catalog: &EventCatalog,
) -> Result<CompiledPolicy, Vec<CompileError>> {
    let mut errors = Vec::new();

    let alarp = match AlarpParams::from_overrides(&doc.alarp) {
        Ok(a) => a,
        Err(message) => {
            errors.push(CompileError {
                rule_id: None,
                message,
            });
            AlarpParams::default()
        }
    };

    let mut rules = Vec::new();
    for spec in &doc.rules {
        let mut cx = Ctx {
            spec,
            doc,
            catalog,
            errors: Vec::new(),
        };
        let rule = cx.compile();
        if cx.errors.is_empty() {
            rules.extend(rule);
        }
        errors.extend(cx.errors);
    }

    let uses_independence = rules.iter().any(|r| {
        matches!(
            &r.check,
            RuleCheck::Legitimacy(LegitimacyRule {
                check: LegitimacyCheck::ReviewerIndependence { .. },
                ..
            })
        )
    });
    if uses_independence && doc.severity_map.is_empty() {
        errors.push(CompileError {
            rule_id: None,
            message: "severity_map is required by reviewer_independence rules".into(),
        });
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    let manifest = build_manifest(&rules);
    Ok(CompiledPolicy {
        source: doc.clone(),
        rules,
        manifest,
        alarp,
    })
}

struct Ctx<'a> {
    spec: &'a RuleSpec,
    doc: &'a PolicyDocument,
    catalog: &'a EventCatalog,
    errors: Vec<CompileError>,
}

impl Ctx<'_> {
    fn err(&mut self, message: impl Into<String>) {
        self.errors.push(CompileError {
            rule_id: Some(self.spec.id.clone()),
            message: message.into(),
        });
    }

    fn compile(&mut self) -> Option<CompiledRule> {
        let kind = self.spec.kind;
        let allowed = kind_keys(kind);
        let unknown: Vec<String> = self
            .spec
            .params
            .keys()
            .filter(|k| !allowed.contains(&k.as_str()) && !COMMON_KEYS.contains(&k.as_str()))
            .cloned()
            .collect();
        for k in unknown {
            self.err(format!("unknown parameter `{k}` for {kind} rule"));
        }

        let risk_cost = self.cost("risk_cost");
        let mitigation_cost = self.cost("mitigation_cost");

        let check = match kind {
            RuleKind::Obligation => self.obligation().map(RuleCheck::Obligation),
            RuleKind::Legitimacy => self.legitimacy().map(RuleCheck::Legitimacy),
            RuleKind::Exception => self.exception().map(RuleCheck::Exception),
            RuleKind::Hours => self.hours().map(RuleCheck::Hours),
            RuleKind::Gate => self.gate().map(RuleCheck::Gate),
            RuleKind::Drift => self.drift().map(RuleCheck::Drift),
        }?;

        Some(CompiledRule {
            id: self.spec.id.clone(),
            kind,
            harm: self.spec.harm,
            scope: self.spec.scope.as_deref().map(ProjectGlob::new),
            description: self.spec.description.clone(),
            responsible_role: self.spec.responsible_role.clone(),
            risk_cost,
            mitigation_cost,
            check,
        })
    }

    fn value(&self, key: &str) -> Option<&Value> {
        self.spec.params.get(key)
    }

    fn forbid(&mut self, keys: &[&str], context: &str) {
        for k in keys {
            if self.spec.params.contains_key(*k) {
                self.err(format!("parameter `{k}` does not apply to {context}"));
            }
        }
    }

    fn name(&mut self, key: &str) -> Option<String> {
        match self.value(key) {
            None => {
                self.err(format!("missing required parameter `{key}`"));
                None
            }
            Some(v) => match v.as_name() {
                Some(s) if !s.is_empty() => Some(s.to_string()),
                _ => {
                    let t = v.type_name();
                    self.err(format!("`{key}` must be a name, got {t}"));
                    None
                }
            },
        }
    }

    fn opt_name(&mut self, key: &str) -> Option<String> {
        if self.value(key).is_some() {
            self.name(key)
        } else {
            None
        }
    }

    fn event_type(&mut self, key: &str) -> Option<EventType> {
        let name = self.name(key)?;
        match self.catalog.lookup(&name) {
            Some(t) => Some(t),
            None => {
                self.err(format!("unknown event type `{name}` in `{key}`"));
                None
            }
        }
    }

    fn number(&mut self, key: &str, default: f64) -> Option<f64> {
        match self.value(key) {
            None => Some(default),
            Some(v) => match v.as_number() {
                Some(n) if n.is_finite() => Some(n),
                _ => {
                    let t = v.type_name();
                    self.err(format!("`{key}` must be a finite number, got {t}"));
                    None
                }
            },
        }
    }

    fn non_negative(&mut self, key: &str, default: f64) -> Option<f64> {
        let n = self.number(key, default)?;
        if n < 0.0 {
            self.err(format!("`{key}` must not be negative"));
            return None;
        }
        Some(n)
    }

    fn integer(&mut self, key: &str, default: i64) -> Option<i64> {
        match self.value(key) {
            None => Some(default),
            Some(Value::Int(i)) => Some(*i),
            Some(v) => {
                let t = v.type_name();
                self.err(format!("`{key}` must be an integer, got {t}"));
                None
            }
        }
    }

    fn cost(&mut self, key: &str) -> Option<f64> {
        self.value(key)?;
        self.non_negative(key, 0.0)
    }

    fn obligation(&mut self) -> Option<ObligationRule> {
        let trigger = self.event_type("trigger");
        let require = self.event_type("require");
        let join_on = self.name("join_on");
        let mode = match self.name("mode").as_deref() {
            Some("exists_before") => {
                self.forbid(&["close_type", "filter"], "mode exists_before");
                Some(ObligationMode::ExistsBefore)
            }
            Some("all_closed_before") => {
                let close_type = self.event_type("close_type");
                let filter = match self.value("filter") {
                    None => Some(None),
                    Some(Value::Str(s)) => match s.split_once('=') {
                        Some((k, v)) if !k.trim().is_empty() => {
                            Some(Some((k.trim().to_string(), v.trim().to_string())))
                        }
                        _ => {
                            self.err(format!("`filter` must look like \"key=value\", got \"{s}\""));
                            None
                        }
                    },
                    Some(v) => {
                        let t = v.type_name();
                        self.err(format!("`filter` must be a string, got {t}"));
                        None
                    }
                };
                Some(ObligationMode::AllClosedBefore {
                    close_type: close_type?,
                    filter: filter?,
                })
            }
            Some(other) => {
                self.err(format!("unknown mode `{other}`, expected exists_before or all_closed_before"));
                None
            }
            None => None,
        };
        Some(ObligationRule {
            trigger: trigger?,
            require: require?,
            join_on: join_on?,
            mode: mode?,
        })
    }

    fn legitimacy(&mut self) -> Option<LegitimacyRule> {
        let trigger = self.event_type("trigger");
        let check_name = self.name("check")?;
        let all = [
            "qualification_field",
            "severity_field",
            "author_field",
            "severities",
            "qualification",
            "register",
            "key_field",
        ];
        let own: &[&str] = match check_name.as_str() {
            "reviewer_competence" => &["qualification_field"],
            "reviewer_independence" => &["severity_field", "author_field", "severities"],
            "team_qualification" => &["qualification"],
            "register_lookup" => &["register", "key_field"],
            other => {
                self.err(format!("unknown check `{other}`"));
                return None;
            }
        };
        let foreign: Vec<&str> = all.into_iter().filter(|k| !own.contains(k)).collect();
        self.forbid(&foreign, &format!("check {check_name}"));

        let check = match check_name.as_str() {
            "reviewer_competence" => LegitimacyCheck::ReviewerCompetence {
                qualification_field: self.name("qualification_field")?,
            },
            "reviewer_independence" => {
                let severity_field = self.name("severity_field");
                let author_field = self.opt_name("author_field").unwrap_or_else(|| "author_org".into());
                let severities = match self.value("severities") {
                    None => Vec::new(),
                    Some(Value::List(items)) => items.clone(),
                    Some(v) => {
                        let t = v.type_name();
                        self.err(format!("`severities` must be a list, got {t}"));
                        return None;
                    }
                };
                for label in &severities {
                    if !self.doc.severity_map.contains_key(label) {
                        self.err(format!("severity label `{label}` is not in severity_map"));
                    }
                }
                LegitimacyCheck::ReviewerIndependence {
                    severity_field: severity_field?,
                    author_field,
                    severities,
                }
            }
            "team_qualification" => LegitimacyCheck::TeamQualification {
                qualification: self.name("qualification")?,
            },
            _ => {
                let register = self.name("register");
                let key_field = self.name("key_field");
                let register = match register {
                    Some(r) => match RegisterName::from_name(&r) {
                        Some(r) => Some(r),
                        None => {
                            self.err(format!("unknown register `{r}`"));
                            None
                        }
                    },
                    None => None,
                };
                LegitimacyCheck::RegisterLookup {
                    register: register?,
                    key_field: key_field?,
                }
            }
        };
        Some(LegitimacyRule {
            trigger: trigger?,
            check,
        })
    }

    fn exception(&mut self) -> Option<ExceptionRule> {
        let override_type = self.event_type("override_type");
        let justification_type = self.event_type("justification_type");
        let join_on = self.name("join_on");
        let days = self.non_negative("justify_within_days", 14.0);
        Some(ExceptionRule {
            override_type: override_type?,
            justification_type: justification_type?,
            join_on: join_on?,
            justify_within_days: days?,
        })
    }

    fn hours(&mut self) -> Option<HoursRule> {
        let threshold = self.non_negative("threshold_hours", 48.0);
        let weeks = self.integer("consecutive_weeks", 1);
        let weeks = match weeks {
            Some(w) if (1..=52).contains(&w) => Some(w as u32),
            Some(w) => {
                self.err(format!("`consecutive_weeks` must be in 1..52, got {w}"));
                None
            }
            None => None,
        };
        Some(HoursRule {
            threshold_hours: threshold?,
            consecutive_weeks: weeks?,
        })
    }

    fn gate(&mut self) -> Option<GateRule> {
        let trigger = self.event_type("trigger");
        let text_field = self.name("text_field");
        let source = self.name("lexicon").map(|l| {
            if l == "builtin" {
                LexiconSource::Builtin
            } else {
                LexiconSource::File(l)
            }
        });
        let max = match self.integer("max_imbalance", 2) {
            Some(m) if m >= 0 => Some(m),
            Some(_) => {
                self.err("`max_imbalance` must not be negative");
                None
            }
            None => None,
        };
        let source = source?;
        let lexicon = matches!(source, LexiconSource::Builtin).then(|| Arc::new(Lexicon::builtin_english()));
        Some(GateRule {
            trigger: trigger?,
            text_field: text_field?,
            source,
            max_imbalance: max?,
            lexicon,
        })
    }

    fn drift(&mut self) -> Option<DriftRule> {
        let feature = self.name("feature");
        let warn = self.non_negative("warn_threshold", 0.1);
        let alarm = self.non_negative("alarm_threshold", 0.25);
        if let (Some(w), Some(a)) = (warn, alarm) {
            if w > a {
                self.err(format!("`warn_threshold` {w} exceeds `alarm_threshold` {a}"));
                return None;
            }
        }
        Some(DriftRule {
            feature: feature?,
            warn_threshold: warn?,
            alarm_threshold: alarm?,
        })
    }
}

/// Every payload field name a compiled rule's parameters mention. The
/// manifest must cover all of them.
pub fn param_fields(rule: &CompiledRule) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    match &rule.check {
        RuleCheck::Obligation(o) => {
            out.insert(o.join_on.clone());
            if let ObligationMode::AllClosedBefore {
                filter: Some((k, _)),
                ..
            } = &o.mode
            {
                out.insert(k.clone());
            }
        }
        RuleCheck::Legitimacy(l) => match &l.check {
            LegitimacyCheck::ReviewerCompetence { qualification_field } => {
                out.insert(qualification_field.clone());
            }
            LegitimacyCheck::ReviewerIndependence {
                severity_field,
                author_field,
                ..
            } => {
                out.insert(severity_field.clone());
                out.insert(author_field.clone());
            }
            LegitimacyCheck::TeamQualification { .. } => {}
            LegitimacyCheck::RegisterLookup { key_field, .. } => {
                out.insert(key_field.clone());
            }
        },
        RuleCheck::Exception(e) => {
            out.insert(e.join_on.clone());
        }
        RuleCheck::Hours(_) => {
            out.extend(["start".to_string(), "end".to_string()]);
        }
        RuleCheck::Gate(g) => {
            out.insert(g.text_field.clone());
        }
        RuleCheck::Drift(_) => {
            out.extend(["feature", "phase", "histogram"].map(String::from));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::parse_policy;

    fn compile(text: &str) -> Result<CompiledPolicy, Vec<CompileError>> {
        compile_policy(&parse_policy(text).unwrap(), &EventCatalog::standard())
    }

    fn one_error(text: &str) -> String {
        let errs = compile(text).unwrap_err();
        assert_eq!(errs.len(), 1, "{errs:?}");
        errs[0].to_string()
    }

    #[test]
    fn obligation_compiles() {
        let p = compile(
            r#"policy "p" {}
            rule bias { kind = obligation harm = 4 trigger = build.training_run
                        require = dataset.bias_assessment mode = exists_before join_on = dataset_id }"#,
        )
        .unwrap();
        let RuleCheck::Obligation(o) = &p.rules[0].check else { panic!() };
        assert_eq!(o.trigger, EventType::BuildTrainingRun);
        assert_eq!(o.require, EventType::DatasetBiasAssessment);
        assert_eq!(o.mode, ObligationMode::ExistsBefore);
    }

    #[test]
    fn unknown_event_type() {
        let msg = one_error(
            r#"policy "p" {}
            rule r { kind = obligation harm = 1 trigger = no.such.event
                     require = issue.opened mode = exists_before join_on = x }"#,
        );
        assert!(msg.contains("unknown event type"), "{msg}");
    }

    #[test]
    fn defaults_are_filled() {
        let p = compile(
            r#"policy "p" {}
            rule h { kind = hours harm = 2 }
            rule g { kind = gate harm = 2 trigger = job_posting.draft text_field = text lexicon = "builtin" }
            rule d { kind = drift harm = 3 feature = age }
            rule e { kind = exception harm = 3 override_type = rule.override
                     justification_type = rule.justification join_on = override_id }"#,
        )
        .unwrap();
        assert_eq!(
            p.rules[0].check,
            RuleCheck::Hours(HoursRule { threshold_hours: 48.0, consecutive_weeks: 1 })
        );
        let RuleCheck::Gate(g) = &p.rules[1].check else { panic!() };
        assert_eq!(g.max_imbalance, 2);
        assert!(g.lexicon.is_some());
        assert_eq!(
            p.rules[2].check,
            RuleCheck::Drift(DriftRule { feature: "age".into(), warn_threshold: 0.1, alarm_threshold: 0.25 })
        );
        let RuleCheck::Exception(e) = &p.rules[3].check else { panic!() };
        assert_eq!(e.justify_within_days, 14.0);
        assert_eq!(e.window(), Duration::days(14));
    }

    #[test]
    fn missing_and_unknown_params() {
        let msg = one_error(r#"policy "p" {} rule d { kind = drift harm = 3 }"#);
        assert!(msg.contains("missing required parameter `feature`"), "{msg}");
        let msg = one_error(r#"policy "p" {} rule h { kind = hours harm = 3 colour = red }"#);
        assert!(msg.contains("unknown parameter `colour`"), "{msg}");
        let msg = one_error(
            r#"policy "p" {} rule l { kind = legitimacy harm = 3 trigger = build.release check = vibes }"#,
        );
        assert!(msg.contains("unknown check `vibes`"), "{msg}");
    }

    #[test]
    fn severity_labels_must_exist() {
        let text = r#"policy "p" {}
            severity_map { high = 2 }
            rule i { kind = legitimacy harm = 4 trigger = doc.review_completed
                     check = reviewer_independence severity_field = severity severities = [high, critical] }"#;
        let msg = one_error(text);
        assert!(msg.contains("`critical` is not in severity_map"), "{msg}");
        let text = r#"policy "p" {}
            rule i { kind = legitimacy harm = 4 trigger = doc.review_completed
                     check = reviewer_independence severity_field = severity }"#;
        assert!(one_error(text).contains("severity_map is required"));
    }

    #[test]
    fn check_specific_params() {
        let msg = one_error(
            r#"policy "p" {} rule l { kind = legitimacy harm = 3 trigger = build.release
               check = team_qualification qualification = "ethics" key_field = x }"#,
        );
        assert!(msg.contains("`key_field` does not apply"), "{msg}");
    }

    #[test]
    fn thresholds_validated() {
        assert!(one_error(r#"policy "p" {} rule d { kind = drift harm = 3 feature = f warn_threshold = -0.1 }"#)
            .contains("must not be negative"));
        assert!(one_error(
            r#"policy "p" {} rule d { kind = drift harm = 3 feature = f warn_threshold = 0.5 alarm_threshold = 0.2 }"#
        )
        .contains("exceeds"));
        assert!(one_error(r#"policy "p" { alarp_acceptable_max = 20 } rule h { kind = hours harm = 1 }"#)
            .contains("acceptable"));
    }

    #[test]
    fn compile_is_deterministic() {
        let text = r#"policy "p" {} rule h { kind = hours harm = 2 threshold_hours = 50 }"#;
        assert_eq!(compile(text).unwrap(), compile(text).unwrap());
    }
}
