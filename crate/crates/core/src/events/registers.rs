use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::ingest::{IngestError, IngestErrorKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompetenceEntry {
    pub actor: String,
    pub qualification: String,
    pub valid_from: NaiveDate,
    pub valid_to: NaiveDate,
}

impl CompetenceEntry {
    pub fn valid_on(&self, date: NaiveDate) -> bool {
        self.valid_from <= date && date <= self.valid_to
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndependenceEntry {
    pub actor: String,
    pub subject: String,
    pub level: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrgEntry {
    pub actor: String,
    pub role: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reports_to: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobDescriptionEntry {
    pub role: String,
    pub rule_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasheetEntry {
    pub dataset_id: String,
    pub uri: String,
    #[serde(default)]
    pub properties: BTreeMap<String, String>,
}

/// The standing registers the organisation keeps up to date.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegisterSet {
    pub competence: Vec<CompetenceEntry>,
    pub independence: Vec<IndependenceEntry>,
    pub orgchart: Vec<OrgEntry>,
    pub jobdesc: Vec<JobDescriptionEntry>,
    pub datasheets: Vec<DatasheetEntry>,
}

pub const COMPETENCE_FILE: &str = "competence.jsonl";
pub const INDEPENDENCE_FILE: &str = "independence.jsonl";
pub const ORGCHART_FILE: &str = "orgchart.jsonl";
pub const JOBDESC_FILE: &str = "jobdesc.jsonl";
pub const DATASHEETS_FILE: &str = "datasheets.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum RegisterError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{} invalid register record(s)", .0.len())]
    Invalid(Vec<IngestError>),
}

/// Loads whichever of the five register files exist in `dir`. Missing files
/// give empty registers; rules that need them report that at evaluation.
pub fn load_registers(dir: &Path) -> Result<RegisterSet, RegisterError> {
    if !dir.is_dir() {
        return Err(RegisterError::Io {
            path: dir.to_path_buf(),
            source: io::Error::new(io::ErrorKind::NotFound, "not a directory"),
        });
    }
    let mut errors = Vec::new();
    let set = RegisterSet {
        competence: read_file(dir, COMPETENCE_FILE, &mut errors)?,
        independence: read_file(dir, INDEPENDENCE_FILE, &mut errors)?,
        orgchart: read_file(dir, ORGCHART_FILE, &mut errors)?,
        jobdesc: read_file(dir, JOBDESC_FILE, &mut errors)?,
        datasheets: read_file(dir, DATASHEETS_FILE, &mut errors)?,
    };
    errors.extend(set.validate());
    if errors.is_empty() {
        Ok(set)
    } else {
        Err(RegisterError::Invalid(errors))
    }
}

fn read_file<T: DeserializeOwned>(
    dir: &Path,
    name: &str,
    errors: &mut Vec<IngestError>,
) -> Result<Vec<T>, RegisterError> {
    let path = dir.join(name);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => return Err(RegisterError::Io { path, source }),
    };
    Ok(parse_records(name, &text, errors))
}

pub(crate) fn parse_records<T: DeserializeOwned>(
    name: &str,
    text: &str,
    errors: &mut Vec<IngestError>,
) -> Vec<T> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(e) => {
                let mut err = IngestError::new(
                    i + 1,
                    IngestErrorKind::Malformed,
                    format!("malformed record: {e}"),
                );
                err.file = Some(name.to_string());
                errors.push(err);
            }
        }
    }
    out
}

impl RegisterSet {
    /// Checks the cross-record invariants: date ranges, levels, unique
    /// dataset ids, and an acyclic reporting graph.
    pub fn validate(&self) -> Vec<IngestError> {
        let mut errors = Vec::new();
        let mut err = |file: &str, line: usize, msg: String| {
            let mut e = IngestError::new(line, IngestErrorKind::Invariant, msg);
            e.file = Some(file.to_string());
            errors.push(e);
        };
        for (i, c) in self.competence.iter().enumerate() {
            if c.valid_from > c.valid_to {
                err(
                    COMPETENCE_FILE,
                    i + 1,
                    format!("valid_from after valid_to for {} / {}", c.actor, c.qualification),
                );
            }
        }
        for (i, e) in self.independence.iter().enumerate() {
            if e.level < 0 {
                err(INDEPENDENCE_FILE, i + 1, format!("negative independence level for {}", e.actor));
            }
        }
        let mut ids = BTreeSet::new();
        for (i, d) in self.datasheets.iter().enumerate() {
            if !ids.insert(&d.dataset_id) {
                err(DATASHEETS_FILE, i + 1, format!("duplicate dataset_id {}", d.dataset_id));
            }
        }
        if let Some(cycle) = self.find_cycle() {
            err(ORGCHART_FILE, 0, format!("cycle in reports_to: {}", cycle.join(" -> ")));
        }
        errors
    }

    fn find_cycle(&self) -> Option<Vec<String>> {
        let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for o in &self.orgchart {
            if let Some(boss) = &o.reports_to {
                edges.entry(o.actor.as_str()).or_default().insert(boss.as_str());
            }
        }
        // 0 = unseen, 1 = on stack, 2 = done
        let mut state: BTreeMap<&str, u8> = BTreeMap::new();
        fn dfs<'a>(
            node: &'a str,
            edges: &BTreeMap<&'a str, BTreeSet<&'a str>>,
            state: &mut BTreeMap<&'a str, u8>,
            stack: &mut Vec<&'a str>,
        ) -> Option<Vec<String>> {
            state.insert(node, 1);
            stack.push(node);
            for &next in edges.get(node).into_iter().flatten() {
                match state.get(next).copied().unwrap_or(0) {
                    1 => {
                        let start = stack.iter().position(|&n| n == next).unwrap();
                        let mut cycle: Vec<String> =
                            stack[start..].iter().map(|s| s.to_string()).collect();
                        cycle.push(next.to_string());
                        return Some(cycle);
                    }
                    0 => {
                        if let Some(c) = dfs(next, edges, state, stack) {
                            return Some(c);
                        }
                    }
                    _ => {}
                }
            }
            stack.pop();
            state.insert(node, 2);
            None
        }
        let nodes: Vec<&str> = edges.keys().copied().collect();
        for n in nodes {
            if state.get(n).copied().unwrap_or(0) == 0 {
                let mut stack = Vec::new();
                if let Some(c) = dfs(n, &edges, &mut state, &mut stack) {
                    return Some(c);
                }
            }
        }
        None
    }

    /// Job-description entries naming rules the policy does not define.
    pub fn jobdesc_warnings<'a>(&self, rule_ids: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        let known: BTreeSet<&str> = rule_ids.into_iter().collect();
        let mut out = Vec::new();
        for j in &self.jobdesc {
            for r in &j.rule_ids {
                if !known.contains(r.as_str()) {
                    out.push(format!("job description for {} names unknown rule {r}", j.role));
                }
            }
        }
        out
    }

    pub fn holds_qualification(&self, actor: &str, qualification: &str, on: NaiveDate) -> bool {
        self.competence
            .iter()
            .any(|c| c.actor == actor && c.qualification == qualification && c.valid_on(on))
    }

    /// Later entries for the same (actor, subject) supersede earlier ones.
    pub fn independence_level(&self, actor: &str, subject: &str) -> Option<i64> {
        self.independence
            .iter()
            .rev()
            .find(|e| e.actor == actor && e.subject == subject)
            .map(|e| e.level)
    }

    /// Actors with an org-chart entry on the project, sorted and deduplicated.
    pub fn members(&self, project: &str) -> Vec<&str> {
        let set: BTreeSet<&str> = self
            .orgchart
            .iter()
            .filter(|o| o.project.as_deref() == Some(project))
            .map(|o| o.actor.as_str())
            .collect();
        set.into_iter().collect()
    }

    pub fn holders_of_role(&self, role: &str, project: &str) -> Vec<&str> {
        let set: BTreeSet<&str> = self
            .orgchart
            .iter()
            .filter(|o| o.role == role && o.project.as_deref() == Some(project))
            .map(|o| o.actor.as_str())
            .collect();
        set.into_iter().collect()
    }

    /// The actor's superior, preferring the entry for `project`.
    pub fn superior(&self, actor: &str, project: Option<&str>) -> Option<&str> {
        let entries = || self.orgchart.iter().filter(|o| o.actor == actor);
        entries()
            .find(|o| o.project.as_deref() == project && o.reports_to.is_some())
            .or_else(|| entries().find(|o| o.reports_to.is_some()))
            .and_then(|o| o.reports_to.as_deref())
    }

    /// `actor` followed by each successive superior up to the root. The
    /// reporting graph is acyclic after [`validate`](Self::validate); the
    /// length bound keeps an unvalidated set from looping.
    pub fn chain_from(&self, actor: &str, project: Option<&str>) -> Vec<String> {
        let mut chain = vec![actor.to_string()];
        let mut cur = actor;
        while let Some(next) = self.superior(cur, project) {
            if chain.iter().any(|a| a == next) || chain.len() > self.orgchart.len() {
                break;
            }
            chain.push(next.to_string());
            cur = next;
        }
        chain
    }

    /// Roles whose job description lists the rule, sorted by name.
    pub fn roles_for_rule(&self, rule_id: &str) -> Vec<&str> {
        let set: BTreeSet<&str> = self
            .jobdesc
            .iter()
            .filter(|j| j.rule_ids.iter().any(|r| r == rule_id))
            .map(|j| j.role.as_str())
            .collect();
        set.into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn org(actor: &str, role: &str, project: Option<&str>, boss: Option<&str>) -> OrgEntry {
        OrgEntry {
            actor: actor.into(),
            role: role.into(),
            project: project.map(Into::into),
            reports_to: boss.map(Into::into),
        }
    }

    #[test]
    fn empty_directory_gives_empty_registers() {
        let dir = std::env::temp_dir().join(format!("auditbot-reg-empty-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let regs = load_registers(&dir).unwrap();
        assert_eq!(regs, RegisterSet::default());
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn org_chart_cycle_is_rejected() {
        let set = RegisterSet {
            orgchart: vec![org("a", "x", None, Some("b")), org("b", "y", None, Some("a"))],
            ..Default::default()
        };
        let errs = set.validate();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.contains("cycle in reports_to"));
    }

    #[test]
    fn competence_dates_and_duplicates() {
        let mut errors = Vec::new();
        let comp: Vec<CompetenceEntry> = parse_records(
            COMPETENCE_FILE,
            r#"{"actor":"r1","qualification":"code","valid_from":"2025-02-01","valid_to":"2025-01-01"}"#,
            &mut errors,
        );
        assert!(errors.is_empty());
        let set = RegisterSet {
            competence: comp,
            datasheets: vec![
                DatasheetEntry { dataset_id: "d".into(), uri: "u".into(), properties: BTreeMap::new() },
                DatasheetEntry { dataset_id: "d".into(), uri: "v".into(), properties: BTreeMap::new() },
            ],
            ..Default::default()
        };
        let errs = set.validate();
        assert_eq!(errs.len(), 2);

        let _: Vec<OrgEntry> = parse_records(ORGCHART_FILE, "{\"actor\":1}\n", &mut errors);
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].line, 1);
    }

    #[test]
    fn chain_and_lookups() {
        let set = RegisterSet {
            orgchart: vec![
                org("alice", "qa-lead", Some("P"), Some("bob")),
                org("bob", "head", Some("P"), Some("carol")),
                org("carol", "cto", None, None),
            ],
            independence: vec![
                IndependenceEntry { actor: "r".into(), subject: "o".into(), level: 1 },
                IndependenceEntry { actor: "r".into(), subject: "o".into(), level: 3 },
            ],
            ..Default::default()
        };
        assert_eq!(set.chain_from("alice", Some("P")), vec!["alice", "bob", "carol"]);
        assert_eq!(set.members("P"), vec!["alice", "bob"]);
        assert_eq!(set.holders_of_role("qa-lead", "P"), vec!["alice"]);
        assert_eq!(set.independence_level("r", "o"), Some(3));
    }
}
