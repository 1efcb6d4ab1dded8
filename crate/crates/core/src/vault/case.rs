use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{parse_chain, PayloadKind, VaultRecord, Verification};

/// The digests a run_meta record commits to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunDigests {
    pub index: u64,
    pub policy_hash: String,
    pub log_hash: String,
}

/// A self-verifying extract of the vault supporting a set of findings.
///
/// `records` is the contiguous chain from the earliest needed record (a
/// selected finding or the run_meta of its run) up to the head, so the
/// bundle can be checked against the published head hash alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseBundle {
    pub head_hash: String,
    pub finding_ids: Vec<String>,
    pub selected: Vec<u64>,
    pub run_meta: Vec<RunDigests>,
    pub records: Vec<VaultRecord>,
}

impl CaseBundle {
    /// Lowest and highest selected record index.
    pub fn span(&self) -> (u64, u64) {
        let lo = self.selected.iter().copied().min().unwrap_or(0);
        let hi = self.selected.iter().copied().max().unwrap_or(0);
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExportError {
    #[error("vault fails verification at record {first_bad_index}: {reason}")]
    Tampered { first_bad_index: u64, reason: String },
    #[error("finding {0} is not in the vault")]
    UnknownFinding(String),
}

/// Builds a case bundle for the given finding ids from raw vault bytes.
/// Every record sealing one of the ids is selected.
pub fn export_case(vault_bytes: &[u8], finding_ids: &[String]) -> Result<CaseBundle, ExportError> {
    let (records, status) = parse_chain(vault_bytes);
    let head_hash = match status {
        Verification::Ok { head, .. } => head,
        Verification::Bad { first_bad_index, reason } => {
            return Err(ExportError::Tampered { first_bad_index, reason })
        }
    };

    let mut selected = BTreeSet::new();
    let mut metas = BTreeSet::new();
    for id in finding_ids {
        let mut found = false;
        let mut last_meta = None;
        for r in &records {
            match r.payload_kind {
                PayloadKind::RunMeta => last_meta = Some(r.index),
                PayloadKind::Finding => {
                    let body = r.body();
                    if body.as_ref().and_then(|b| b.get("id")).and_then(|v| v.as_str()) == Some(id) {
                        found = true;
                        selected.insert(r.index);
                        metas.extend(last_meta);
                    }
                }
                _ => {}
            }
        }
        if !found {
            return Err(ExportError::UnknownFinding(id.clone()));
        }
    }

    let start = selected.iter().chain(&metas).copied().min().unwrap_or(records.len() as u64);
    let run_meta = metas
        .iter()
        .map(|&i| {
            let body = records[i as usize].body().unwrap_or_default();
            let s = |k: &str| body.get(k).and_then(|v| v.as_str()).unwrap_or_default().to_string();
            RunDigests {
                index: i,
                policy_hash: s("policy_hash"),
                log_hash: s("log_hash"),
            }
        })
        .collect();
    Ok(CaseBundle {
        head_hash,
        finding_ids: finding_ids.to_vec(),
        selected: selected.into_iter().collect(),
        run_meta,
        records: records[start as usize..].to_vec(),
    })
}

/// Checks a bundle against an independently obtained head hash.
pub fn verify_bundle(bundle: &CaseBundle, head_hash: &str) -> Result<(), String> {
    let first = bundle.records.first().ok_or("bundle has no records")?;
    let mut prev: Option<&str> = None;
    for (offset, r) in bundle.records.iter().enumerate() {
        if r.index != first.index + offset as u64 {
            return Err(format!("record {} is out of sequence", r.index));
        }
        if let Some(p) = prev {
            if r.prev_hash != p {
                return Err(format!("record {} does not link to its predecessor", r.index));
            }
        }
        r.self_check().map_err(|e| format!("record {}: {e}", r.index))?;
        prev = Some(&r.hash);
    }
    if prev != Some(head_hash) {
        return Err("bundle does not end at the given head hash".into());
    }
    let present: BTreeSet<u64> = bundle.records.iter().map(|r| r.index).collect();
    for i in bundle.selected.iter().chain(bundle.run_meta.iter().map(|m| &m.index)) {
        if !present.contains(i) {
            return Err(format!("record {i} is referenced but not included"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vault::{chain_hash, envelope, Canonical, GENESIS_HASH};
    use std::collections::BTreeMap;

    fn vault(kinds: &[(PayloadKind, Option<&str>)]) -> Vec<u8> {
        let mut prev = GENESIS_HASH.to_string();
        let mut out = Vec::new();
        for (i, (kind, id)) in kinds.iter().enumerate() {
            let mut body = BTreeMap::new();
            if let Some(id) = id {
                body.insert("id".to_string(), Canonical::Str(id.to_string()));
            }
            if *kind == PayloadKind::RunMeta {
                body.insert("policy_hash".to_string(), Canonical::Str("p".into()));
                body.insert("log_hash".to_string(), Canonical::Str("l".into()));
            }
            let payload = envelope(i as u64, *kind, "2025-01-06T09:00:00Z", &Canonical::Map(body));
            let r = VaultRecord {
                index: i as u64,
                prev_hash: prev.clone(),
                recorded_at: "2025-01-06T09:00:00Z".into(),
                payload_kind: *kind,
                hash: chain_hash(&prev, &payload),
                payload,
            };
            prev = r.hash.clone();
            out.extend(r.to_line().bytes());
            out.push(b'\n');
        }
        out
    }

    fn sample() -> Vec<u8> {
        use PayloadKind::*;
        vault(&[
            (RunMeta, None),
            (Finding, Some("a:1")),
            (Finding, Some("b:2")),
            (Finding, Some("c:3")),
            (Finding, Some("d:4")),
            (Finding, Some("e:5")),
            (Finding, Some("f:6")),
            (Finding, Some("g:7")),
            (Assessment, Some("a:1")),
        ])
    }

    #[test]
    fn single_finding_with_run_meta() {
        let bytes = sample();
        let b = export_case(&bytes, &["c:3".into()]).unwrap();
        assert_eq!(b.selected, [3]);
        assert_eq!(b.run_meta[0].index, 0);
        assert_eq!(b.run_meta[0].policy_hash, "p");
        assert_eq!(b.records.first().unwrap().index, 0);
        verify_bundle(&b, &b.head_hash).unwrap();
    }

    #[test]
    fn span_is_contiguous() {
        let bytes = sample();
        let b = export_case(&bytes, &["c:3".into(), "g:7".into()]).unwrap();
        assert_eq!(b.span(), (3, 7));
        let idx: Vec<u64> = b.records.iter().map(|r| r.index).collect();
        assert!(idx.windows(2).all(|w| w[1] == w[0] + 1));
        assert!((3..=7).all(|i| idx.contains(&i)));
    }

    #[test]
    fn errors() {
        let mut bytes = sample();
        assert_eq!(
            export_case(&bytes, &["zz:1".into()]),
            Err(ExportError::UnknownFinding("zz:1".into()))
        );
        let pos = bytes.iter().position(|&b| b == b'\n').unwrap() + 40;
        bytes[pos] ^= 1;
        assert!(matches!(
            export_case(&bytes, &["a:1".into()]),
            Err(ExportError::Tampered { first_bad_index: 1, .. })
        ));
    }

    #[test]
    fn bundle_rejects_wrong_head_and_edits() {
        let bytes = sample();
        let mut b = export_case(&bytes, &["b:2".into()]).unwrap();
        assert!(verify_bundle(&b, GENESIS_HASH).is_err());
        b.records[2].recorded_at = "2025-01-07T09:00:00Z".into();
        assert!(verify_bundle(&b, &b.head_hash.clone()).is_err());
    }
}
