//! The evidence vault: an append-only, SHA-256 hash-chained JSON Lines file.
//!
//! Each record's hash covers the previous hash and the record's payload. The
//! payload is a canonical envelope holding the record's index, kind and
//! timestamp next to the body, so every stored field is under the chain.
//! [`verify_chain`] also requires each line to be byte-identical to the
//! serialization of the record it parses to, which rules out alternative
//! encodings of the same content.

mod canonical;
mod case;

use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use canonical::{canonical_payload, Canonical, CanonicalError};
pub use case::{export_case, verify_bundle, CaseBundle, ExportError, RunDigests};

use crate::events::format_ts;

pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `SHA-256(prev_hash || "\n" || payload)`, lowercase hex.
pub fn chain_hash(prev_hash: &str, payload: &str) -> String {
    let mut h = Sha256::new();
    h.update(prev_hash.as_bytes());
    h.update(b"\n");
    h.update(payload.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    RunMeta,
    Finding,
    Assessment,
    Trace,
}

impl PayloadKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PayloadKind::RunMeta => "run_meta",
            PayloadKind::Finding => "finding",
            PayloadKind::Assessment => "assessment",
            PayloadKind::Trace => "trace",
        }
    }
}

impl fmt::Display for PayloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of the vault file. Field order is the on-disk key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaultRecord {
    pub index: u64,
    pub prev_hash: String,
    pub recorded_at: String,
    pub payload_kind: PayloadKind,
    pub payload: String,
    pub hash: String,
}

impl VaultRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    /// The body inside the payload envelope.
    pub fn body(&self) -> Option<serde_json::Value> {
        let mut env: serde_json::Value = serde_json::from_str(&self.payload).ok()?;
        env.get_mut("body").map(serde_json::Value::take)
    }

    /// Checks the record on its own: hash format, hash over the payload, and
    /// that the envelope agrees with the outer fields.
    pub fn self_check(&self) -> Result<(), String> {
        if !is_hex64(&self.hash) {
            return Err("hash is not 64 lowercase hex characters".into());
        }
        if !is_hex64(&self.prev_hash) {
            return Err("prev_hash is not 64 lowercase hex characters".into());
        }
        if chain_hash(&self.prev_hash, &self.payload) != self.hash {
            return Err("hash does not match payload".into());
        }
        let expected = envelope(self.index, self.payload_kind, &self.recorded_at, &self.body_canonical()?);
        if expected != self.payload {
            return Err("payload envelope does not match record fields".into());
        }
        Ok(())
    }

    fn body_canonical(&self) -> Result<Canonical, String> {
        let body = self.body().ok_or("payload has no body")?;
        Canonical::from_json(&body).map_err(|e| e.to_string())
    }
}

fn envelope(index: u64, kind: PayloadKind, recorded_at: &str, body: &Canonical) -> String {
    let mut m = std::collections::BTreeMap::new();
    m.insert("body".to_string(), body.clone());
    m.insert("index".to_string(), Canonical::Int(index as i128));
    m.insert("kind".to_string(), Canonical::Str(kind.as_str().into()));
    m.insert("recorded_at".to_string(), Canonical::Str(recorded_at.into()));
    Canonical::Map(m).render()
}

fn is_hex64(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

pub trait Clock {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verification {
    Ok { records: u64, head: String },
    Bad { first_bad_index: u64, reason: String },
}

impl Verification {
    pub fn is_ok(&self) -> bool {
        matches!(self, Verification::Ok { .. })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum VaultError {
    #[error("cannot access vault {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("vault {path} fails verification at record {first_bad_index}: {reason}")]
    Corrupt {
        path: PathBuf,
        first_bad_index: u64,
        reason: String,
    },
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
}

/// Verifies a whole vault file.
pub fn verify_chain(path: &Path) -> Result<Verification, VaultError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(source) => {
            return Err(VaultError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    Ok(verify_chain_bytes(&bytes))
}

/// Verifies vault contents held in memory. The scan is in ascending index
/// order and stops at the first record that fails any check.
pub fn verify_chain_bytes(bytes: &[u8]) -> Verification {
    parse_chain(bytes).1
}

fn parse_chain(bytes: &[u8]) -> (Vec<VaultRecord>, Verification) {
    let mut records = Vec::new();
    let mut prev = GENESIS_HASH.to_string();
    let mut rest = bytes;
    let mut index = 0u64;
    while !rest.is_empty() {
        let (line, tail, terminated) = match rest.iter().position(|&b| b == b'\n') {
            Some(p) => (&rest[..p], &rest[p + 1..], true),
            None => (rest, &rest[rest.len()..], false),
        };
        rest = tail;
        let bad = |reason: &str| Verification::Bad {
            first_bad_index: index,
            reason: reason.to_string(),
        };
        if !terminated {
            return (records, bad("record is not newline-terminated"));
        }
        let Ok(text) = std::str::from_utf8(line) else {
            return (records, bad("record is not valid UTF-8"));
        };
        let record: VaultRecord = match serde_json::from_str(text) {
            Ok(r) => r,
            Err(_) => return (records, bad("record is not a well-formed vault line")),
        };
        if record.to_line() != text {
            return (records, bad("record is not in canonical line form"));
        }
        if record.index != index {
            return (records, bad("index out of sequence"));
        }
        if record.prev_hash != prev {
            return (records, bad("prev_hash does not link to the previous record"));
        }
        if let Err(reason) = record.self_check() {
            return (records, bad(&reason));
        }
        prev = record.hash.clone();
        records.push(record);
        index += 1;
    }
    let n = records.len() as u64;
    (records, Verification::Ok { records: n, head: prev })
}

/// Reads and verifies every record; a vault that fails verification is an
/// error.
pub fn read_records(path: &Path) -> Result<Vec<VaultRecord>, VaultError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(source) => {
            return Err(VaultError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    match parse_chain(&bytes) {
        (records, Verification::Ok { .. }) => Ok(records),
        (_, Verification::Bad { first_bad_index, reason }) => Err(VaultError::Corrupt {
            path: path.to_path_buf(),
            first_bad_index,
            reason,
        }),
    }
}

/// Single-writer handle. Opening verifies the existing chain and refuses a
/// vault that does not verify.
pub struct Vault {
    path: PathBuf,
    file: File,
    head: String,
    len: u64,
}

impl Vault {
    pub fn open(path: &Path) -> Result<Vault, VaultError> {
        let io_err = |source| VaultError::Io {
            path: path.to_path_buf(),
            source,
        };
        let (head, len) = match verify_chain(path)? {
            Verification::Ok { records, head } => (head, records),
            Verification::Bad { first_bad_index, reason } => {
                return Err(VaultError::Corrupt {
                    path: path.to_path_buf(),
                    first_bad_index,
                    reason,
                })
            }
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err)?;
        Ok(Vault {
            path: path.to_path_buf(),
            file,
            head,
            len,
        })
    }

    pub fn head(&self) -> &str {
        &self.head
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one record; the line is handed to the OS before returning.
    pub fn append<T: Serialize + ?Sized>(
        &mut self,
        kind: PayloadKind,
        body: &T,
        clock: &dyn Clock,
    ) -> Result<VaultRecord, VaultError> {
        let body = Canonical::from_serialize(body)?;
        let recorded_at = format_ts(&clock.now());
        let payload = envelope(self.len, kind, &recorded_at, &body);
        let record = VaultRecord {
            index: self.len,
            prev_hash: self.head.clone(),
            recorded_at,
            payload_kind: kind,
            hash: chain_hash(&self.head, &payload),
            payload,
        };
        let mut line = record.to_line();
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|source| VaultError::Io {
                path: self.path.clone(),
                source,
            })?;
        self.head = record.hash.clone();
        self.len += 1;
        Ok(record)
    }

    /// Forces appended records to stable storage.
    pub fn sync(&self) -> Result<(), VaultError> {
        self.file.sync_all().map_err(|source| VaultError::Io {
            path: self.path.clone(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use serde_json::json;

    fn clock() -> FixedClock {
        FixedClock(Utc.with_ymd_and_hms(2025, 1, 6, 9, 0, 0).unwrap())
    }

    fn temp_path(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("auditbot-vault-{}-{name}", std::process::id()));
        let _ = fs::remove_file(&dir);
        dir
    }

    #[test]
    fn chain_hash_matches_independent_digest() {
        // computed with a separate SHA-256 implementation
        assert_eq!(
            chain_hash(GENESIS_HASH, r#"{"a":2,"b":1}"#),
            "14316b54d29b0426d46839aba7a90e2300fae5e1fd71b32019db92fee52d4488"
        );
        assert_eq!(
            chain_hash("14316b54d29b0426d46839aba7a90e2300fae5e1fd71b32019db92fee52d4488", "{}"),
            "52c885c281a0a4ed9a6880bd3c07d67fd11e29d7524e46eaf17b040f0d3a8a13"
        );
    }

    #[test]
    fn first_and_second_append() {
        let path = temp_path("append");
        let mut v = Vault::open(&path).unwrap();
        let r0 = v.append(PayloadKind::RunMeta, &json!({"b": 1, "a": 2}), &clock()).unwrap();
        assert_eq!(r0.index, 0);
        assert_eq!(r0.prev_hash, GENESIS_HASH);
        assert_eq!(
            r0.payload,
            r#"{"body":{"a":2,"b":1},"index":0,"kind":"run_meta","recorded_at":"2025-01-06T09:00:00Z"}"#
        );
        assert_eq!(r0.hash, chain_hash(GENESIS_HASH, &r0.payload));
        let r1 = v.append(PayloadKind::Finding, &json!({}), &clock()).unwrap();
        assert_eq!(r1.prev_hash, r0.hash);
        drop(v);

        let ok = verify_chain(&path).unwrap();
        assert_eq!(ok, Verification::Ok { records: 2, head: r1.hash.clone() });
        let v = Vault::open(&path).unwrap();
        assert_eq!((v.len(), v.head()), (2, r1.hash.as_str()));
        assert_eq!(read_records(&path).unwrap()[0].body(), Some(json!({"a": 2, "b": 1})));
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn tampered_vault_refuses_appends() {
        let path = temp_path("tamper");
        let mut v = Vault::open(&path).unwrap();
        for i in 0..3 {
            v.append(PayloadKind::Finding, &json!({ "i": i }), &clock()).unwrap();
        }
        drop(v);
        let text = fs::read_to_string(&path).unwrap().replacen(r#"\"i\":1"#, r#"\"i\":7"#, 1);
        fs::write(&path, &text).unwrap();
        assert!(matches!(
            verify_chain(&path).unwrap(),
            Verification::Bad { first_bad_index: 1, .. }
        ));
        assert!(matches!(Vault::open(&path), Err(VaultError::Corrupt { first_bad_index: 1, .. })));
        assert_eq!(fs::read_to_string(&path).unwrap(), text);
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn consistent_hash_rewrite_is_caught_at_that_record() {
        let mut bytes = Vec::new();
        let mut prev = GENESIS_HASH.to_string();
        let mut records = Vec::new();
        for i in 0..3u64 {
            let payload = envelope(i, PayloadKind::Finding, "2025-01-06T09:00:00Z", &Canonical::Int(i as i128));
            let r = VaultRecord {
                index: i,
                prev_hash: prev.clone(),
                recorded_at: "2025-01-06T09:00:00Z".into(),
                payload_kind: PayloadKind::Finding,
                hash: chain_hash(&prev, &payload),
                payload,
            };
            prev = r.hash.clone();
            records.push(r);
        }
        records[1].payload = envelope(1, PayloadKind::Finding, "2025-01-06T09:00:00Z", &Canonical::Int(9));
        records[1].hash = chain_hash(&records[1].prev_hash, &records[1].payload);
        for r in &records {
            bytes.extend(r.to_line().as_bytes());
            bytes.push(b'\n');
        }
        assert!(matches!(verify_chain_bytes(&bytes), Verification::Bad { first_bad_index: 2, .. }));
    }

    #[test]
    fn truncated_and_empty() {
        assert_eq!(verify_chain_bytes(b""), Verification::Ok { records: 0, head: GENESIS_HASH.into() });
        assert!(matches!(verify_chain_bytes(b"{"), Verification::Bad { first_bad_index: 0, .. }));
    }
}
