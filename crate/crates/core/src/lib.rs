//! An ethics audit bot for software development lifecycles.
//!
//! A policy file states the organisation's commitments and the rules that
//! implement them. The bot ingests lifecycle events and standing registers,
//! evaluates every rule, triages the findings on an ALARP risk matrix,
//! seals the results in a hash-chained evidence vault, and traces each
//! finding back to the role and people responsible for the missed step.
//!
//! ```
//! use auditbot::events::{ingest_events, EventCatalog, RegisterSet};
//! use auditbot::policy::{compile_policy, parse_policy};
//! use auditbot::engine::{run_audit, SeqWindow};
//!
//! let doc = parse_policy(r#"
//!     policy "demo" {}
//!     rule bias { kind = obligation harm = 4
//!                 trigger = build.training_run require = dataset.bias_assessment
//!                 mode = exists_before join_on = dataset_id }
//! "#).unwrap();
//! let policy = compile_policy(&doc, &EventCatalog::standard()).unwrap();
//! let log = ingest_events([
//!     r#"{"seq":1,"ts":"2025-03-03T09:00:00Z","type":"build.training_run","project":"p","payload":{"build_id":"b1","dataset_id":"d1"}}"#,
//! ]).unwrap();
//! let set = run_audit(&policy, &log, &RegisterSet::default(), SeqWindow::ALL);
//! assert_eq!(set.findings[0].id, "bias:1");
//! ```

pub mod accountability;
pub mod alarp;
pub mod analytics;
pub mod engine;
pub mod events;
pub mod policy;
pub mod vault;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/policy.md")]
    pub mod policy {}
    #[doc = include_str!("../../../book/src/events.md")]
    pub mod events {}
    #[doc = include_str!("../../../book/src/checks.md")]
    pub mod checks {}
    #[doc = include_str!("../../../book/src/analytics.md")]
    pub mod analytics {}
    #[doc = include_str!("../../../book/src/alarp.md")]
    pub mod alarp {}
    #[doc = include_str!("../../../book/src/vault.md")]
    pub mod vault {}
    #[doc = include_str!("../../../book/src/accountability.md")]
    pub mod accountability {}
}
