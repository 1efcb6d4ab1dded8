//! Deterministic statistics behind the hours, gate and drift rules.
//!
//! Nothing here is learned from data: drift is the population stability
//! index over shared bins, working time is an interval union bucketed by ISO
//! week, and job-posting wording is scored against a fixed stem lexicon.

mod hours;
mod lexicon;
mod psi;

pub use hours::{covered_nanos, weekly_hours, Session, WeekKey, WeekLedger};
pub(crate) use hours::nanos_to_hours;
pub use lexicon::{lexicon_imbalance, Lexicon, LexiconScore};
pub use psi::{histogram_from_samples, psi, Histogram, PSI_EPSILON};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("histogram edges differ")]
    MismatchedEdges,
    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),
    #[error("baseline sample is empty")]
    EmptyBaseline,
    #[error("current sample is empty")]
    EmptyCurrent,
    #[error("at least 2 bins are required, got {0}")]
    TooFewBins(usize),
    #[error("samples must be finite")]
    NonFiniteSample,
    #[error("session for {actor} starts after it ends")]
    SessionOrder { actor: String },
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
}
