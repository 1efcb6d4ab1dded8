//! ALARP triage: a 5x5 harm-by-likelihood matrix split into three regions,
//! and the gross-disproportion test for the region in between.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{Finding, FindingSet, SeqWindow};
use crate::policy::AlarpOverrides;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlarpParams {
    pub intolerable_min: i64,
    pub acceptable_max: i64,
    pub disproportion_factor: f64,
}

impl Default for AlarpParams {
    fn default() -> Self {
        AlarpParams {
            intolerable_min: 15,
            acceptable_max: 4,
            disproportion_factor: 3.0,
        }
    }
}

impl AlarpParams {
    pub fn new(intolerable_min: i64, acceptable_max: i64, disproportion_factor: f64) -> Result<Self, String> {
        if acceptable_max >= intolerable_min {
            return Err(format!(
                "alarp_acceptable_max ({acceptable_max}) must be below alarp_intolerable_min ({intolerable_min})"
            ));
        }
        if !(disproportion_factor.is_finite() && disproportion_factor > 0.0) {
            return Err(format!(
                "alarp_disproportion_factor must be a positive number, got {disproportion_factor}"
            ));
        }
        Ok(AlarpParams {
            intolerable_min,
            acceptable_max,
            disproportion_factor,
        })
    }

    pub fn from_overrides(o: &AlarpOverrides) -> Result<Self, String> {
        let d = AlarpParams::default();
        AlarpParams::new(
            o.intolerable_min.unwrap_or(d.intolerable_min),
            o.acceptable_max.unwrap_or(d.acceptable_max),
            o.disproportion_factor.unwrap_or(d.disproportion_factor),
        )
    }

    pub fn region(&self, score: i64) -> Region {
        if score >= self.intolerable_min {
            Region::Intolerable
        } else if score <= self.acceptable_max {
            Region::BroadlyAcceptable
        } else {
            Region::Alarp
        }
    }
}

/// Ordered from least to most severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    BroadlyAcceptable,
    Alarp,
    Intolerable,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::BroadlyAcceptable => "broadly_acceptable",
            Region::Alarp => "alarp",
            Region::Intolerable => "intolerable",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskAssessment {
    pub finding_id: String,
    pub likelihood: u8,
    pub score: i64,
    pub region: Region,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mitigation_required: Option<bool>,
    pub rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Costs {
    pub risk: f64,
    pub mitigation: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("costs must be finite and non-negative (risk {risk}, mitigation {mitigation})")]
pub struct CostError {
    pub risk: f64,
    pub mitigation: f64,
}

/// Likelihood band for `n` findings of one rule.
pub fn likelihood_from_count(n: usize) -> u8 {
    match n {
        0 | 1 => 1,
        2..=3 => 2,
        4..=6 => 3,
        7..=10 => 4,
        _ => 5,
    }
}

/// Frequency of the rule's findings in the window, as a likelihood band.
pub fn likelihood_of(rule_id: &str, findings: &FindingSet, window: SeqWindow) -> u8 {
    let n = findings
        .findings
        .iter()
        .filter(|f| f.rule_id == rule_id && window.contains(f.trigger_seq))
        .count();
    likelihood_from_count(n)
}

/// Mitigation is required unless its cost is grossly disproportionate to the
/// cost of the risk, i.e. exceeds `factor` times it.
pub fn mitigation_justified(cost_of_risk: f64, cost_of_mitigation: f64, factor: f64) -> Result<bool, CostError> {
    let ok = |c: f64| c.is_finite() && c >= 0.0;
    if !ok(cost_of_risk) || !ok(cost_of_mitigation) {
        return Err(CostError {
            risk: cost_of_risk,
            mitigation: cost_of_mitigation,
        });
    }
    Ok(cost_of_mitigation <= factor * cost_of_risk)
}

pub fn triage_finding(
    finding: &Finding,
    likelihood: u8,
    params: &AlarpParams,
    costs: Option<Costs>,
) -> RiskAssessment {
    let harm = finding.harm.get() as i64;
    let score = harm * likelihood as i64;
    let region = params.region(score);
    let base = format!(
        "harm {harm} x likelihood {likelihood} = {score}; intolerable at >= {}, broadly acceptable at <= {}",
        params.intolerable_min, params.acceptable_max
    );
    let (mitigation_required, rationale) = match region {
        Region::Intolerable => (Some(true), format!("{base}; risk is intolerable and must be reduced")),
        Region::BroadlyAcceptable => (Some(false), format!("{base}; risk is broadly acceptable")),
        Region::Alarp => match costs.map(|c| (c, mitigation_justified(c.risk, c.mitigation, params.disproportion_factor))) {
            Some((c, Ok(required))) => {
                let verdict = if required {
                    "mitigation is required"
                } else {
                    "mitigation is grossly disproportionate"
                };
                (
                    Some(required),
                    format!(
                        "{base}; mitigation cost {} vs {} x risk cost {}: {verdict}",
                        c.mitigation, params.disproportion_factor, c.risk
                    ),
                )
            }
            Some((_, Err(e))) => (None, format!("{base}; {e}")),
            None => (None, format!("{base}; tolerable only if reduced as low as reasonably practicable, costs not provided")),
        },
    };
    RiskAssessment {
        finding_id: finding.id.clone(),
        likelihood,
        score,
        region,
        mitigation_required,
        rationale,
    }
}

/// Triage for a whole set: each finding's likelihood is its rule's
/// frequency within the set's window.
pub fn assess_all(
    set: &FindingSet,
    params: &AlarpParams,
    costs_for: impl Fn(&str) -> Option<Costs>,
) -> Vec<RiskAssessment> {
    let counts = set.counts_by_rule();
    set.findings
        .iter()
        .map(|f| {
            let l = likelihood_from_count(counts.get(f.rule_id.as_str()).copied().unwrap_or(1));
            triage_finding(f, l, params, costs_for(&f.rule_id))
        })
        .collect()
}
