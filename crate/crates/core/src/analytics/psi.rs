use serde::Serialize;

use super::AnalyticsError;

/// Probabilities below this are raised to it inside the log ratio, so empty
/// bins give a finite index while identical histograms still score exactly 0.
pub const PSI_EPSILON: f64 = 1e-6;

const SUM_TOLERANCE: f64 = 1e-9;

/// Bin edges (ascending, outer edges may be infinite) and the probability
/// mass of each bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    edges: Vec<f64>,
    probs: Vec<f64>,
}

impl Histogram {
    pub fn new(edges: Vec<f64>, probs: Vec<f64>) -> Result<Self, AnalyticsError> {
        let bad = |m: &str| Err(AnalyticsError::InvalidHistogram(m.into()));
        if edges.len() < 2 {
            return bad("need at least two edges");
        }
        if probs.len() != edges.len() - 1 {
            return bad("need exactly one probability per bin");
        }
        if edges.iter().any(|e| e.is_nan()) || !edges.windows(2).all(|w| w[0] < w[1]) {
            return bad("edges must be strictly ascending");
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return bad("probabilities must be finite and non-negative");
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return bad("probabilities must sum to 1");
        }
        Ok(Histogram { edges, probs })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Compact text form carried in event payloads:
    /// `e0,e1,...,en|p1,...,pn`, with `inf` / `-inf` for open ends.
    pub fn to_compact(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        format!("{}|{}", join(&self.edges), join(&self.probs))
    }

    pub fn parse_compact(s: &str) -> Result<Self, AnalyticsError> {
        let bad = || AnalyticsError::InvalidHistogram(format!("cannot parse `{s}`"));
        let (edges, probs) = s.split_once('|').ok_or_else(bad)?;
        let nums = |part: &str| -> Result<Vec<f64>, AnalyticsError> {
            part.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| bad()))
                .collect()
        };
        Histogram::new(nums(edges)?, nums(probs)?)
    }
}

/// Population stability index, `sum (p - q) * ln(p / q)` over shared bins,
/// with each probability floored at [`PSI_EPSILON`] inside the logarithm.
///
/// The log ratio is taken as a difference of logs so that swapping the
/// arguments negates both factors exactly, which keeps the index exactly
/// symmetric.
pub fn psi(baseline: &Histogram, current: &Histogram) -> Result<f64, AnalyticsError> {
    if baseline.edges != current.edges {
        return Err(AnalyticsError::MismatchedEdges);
    }
    Ok(baseline
        .probs
        .iter()
        .zip(&current.probs)
        .map(|(&p, &q)| (p - q) * (p.max(PSI_EPSILON).ln() - q.max(PSI_EPSILON).ln()))
        .sum())
}

/// Bins both samples on equal-count quantile edges of the baseline.
///
/// Interior edges are the baseline order statistics at ranks `k*n/bins`;
/// repeated values collapse into one edge, so heavy ties can yield fewer
/// bins than requested. Bins are closed on the left and open on the right,
/// and the outer edges are infinite.
pub fn histogram_from_samples(
    baseline: &[f64],
    current: &[f64],
    bins: usize,
) -> Result<(Histogram, Histogram), AnalyticsError> {
    if baseline.is_empty() {
        return Err(AnalyticsError::EmptyBaseline);
    }
    if current.is_empty() {
        return Err(AnalyticsError::EmptyCurrent);
    }
    if bins < 2 {
        return Err(AnalyticsError::TooFewBins(bins));
    }
    if baseline.iter().chain(current).any(|x| !x.is_finite()) {
        return Err(AnalyticsError::NonFiniteSample);
    }
    let mut sorted = baseline.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();

    let mut interior: Vec<f64> = (1..bins).map(|k| sorted[k * n / bins]).collect();
    interior.dedup();

    let mut edges = Vec::with_capacity(interior.len() + 2);
    edges.push(f64::NEG_INFINITY);
    edges.extend(&interior);
    edges.push(f64::INFINITY);

    let bin_probs = |sample: &[f64]| {
        let mut counts = vec![0usize; interior.len() + 1];
        for &x in sample {
            counts[interior.partition_point(|&e| e <= x)] += 1;
        }
        let total = sample.len() as f64;
        counts.into_iter().map(|c| c as f64 / total).collect::<Vec<_>>()
    };

    Ok((
        Histogram::new(edges.clone(), bin_probs(baseline))?,
        Histogram::new(edges, bin_probs(current))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(probs: &[f64]) -> Histogram {
        let edges: Vec<f64> = (0..=probs.len()).map(|i| i as f64).collect();
        Histogram::new(edges, probs.to_vec()).unwrap()
    }

    #[test]
    fn identical_distributions_score_zero() {
        assert_eq!(psi(&h(&[0.5, 0.5]), &h(&[0.5, 0.5])).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_value() {
        // 0.25*ln 2 + (-0.25)*ln(2/3), evaluated independently
        let expected = 0.274_653_072_167_027_45;
        let got = psi(&h(&[0.5, 0.5]), &h(&[0.25, 0.75])).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got}");
    }

    #[test]
    fn empty_bins_are_floored() {
        let v = psi(&h(&[1.0, 0.0]), &h(&[0.0, 1.0])).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn mismatched_edges() {
        let a = Histogram::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let b = Histogram::new(vec![0.0, 1.5, 2.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(psi(&a, &b), Err(AnalyticsError::MismatchedEdges));
    }

    #[test]
    fn histogram_validation() {
        assert!(Histogram::new(vec![0.0, 1.0], vec![0.9]).is_err());
        assert!(Histogram::new(vec![1.0, 0.0], vec![1.0]).is_err());
        assert!(Histogram::new(vec![0.0, 1.0, 2.0], vec![1.0]).is_err());
        assert!(Histogram::new(vec![0.0, 1.0], vec![-0.0 + 1.0]).is_ok());
    }

    #[test]
    fn compact_round_trip() {
        let a = Histogram::new(vec![f64::NEG_INFINITY, 0.5, f64::INFINITY], vec![0.3, 0.7]).unwrap();
        assert_eq!(a.to_compact(), "-inf,0.5,inf|0.3,0.7");
        assert_eq!(Histogram::parse_compact(&a.to_compact()).unwrap(), a);
        assert!(Histogram::parse_compact("1,2").is_err());
    }

    #[test]
    fn quantile_bins_of_distinct_values() {
        let base: Vec<f64> = (0..10).map(|i| i as f64 * 1.5).collect();
        let (b, c) = histogram_from_samples(&base, &base, 10).unwrap();
        assert!(b.probs().iter().all(|&p| (p - 0.1).abs() < 1e-15));
        assert_eq!(psi(&b, &c).unwrap(), 0.0);
    }

    #[test]
    fn ties_fall_into_the_right_bin() {
        // edges at ranks 2,4,6,8 of [1,1,1,1,2,2,3,3,3,3] -> 1,2,3,3 -> {1,2,3}
        let base = [1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 3.0];
        let (b, _) = histogram_from_samples(&base, &[0.5], 5).unwrap();
        assert_eq!(b.edges(), &[f64::NEG_INFINITY, 1.0, 2.0, 3.0, f64::INFINITY]);
        // counting by hand: x<1: 0, 1<=x<2: 4, 2<=x<3: 2, x>=3: 4
        assert_eq!(b.probs(), &[0.0, 0.4, 0.2, 0.4]);
    }

    #[test]
    fn sample_errors() {
        assert_eq!(histogram_from_samples(&[], &[1.0], 10), Err(AnalyticsError::EmptyBaseline));
        assert_eq!(histogram_from_samples(&[1.0], &[1.0], 1), Err(AnalyticsError::TooFewBins(1)));
        assert_eq!(
            histogram_from_samples(&[1.0, f64::NAN], &[1.0], 2),
            Err(AnalyticsError::NonFiniteSample)
        );
    }
}
