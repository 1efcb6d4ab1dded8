use auditbot::alarp::{likelihood_from_count, mitigation_justified, AlarpParams, Region};
use proptest::prelude::*;

use Region::{Alarp as A, BroadlyAcceptable as B, Intolerable as I};

/// Rows are harm 1..5, columns likelihood 1..5, under the default params.
const TABLE: [[Region; 5]; 5] = [
    [B, B, B, B, A],
    [B, B, A, A, A],
    [B, A, A, A, I],
    [B, A, A, I, I],
    [A, A, I, I, I],
];

#[test]
fn all_pairs() {
    let p = AlarpParams::default();
    for h in 1..=5 {
        for l in 1..=5 {
            assert_eq!(p.region(h * l), TABLE[h as usize - 1][l as usize - 1], "harm {h} likelihood {l}");
        }
    }
}

#[test]
fn monotone() {
    let p = AlarpParams::default();
    for h in 1..=5i64 {
        for l in 1..=5i64 {
            if h < 5 {
                assert!(p.region((h + 1) * l) >= p.region(h * l));
            }
            if l < 5 {
                assert!(p.region(h * (l + 1)) >= p.region(h * l));
            }
        }
    }
}

#[test]
fn likelihood_bands() {
    let expected = [(1, 1), (2, 2), (3, 2), (4, 3), (6, 3), (7, 4), (10, 4), (11, 5), (500, 5)];
    for (n, l) in expected {
        assert_eq!(likelihood_from_count(n), l, "n = {n}");
    }
}

proptest! {
    #[test]
    fn cost_scaling_invariant(risk in 0.0f64..1e6, mit in 0.0f64..1e6, k in prop::sample::select(vec![0.5, 2.0, 4.0, 1024.0])) {
        // powers of two scale exactly
        prop_assert_eq!(
            mitigation_justified(risk, mit, 3.0).unwrap(),
            mitigation_justified(risk * k, mit * k, 3.0).unwrap()
        );
    }
}
