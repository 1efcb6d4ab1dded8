use auditbot::analytics::{lexicon_imbalance, Lexicon};
use proptest::prelude::*;

const WORDS: &[&str] = &[
    "ambitious", "assertive", "dominant", "competitive", "leader", "supportive", "collaborative",
    "warm", "team", "the", "we", "offer", "flexible", "hours", "and", "build", "systems",
];

#[test]
fn counts_prefix_matches() {
    let lex = Lexicon::parse("[masculine]\ncompet\nlead\n[feminine]\nsupport\n").unwrap();
    let s = lexicon_imbalance("Competitive LEADERS; supportive, leadership!", &lex);
    assert_eq!((s.masculine, s.feminine, s.imbalance), (3, 1, 2));
}

proptest! {
    #[test]
    fn permutation_invariant(idx in prop::collection::vec(0..WORDS.len(), 0..40), seed in any::<u64>()) {
        let lex = Lexicon::builtin_english();
        let words: Vec<&str> = idx.iter().map(|&i| WORDS[i]).collect();
        let mut shuffled = words.clone();
        let n = shuffled.len();
        let mut x = seed;
        for i in (1..n).rev() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (x >> 33) as usize % (i + 1));
        }
        let a = lexicon_imbalance(&words.join(" "), &lex);
        let b = lexicon_imbalance(&shuffled.join(", "), &lex);
        prop_assert_eq!(a, b);
        prop_assert_eq!(a.imbalance, a.masculine - a.feminine);
    }
}
