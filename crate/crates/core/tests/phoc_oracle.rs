//! PHOC encoding against the brute-force interval-overlap oracle.

mod support;

use nlx_core::phoc::{self, PhocConfig};
use proptest::prelude::*;

fn assert_matches_oracle(word: &str, config: &PhocConfig) {
    let encoded = phoc::encode(word, config).unwrap();
    let expected = support::phoc_oracle(word, config.charset(), config.levels());
    assert_eq!(encoded.len(), expected.len());
    for (i, &want) in expected.iter().enumerate() {
        assert_eq!(
            encoded.get(i),
            want,
            "word {word:?}: bit {i} disagrees with the oracle"
        );
    }
}

#[test]
fn oracle_equivalence_all_short_words() {
    let config = PhocConfig::new("abc", &[1, 2, 4, 8], true).unwrap();
    let words = support::all_words(&['a', 'b', 'c'], 6);
    assert_eq!(words.len(), 3 + 9 + 27 + 81 + 243 + 729);
    for word in &words {
        assert_matches_oracle(word, &config);
    }
}

#[test]
fn oracle_equivalence_long_compound() {
    let config = PhocConfig::default_96();
    assert_matches_oracle("Nationalsozialistische", &config);
    assert_matches_oracle("Rossenstraße", &config);
    assert_matches_oracle("Staatsbürger", &config);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn oracle_equivalence_random_words(word in "[abc]{1,12}") {
        let config = PhocConfig::new("abc", &[1, 2, 4, 8], true).unwrap();
        assert_matches_oracle(&word, &config);
    }

    #[test]
    fn dimension_matches_config(
        charset_len in 1usize..12,
        word in "[a-f]{1,10}",
    ) {
        let charset: String = ('a'..).take(charset_len).collect();
        let config = PhocConfig::new(&charset, &[1, 2, 4], true).unwrap();
        if let Ok(v) = phoc::encode(&word, &config) {
            prop_assert_eq!(v.len(), config.dimension());
        }
    }

    #[test]
    fn coverage_and_aggregation(word in "[abcd]{1,9}") {
        let config = PhocConfig::new("abcd", &[1, 2, 4, 8], true).unwrap();
        let v = phoc::encode(&word, &config).unwrap();
        let m = config.charset().len();
        for (ci, &c) in config.charset().iter().enumerate() {
            let present = word.contains(c);
            // Level-1 bit records presence.
            prop_assert_eq!(v.get(ci), present);
            for (li, &level) in config.levels().iter().enumerate() {
                let any = (0..level).any(|r| v.get(config.bit_offset(li, r, ci)));
                // Coverage at every level, and OR over regions equals level 1.
                prop_assert_eq!(any, present, "char {} level {}", c, level);
            }
        }
        prop_assert_eq!(v.len(), m * 15);
    }

    #[test]
    fn encode_is_pure(word in "[abc]{1,8}") {
        let config = PhocConfig::new("abc", &[1, 2, 4, 8], true).unwrap();
        let a = phoc::encode(&word, &config).unwrap();
        let b = phoc::encode(&word, &config).unwrap();
        prop_assert_eq!(a.as_bytes(), b.as_bytes());
    }
}
