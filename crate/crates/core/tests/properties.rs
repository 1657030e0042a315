// SPDX-License-Identifier: Apache-2.0

use cgaps_core::{analyze, build_suite, AnalysisConfig};
use cgaps_oracle::checks;
use cgaps_oracle::{random_suite, RandomSuiteBounds};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 48,
        rng_seed: RngSeed::Fixed(0x5eed_cafe),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn bounds() -> RandomSuiteBounds {
    RandomSuiteBounds {
        max_benchmarks: 4,
        max_concepts: 30,
        max_records: 60,
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn coverage_is_self_normalized(seed in any::<u64>()) {
        let s = random_suite(seed, bounds());
        let cfg = AnalysisConfig::default();
        let suite = build_suite(s.dictionary, s.records, &cfg).unwrap();
        let result = analyze(&suite, &cfg).unwrap();
        prop_assert_eq!(checks::normalization(&result, 1e-9), Vec::<String>::new());
        prop_assert_eq!(checks::ranges(&result), Vec::<String>::new());
        prop_assert_eq!(checks::partition_and_duality(&result), Vec::<String>::new());
    }

    #[test]
    fn constant_score_collapses(seed in any::<u64>(), m in prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0]) {
        let s = random_suite(seed, bounds());
        prop_assert_eq!(checks::constant_score(&s.dictionary, &s.records, m), Vec::<String>::new());
    }

    #[test]
    fn scaling_changes_nothing(seed in any::<u64>(), k in 1e-3f64..1e3) {
        let s = random_suite(seed, bounds());
        prop_assert_eq!(checks::scale(&s.dictionary, &s.records, k, 1e-12), Vec::<String>::new());
    }

    #[test]
    fn power_of_two_scaling_is_exact(seed in any::<u64>(), e in -8i32..8) {
        let s = random_suite(seed, bounds());
        prop_assert_eq!(checks::scale(&s.dictionary, &s.records, 2f64.powi(e), 0.0), Vec::<String>::new());
    }

    #[test]
    fn length_renormalization_is_exact(seed in any::<u64>()) {
        let s = random_suite(seed, bounds());
        prop_assert_eq!(checks::length_renormalization(&s.dictionary, &s.records), Vec::<String>::new());
    }

    #[test]
    fn record_order_is_irrelevant(seed in any::<u64>(), shuffle in any::<u64>()) {
        let s = random_suite(seed, bounds());
        prop_assert_eq!(checks::permutation(&s.dictionary, &s.records, shuffle), Vec::<String>::new());
    }

    #[test]
    fn inactive_benchmark_dilutes(seed in any::<u64>()) {
        let s = random_suite(seed, bounds());
        prop_assert_eq!(checks::dilution(&s.dictionary, &s.records, 1e-12), Vec::<String>::new());
    }
}
