// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use cgaps_core::metrics::{coverage_overlap, cross_benchmark_coverage, cross_benchmark_performance};
use cgaps_core::{
    analyze, build_suite, ActivationRecord, AnalysisConfig, Concept, ConceptDictionary, ConceptId, CoverageClass,
    Provenance, SparseActivations,
};
use cgaps_oracle::checks::compare_results;
use cgaps_oracle::{random_suite, RandomSuiteBounds};

fn rec(b: &str, d: &str, tokens: u64, score: f64, acts: &[(ConceptId, f64)]) -> ActivationRecord {
    ActivationRecord {
        benchmark: b.into(),
        datapoint_id: d.into(),
        token_count: tokens,
        score: Some(score),
        provenance: Provenance::PromptOnly,
        activations: SparseActivations::from_pairs(acts.iter().copied()),
    }
}

fn dict(ids: impl IntoIterator<Item = ConceptId>) -> ConceptDictionary {
    ConceptDictionary::new(
        "sae",
        "model",
        ids.into_iter().map(|id| Concept { id, label: format!("c{id}") }).collect(),
    )
    .unwrap()
}

#[test]
fn random_suites_match_dense_reference() {
    let config = AnalysisConfig::default();
    for seed in 0..200 {
        let s = random_suite(seed, RandomSuiteBounds::default());
        let suite = build_suite(s.dictionary.clone(), s.records.clone(), &config).unwrap();
        let actual = analyze(&suite, &config).unwrap();
        let expected = cgaps_oracle::analyze(&s.dictionary, &s.records, &config);
        let diffs = compare_results(&actual, &expected, 1e-9);
        assert!(diffs.is_empty(), "seed {seed}: {:?}", &diffs[..diffs.len().min(5)]);
    }
}

#[test]
fn worked_coverage_example() {
    let records = vec![rec("b", "dp1", 1, 1.0, &[(1, 2.0), (3, 1.0)]), rec("b", "dp2", 1, 0.0, &[(1, 1.0)])];
    let config = AnalysisConfig::default();
    let suite = build_suite(dict([1, 2, 3]), records, &config).unwrap();
    assert_eq!(cross_benchmark_coverage(&suite).unwrap(), vec![2.25, 0.0, 0.75]);
    let x_model = cross_benchmark_performance(&suite).unwrap();
    assert!((x_model[0].unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(x_model[1], None);
    assert_eq!(x_model[2], Some(1.0));
}

#[test]
fn cross_coverage_uses_all_benchmarks_as_divisor() {
    // b1 covers concepts 1 and 3 at 2.25 and 0.75; b2 covers 1 and 2 at 0.75 and 2.25.
    let records = vec![
        rec("b1", "1", 1, 1.0, &[(1, 2.0), (3, 1.0)]),
        rec("b1", "2", 1, 1.0, &[(1, 1.0)]),
        rec("b2", "1", 1, 1.0, &[(1, 1.0), (2, 3.0)]),
    ];
    let config = AnalysisConfig::default();
    let suite = build_suite(dict([1, 2, 3]), records, &config).unwrap();
    let x = cross_benchmark_coverage(&suite).unwrap();
    assert_eq!(x[0], (2.25 + 0.75) / 2.0);
    // concept 3 is active only in b1 with coverage 0.75
    assert_eq!(x[2], 0.375);

    let only_b1 = vec![rec("b1", "1", 1, 1.0, &[(1, 3.0), (3, 1.0)]), rec("b2", "1", 1, 1.0, &[(2, 1.0)])];
    let suite = build_suite(dict([1, 2, 3]), only_b1, &config).unwrap();
    assert_eq!(cross_benchmark_coverage(&suite).unwrap()[0], 1.125);
}

#[test]
fn cross_performance_averages_defined_benchmarks() {
    let records = vec![
        rec("a", "1", 1, 0.4, &[(1, 1.0)]),
        rec("b", "1", 1, 0.8, &[(1, 1.0)]),
        rec("c", "1", 1, 0.0, &[(2, 1.0)]),
    ];
    let config = AnalysisConfig::default();
    let suite = build_suite(dict([1, 2, 3]), records, &config).unwrap();
    let x = cross_benchmark_performance(&suite).unwrap();
    assert!((x[0].unwrap() - 0.6).abs() < 1e-15);
    assert_eq!(x[1], Some(0.0));
    assert_eq!(x[2], None);
    let result = analyze(&suite, &config).unwrap();
    assert_eq!(result.model_gaps, BTreeSet::from([2]));
}

#[test]
fn ten_distinct_values_give_one_underrepresented() {
    // Ten concepts in one benchmark with distinct totals 1..=10.
    let acts: Vec<(ConceptId, f64)> = (0..10).map(|c| (c, f64::from(c + 1))).collect();
    let records = vec![rec("b", "1", 1, 1.0, &acts)];
    let config = AnalysisConfig::default();
    let suite = build_suite(dict(0..10), records.clone(), &config).unwrap();
    let result = analyze(&suite, &config).unwrap();
    assert_eq!(result.concepts_in_class(CoverageClass::Underrepresented), vec![0]);
    assert_eq!(result.concepts_in_class(CoverageClass::Overrepresented), vec![9]);
    let oracle = cgaps_oracle::analyze(&dict(0..10), &records, &config);
    assert!(compare_results(&result, &oracle, 1e-12).is_empty());
}

#[test]
fn equal_values_resolve_to_underrepresented() {
    let acts: Vec<(ConceptId, f64)> = (0..5).map(|c| (c, 2.0)).collect();
    let config = AnalysisConfig::default();
    let suite = build_suite(dict(0..6), vec![rec("b", "1", 1, 1.0, &acts)], &config).unwrap();
    let result = analyze(&suite, &config).unwrap();
    let t = result.thresholds.unwrap();
    assert_eq!(t.p_under, t.p_over);
    assert_eq!(result.concepts_in_class(CoverageClass::Underrepresented), vec![0, 1, 2, 3, 4]);
    assert_eq!(result.concepts_in_class(CoverageClass::Missing), vec![5]);
}

#[test]
fn jaccard_of_shifted_sets() {
    let records = vec![
        rec("b1", "1", 1, 1.0, &[(1, 1.0), (2, 1.0), (3, 1.0)]),
        rec("b2", "1", 1, 1.0, &[(2, 1.0), (3, 1.0), (4, 1.0)]),
        rec("b3", "1", 1, 1.0, &[(5, 1.0)]),
    ];
    let config = AnalysisConfig::default();
    let suite = build_suite(dict(1..=5), records, &config).unwrap();
    let m = coverage_overlap(&suite, &config).unwrap();
    assert_eq!(m.values[0][1], 0.5);
    assert_eq!(m.values[1][0], 0.5);
    assert_eq!(m.values[0][2], 0.0);
    assert!((0..3).all(|i| m.values[i][i] == 1.0));
}
