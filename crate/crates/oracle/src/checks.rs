// SPDX-License-Identifier: Apache-2.0

//! Result comparison and metamorphic checks. Each check returns a list of
//! human-readable violations; empty means it held.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cgaps_core::{analyze, build_suite, ActivationRecord, AnalysisConfig, AnalysisResult, ConceptDictionary, CoverageClass};

use crate::close;

fn cmp_f64(out: &mut Vec<String>, what: &str, a: f64, b: f64, tol: f64) {
    if !close(a, b, tol) {
        out.push(format!("{what}: {a} vs {b}"));
    }
}

fn cmp_opt(out: &mut Vec<String>, what: &str, a: Option<f64>, b: Option<f64>, tol: f64) {
    match (a, b) {
        (Some(x), Some(y)) => cmp_f64(out, what, x, y, tol),
        (None, None) => {}
        _ => out.push(format!("{what}: {a:?} vs {b:?}")),
    }
}

/// Differences between two analyses; floats compared at relative `tol`,
/// classes and sets exactly.
pub fn compare_results(actual: &AnalysisResult, expected: &AnalysisResult, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    if actual.concepts != expected.concepts {
        out.push("concept ids differ".into());
        return out;
    }
    if actual.benchmarks != expected.benchmarks {
        out.push("benchmark names differ".into());
        return out;
    }
    for (b, name) in actual.benchmarks.iter().enumerate() {
        for (i, c) in actual.concepts.iter().enumerate() {
            cmp_f64(
                &mut out,
                &format!("chi_bench[{name}][{c}]"),
                actual.per_benchmark_coverage[b][i],
                expected.per_benchmark_coverage[b][i],
                tol,
            );
            cmp_opt(
                &mut out,
                &format!("chi_model[{name}][{c}]"),
                actual.per_benchmark_performance[b][i],
                expected.per_benchmark_performance[b][i],
                tol,
            );
        }
        if actual.per_benchmark_coverage_class[b] != expected.per_benchmark_coverage_class[b] {
            out.push(format!("per-benchmark classes differ for {name}"));
        }
        match (actual.per_benchmark_thresholds[b], expected.per_benchmark_thresholds[b]) {
            (Some(x), Some(y)) => {
                cmp_f64(&mut out, &format!("p_under[{name}]"), x.p_under, y.p_under, tol);
                cmp_f64(&mut out, &format!("p_over[{name}]"), x.p_over, y.p_over, tol);
            }
            (None, None) => {}
            _ => out.push(format!("threshold presence differs for {name}")),
        }
    }
    for (i, c) in actual.concepts.iter().enumerate() {
        cmp_f64(&mut out, &format!("x_bench[{c}]"), actual.cross_coverage[i], expected.cross_coverage[i], tol);
        cmp_opt(
            &mut out,
            &format!("x_model[{c}]"),
            actual.cross_performance[i],
            expected.cross_performance[i],
            tol,
        );
        if actual.coverage_class[i] != expected.coverage_class[i] {
            out.push(format!(
                "class[{c}]: {:?} vs {:?}",
                actual.coverage_class[i], expected.coverage_class[i]
            ));
        }
    }
    match (actual.thresholds, expected.thresholds) {
        (Some(x), Some(y)) => {
            cmp_f64(&mut out, "p_under", x.p_under, y.p_under, tol);
            cmp_f64(&mut out, "p_over", x.p_over, y.p_over, tol);
        }
        (None, None) => {}
        _ => out.push("threshold presence differs".into()),
    }
    if actual.model_gaps != expected.model_gaps {
        out.push(format!("model gaps: {:?} vs {:?}", actual.model_gaps, expected.model_gaps));
    }
    if actual.overlap.benchmarks != expected.overlap.benchmarks {
        out.push("overlap benchmark order differs".into());
    }
    for (r, (ra, rb)) in actual.overlap.values.iter().zip(&expected.overlap.values).enumerate() {
        for (c, (a, b)) in ra.iter().zip(rb).enumerate() {
            cmp_f64(&mut out, &format!("overlap[{r}][{c}]"), *a, *b, tol);
        }
    }
    out
}

fn run(dict: &ConceptDictionary, records: Vec<ActivationRecord>, config: &AnalysisConfig) -> AnalysisResult {
    let suite = build_suite(dict.clone(), records, config).expect("valid suite");
    analyze(&suite, config).expect("analysis")
}

/// Every benchmark's mean coverage over the dictionary is 1.
pub fn normalization(result: &AnalysisResult, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    for (b, row) in result.per_benchmark_coverage.iter().enumerate() {
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        if !close(mean, 1.0, tol) {
            out.push(format!("{}: mean coverage {mean}", result.benchmarks[b]));
        }
    }
    out
}

pub fn ranges(result: &AnalysisResult) -> Vec<String> {
    let mut out = Vec::new();
    let unit = |x: f64| (0.0..=1.0).contains(&x);
    for (b, row) in result.per_benchmark_coverage.iter().enumerate() {
        for (i, &x) in row.iter().enumerate() {
            if !(x >= 0.0 && x.is_finite()) {
                out.push(format!("chi_bench[{b}][{i}] = {x}"));
            }
        }
    }
    for (b, row) in result.per_benchmark_performance.iter().enumerate() {
        for (i, x) in row.iter().enumerate() {
            if let Some(x) = *x {
                if !unit(x) {
                    out.push(format!("chi_model[{b}][{i}] = {x}"));
                }
            }
        }
    }
    for (i, &x) in result.cross_coverage.iter().enumerate() {
        if !(x >= 0.0 && x.is_finite()) {
            out.push(format!("x_bench[{i}] = {x}"));
        }
    }
    for (i, x) in result.cross_performance.iter().enumerate() {
        if let Some(x) = *x {
            if !unit(x) {
                out.push(format!("x_model[{i}] = {x}"));
            }
        }
    }
    out
}

/// The four classes cover every concept once, and zero activation goes
/// with zero coverage, the missing class and undefined performance.
pub fn partition_and_duality(result: &AnalysisResult) -> Vec<String> {
    let mut out = Vec::new();
    let counted: usize = CoverageClass::ALL
        .iter()
        .map(|&k| result.coverage_class.iter().filter(|&&c| c == k).count())
        .sum();
    if counted != result.concepts.len() {
        out.push(format!("{counted} classified of {}", result.concepts.len()));
    }
    for (i, c) in result.concepts.iter().enumerate() {
        let inactive = result.per_benchmark_coverage.iter().all(|row| row[i] == 0.0);
        let zero = result.cross_coverage[i] == 0.0;
        let undefined = result.cross_performance[i].is_none();
        if inactive != zero || inactive != undefined {
            out.push(format!("concept {c}: inactive={inactive} zero={zero} undefined={undefined}"));
        }
        if inactive && result.coverage_class[i] != CoverageClass::Missing {
            out.push(format!("concept {c}: inactive but {:?}", result.coverage_class[i]));
        }
    }
    out
}

/// With every score set to `m`, each defined performance value is exactly `m`.
pub fn constant_score(dict: &ConceptDictionary, records: &[ActivationRecord], m: f64) -> Vec<String> {
    let recs = records
        .iter()
        .cloned()
        .map(|mut r| {
            r.score = Some(m);
            r
        })
        .collect();
    let result = run(dict, recs, &AnalysisConfig::default());
    let mut out = Vec::new();
    for row in &result.per_benchmark_performance {
        out.extend(row.iter().flatten().filter(|&&x| x != m).map(|x| format!("chi_model {x} != {m}")));
    }
    out.extend(
        result
            .cross_performance
            .iter()
            .flatten()
            .filter(|&&x| x != m)
            .map(|x| format!("x_model {x} != {m}")),
    );
    out
}

/// Multiplying every activation by `k` changes nothing beyond `tol`.
pub fn scale(dict: &ConceptDictionary, records: &[ActivationRecord], k: f64, tol: f64) -> Vec<String> {
    let config = AnalysisConfig::default();
    let base = run(dict, records.to_vec(), &config);
    let scaled = records
        .iter()
        .cloned()
        .map(|mut r| {
            r.activations = r.activations.scaled(k);
            r
        })
        .collect();
    compare_results(&run(dict, scaled, &config), &base, tol)
}

/// Doubling both activations and token counts leaves results bit-identical.
pub fn length_renormalization(dict: &ConceptDictionary, records: &[ActivationRecord]) -> Vec<String> {
    let config = AnalysisConfig::default();
    let base = run(dict, records.to_vec(), &config);
    let doubled = records
        .iter()
        .cloned()
        .map(|mut r| {
            r.activations = r.activations.scaled(2.0);
            r.token_count *= 2;
            r
        })
        .collect();
    let other = run(dict, doubled, &config);
    if other == base {
        Vec::new()
    } else {
        compare_results(&other, &base, 0.0)
    }
}

/// Shuffling the input record order leaves results bit-identical.
pub fn permutation(dict: &ConceptDictionary, records: &[ActivationRecord], seed: u64) -> Vec<String> {
    let config = AnalysisConfig::default();
    let base = run(dict, records.to_vec(), &config);
    let mut shuffled = records.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let other = run(dict, shuffled, &config);
    if other == base {
        Vec::new()
    } else {
        compare_results(&other, &base, 0.0)
    }
}

/// Appending a benchmark in which the first concept is inactive scales its
/// cross-benchmark coverage by `|B| / (|B| + 1)`.
pub fn dilution(dict: &ConceptDictionary, records: &[ActivationRecord], tol: f64) -> Vec<String> {
    if dict.len() < 2 {
        return Vec::new();
    }
    let config = AnalysisConfig::default();
    let base = run(dict, records.to_vec(), &config);
    let target = dict.concepts()[0].id;
    let other = dict.concepts()[1].id;
    let mut extended = records.to_vec();
    extended.push(ActivationRecord {
        benchmark: "zzz-diluting".into(),
        datapoint_id: "d0".into(),
        token_count: 3,
        score: Some(1.0),
        provenance: Default::default(),
        activations: cgaps_core::SparseActivations::from_pairs([(other, 1.5)]),
    });
    let diluted = run(dict, extended, &config);
    let b = base.benchmarks.len() as f64;
    let expect = base.cross_coverage[0] * b / (b + 1.0);
    let got = diluted.cross_coverage[diluted.concept_index(target).expect("concept present")];
    if close(got, expect, tol) {
        Vec::new()
    } else {
        vec![format!("diluted x_bench {got}, expected {expect}")]
    }
}
