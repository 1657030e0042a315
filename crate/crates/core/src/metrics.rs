// SPDX-License-Identifier: Apache-2.0

//! Coverage and performance scores per concept, coverage classes, model gaps
//! and the benchmark overlap matrix.
//!
//! Every per-concept vector returned here is dense and aligned with the
//! dictionary's concept order. Reductions run in canonical order (concept id,
//! then benchmark name, then datapoint id) so results are bit-reproducible
//! regardless of thread count.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    ActivationRecord, AnalysisConfig, Benchmark, ConceptDictionary, ConceptId, ConfigError,
    RecordRef, SuiteIndex,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("unknown benchmark {0:?}")]
    UnknownBenchmark(String),
    #[error("benchmark {0:?} has no nonzero activation")]
    AllZeroBenchmark(String),
    #[error("benchmark {0:?} has records without a score")]
    UnscoredBenchmark(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageClass {
    Missing,
    Underrepresented,
    Mid,
    Overrepresented,
}

impl CoverageClass {
    pub const ALL: [CoverageClass; 4] = [
        CoverageClass::Missing,
        CoverageClass::Underrepresented,
        CoverageClass::Mid,
        CoverageClass::Overrepresented,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CoverageClass::Missing => "missing",
            CoverageClass::Underrepresented => "underrepresented",
            CoverageClass::Mid => "mid",
            CoverageClass::Overrepresented => "overrepresented",
        }
    }
}

impl std::str::FromStr for CoverageClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CoverageClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown coverage class {s:?}"))
    }
}

/// Realized percentile cutoffs over the non-missing scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecileThresholds {
    pub p_under: f64,
    pub p_over: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub classes: Vec<CoverageClass>,
    /// `None` when every concept is missing.
    pub thresholds: Option<DecileThresholds>,
}

/// Pairwise Jaccard similarity of the covered-concept sets of each benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    pub benchmarks: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

/// Records excluded from a computation, addressed by [`RecordRef`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordMask {
    removed: Vec<Vec<bool>>,
}

impl RecordMask {
    pub fn keep_all(suite: &SuiteIndex) -> Self {
        Self {
            removed: suite
                .benchmarks()
                .iter()
                .map(|b| vec![false; b.records.len()])
                .collect(),
        }
    }

    pub fn remove(&mut self, at: RecordRef) {
        self.removed[at.benchmark][at.record] = true;
    }

    pub fn is_removed(&self, at: RecordRef) -> bool {
        self.removed[at.benchmark][at.record]
    }

    pub fn removed_count(&self) -> usize {
        self.removed.iter().flatten().filter(|&&r| r).count()
    }

    fn benchmark(&self, b: usize) -> &[bool] {
        &self.removed[b]
    }
}

/// Token-length-normalized activation of concept `c` on `record`.
#[inline]
pub fn normalized_activation(record: &ActivationRecord, c: ConceptId) -> f64 {
    record
        .activations
        .get(c)
        .map_or(0.0, |s| s / record.token_count as f64)
}

/// Dense per-concept sums for one benchmark.
#[derive(Debug, Clone)]
pub struct BenchmarkTotals {
    /// Sum of normalized activations per concept.
    activation: Vec<f64>,
    /// Sum of (score - score_floor) * normalized activation per concept.
    excess: Vec<f64>,
    score_floor: f64,
    score_ceil: f64,
    scored: bool,
    kept: usize,
}

impl BenchmarkTotals {
    pub fn compute(
        benchmark: &Benchmark,
        dictionary: &ConceptDictionary,
        removed: Option<&[bool]>,
    ) -> Self {
        let n = dictionary.len();
        let keep = |i: usize| removed.map_or(true, |m| !m[i]);

        let mut floor = f64::INFINITY;
        let mut ceil = f64::NEG_INFINITY;
        let mut kept = 0;
        for (i, r) in benchmark.records.iter().enumerate() {
            if keep(i) {
                kept += 1;
                if let Some(m) = r.score {
                    floor = floor.min(m);
                    ceil = ceil.max(m);
                }
            }
        }
        let scored = benchmark.scored;

        let mut activation = vec![0.0; n];
        let mut excess = if scored { vec![0.0; n] } else { Vec::new() };
        for (i, r) in benchmark.records.iter().enumerate() {
            if !keep(i) {
                continue;
            }
            let len = r.token_count as f64;
            let offset = r.score.map_or(0.0, |m| m - floor);
            for &(c, s) in r.activations.as_slice() {
                let Some(pos) = dictionary.position(c) else {
                    continue;
                };
                let normalized = s / len;
                activation[pos] += normalized;
                if scored {
                    excess[pos] += offset * normalized;
                }
            }
        }
        Self {
            activation,
            excess,
            score_floor: floor,
            score_ceil: ceil,
            scored,
            kept,
        }
    }

    pub fn activation(&self) -> &[f64] {
        &self.activation
    }

    /// Number of records that contributed.
    pub fn kept(&self) -> usize {
        self.kept
    }

    /// Per-concept coverage; `None` when the benchmark has no activation at all.
    pub fn coverage(&self) -> Option<Vec<f64>> {
        let total: f64 = self.activation.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let mean = total / self.activation.len() as f64;
        Some(self.activation.iter().map(|a| a / mean).collect())
    }

    /// Per-concept activation-weighted mean score; `None` for unscored benchmarks.
    ///
    /// Computed as floor + excess/total so that a constant score is returned
    /// exactly, then clamped to the observed score range.
    pub fn performance(&self) -> Option<Vec<Option<f64>>> {
        if !self.scored {
            return None;
        }
        Some(
            self.activation
                .iter()
                .zip(&self.excess)
                .map(|(&total, &excess)| {
                    (total > 0.0).then(|| {
                        (self.score_floor + excess / total).clamp(self.score_floor, self.score_ceil)
                    })
                })
                .collect(),
        )
    }
}

/// Per-benchmark totals for a whole suite, optionally with records masked out.
#[derive(Debug, Clone)]
pub struct SuiteTotals {
    names: Vec<String>,
    benchmarks: Vec<BenchmarkTotals>,
}

impl SuiteTotals {
    pub fn compute(suite: &SuiteIndex, mask: Option<&RecordMask>) -> Self {
        let dictionary = suite.dictionary();
        let benchmarks = suite
            .benchmarks()
            .par_iter()
            .enumerate()
            .map(|(b, bench)| BenchmarkTotals::compute(bench, dictionary, mask.map(|m| m.benchmark(b))))
            .collect();
        Self {
            names: suite.benchmark_names(),
            benchmarks,
        }
    }

    pub fn benchmarks(&self) -> &[BenchmarkTotals] {
        &self.benchmarks
    }

    pub fn per_benchmark_coverage(&self) -> Result<Vec<Vec<f64>>, MetricsError> {
        self.benchmarks
            .iter()
            .zip(&self.names)
            .map(|(t, name)| t.coverage().ok_or_else(|| MetricsError::AllZeroBenchmark(name.clone())))
            .collect()
    }

    pub fn per_benchmark_performance(&self) -> Result<Vec<Vec<Option<f64>>>, MetricsError> {
        self.benchmarks
            .iter()
            .zip(&self.names)
            .map(|(t, name)| t.performance().ok_or_else(|| MetricsError::UnscoredBenchmark(name.clone())))
            .collect()
    }

    /// Cross-benchmark performance only; benchmarks left empty by a mask
    /// simply contribute nothing.
    pub fn cross_performance(&self) -> Result<Vec<Option<f64>>, MetricsError> {
        Ok(cross_performance_from(&self.per_benchmark_performance()?))
    }
}

fn lookup(suite: &SuiteIndex, name: &str) -> Result<usize, MetricsError> {
    suite
        .benchmark_index(name)
        .ok_or_else(|| MetricsError::UnknownBenchmark(name.to_string()))
}

/// Coverage of every concept within benchmark `name`.
pub fn benchmark_coverage(suite: &SuiteIndex, name: &str) -> Result<Vec<f64>, MetricsError> {
    let b = lookup(suite, name)?;
    BenchmarkTotals::compute(&suite.benchmarks()[b], suite.dictionary(), None)
        .coverage()
        .ok_or_else(|| MetricsError::AllZeroBenchmark(name.to_string()))
}

/// Mean of per-benchmark coverage with the full benchmark count as divisor.
pub fn cross_coverage_from(per_benchmark: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = per_benchmark.first() else {
        return Vec::new();
    };
    let count = per_benchmark.len() as f64;
    (0..first.len())
        .map(|c| per_benchmark.iter().map(|b| b[c]).sum::<f64>() / count)
        .collect()
}

pub fn cross_benchmark_coverage(suite: &SuiteIndex) -> Result<Vec<f64>, MetricsError> {
    let per = SuiteTotals::compute(suite, None).per_benchmark_coverage()?;
    Ok(cross_coverage_from(&per))
}

/// Activation-weighted mean score of every concept within benchmark `name`.
pub fn benchmark_performance(
    suite: &SuiteIndex,
    name: &str,
) -> Result<Vec<Option<f64>>, MetricsError> {
    let b = lookup(suite, name)?;
    BenchmarkTotals::compute(&suite.benchmarks()[b], suite.dictionary(), None)
        .performance()
        .ok_or_else(|| MetricsError::UnscoredBenchmark(name.to_string()))
}

/// Mean of the defined per-benchmark performances; undefined where no
/// benchmark activates the concept.
pub fn cross_performance_from(per_benchmark: &[Vec<Option<f64>>]) -> Vec<Option<f64>> {
    let Some(first) = per_benchmark.first() else {
        return Vec::new();
    };
    let mut defined = Vec::with_capacity(per_benchmark.len());
    (0..first.len())
        .map(|c| {
            defined.clear();
            defined.extend(per_benchmark.iter().filter_map(|b| b[c]));
            anchored_mean(&defined)
        })
        .collect()
}

pub fn cross_benchmark_performance(suite: &SuiteIndex) -> Result<Vec<Option<f64>>, MetricsError> {
    SuiteTotals::compute(suite, None).cross_performance()
}

/// Mean computed relative to the minimum so equal inputs reproduce exactly,
/// clamped to the input range.
fn anchored_mean(values: &[f64]) -> Option<f64> {
    let (&first, rest) = values.split_first()?;
    let (lo, hi) = rest
        .iter()
        .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let excess: f64 = values.iter().map(|v| v - lo).sum();
    Some((lo + excess / values.len() as f64).clamp(lo, hi))
}

/// Percentile of sorted data with linear interpolation between closest ranks.
pub fn percentile_sorted(sorted: &[f64], pct: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let (a, b) = (sorted[lo], sorted[hi]);
    (a + (b - a) * (rank - lo as f64)).clamp(a, b)
}

/// Median of `values` (mean of the two middle values for even counts).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

/// Missing below epsilon; among the rest, at or below the lower percentile is
/// underrepresented and at or above the upper one overrepresented. A value
/// meeting both conditions is underrepresented.
pub fn classify_coverage(values: &[f64], config: &AnalysisConfig) -> Classification {
    let mut present: Vec<f64> = values.iter().copied().filter(|&x| x >= config.epsilon).collect();
    if present.is_empty() {
        return Classification {
            classes: vec![CoverageClass::Missing; values.len()],
            thresholds: None,
        };
    }
    present.sort_by(f64::total_cmp);
    let thresholds = DecileThresholds {
        p_under: percentile_sorted(&present, config.under_percentile),
        p_over: percentile_sorted(&present, config.over_percentile),
    };
    let classes = values
        .iter()
        .map(|&x| {
            if x < config.epsilon {
                CoverageClass::Missing
            } else if x <= thresholds.p_under {
                CoverageClass::Underrepresented
            } else if x >= thresholds.p_over {
                CoverageClass::Overrepresented
            } else {
                CoverageClass::Mid
            }
        })
        .collect();
    Classification {
        classes,
        thresholds: Some(thresholds),
    }
}

/// Concepts whose cross-benchmark performance is defined and below epsilon.
pub fn model_gaps(
    dictionary: &ConceptDictionary,
    x_model: &[Option<f64>],
    config: &AnalysisConfig,
) -> BTreeSet<ConceptId> {
    dictionary
        .ids()
        .zip(x_model)
        .filter(|(_, x)| x.is_some_and(|x| x < config.epsilon))
        .map(|(id, _)| id)
        .collect()
}

fn jaccard(a: &[bool], b: &[bool]) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Overlap from precomputed coverage; a concept is covered by a benchmark
/// when its coverage is at least epsilon.
pub fn overlap_from_coverage(names: &[String], per_benchmark: &[Vec<f64>], epsilon: f64) -> OverlapMatrix {
    let covered: Vec<Vec<bool>> = per_benchmark
        .iter()
        .map(|chi| chi.iter().map(|&x| x >= epsilon).collect())
        .collect();
    let n = covered.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = jaccard(&covered[i], &covered[j]);
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    OverlapMatrix {
        benchmarks: names.to_vec(),
        values,
    }
}

pub fn coverage_overlap(suite: &SuiteIndex, config: &AnalysisConfig) -> Result<OverlapMatrix, MetricsError> {
    let per = SuiteTotals::compute(suite, None).per_benchmark_coverage()?;
    Ok(overlap_from_coverage(&suite.benchmark_names(), &per, config.epsilon))
}

/// Everything computed by one analysis run. Per-concept vectors follow
/// `concepts`; per-benchmark rows follow `benchmarks`. Undefined performance
/// values are `None` (serialized as null).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub config: AnalysisConfig,
    pub concepts: Vec<ConceptId>,
    pub benchmarks: Vec<String>,
    pub per_benchmark_coverage: Vec<Vec<f64>>,
    pub cross_coverage: Vec<f64>,
    pub per_benchmark_performance: Vec<Vec<Option<f64>>>,
    pub cross_performance: Vec<Option<f64>>,
    pub coverage_class: Vec<CoverageClass>,
    pub per_benchmark_coverage_class: Vec<Vec<CoverageClass>>,
    pub model_gaps: BTreeSet<ConceptId>,
    pub thresholds: Option<DecileThresholds>,
    pub per_benchmark_thresholds: Vec<Option<DecileThresholds>>,
    pub overlap: OverlapMatrix,
}

impl AnalysisResult {
    pub fn concept_index(&self, id: ConceptId) -> Option<usize> {
        self.concepts.binary_search(&id).ok()
    }

    pub fn benchmark_index(&self, name: &str) -> Option<usize> {
        self.benchmarks.iter().position(|b| b == name)
    }

    /// Concept ids with the given cross-benchmark class, ascending.
    pub fn concepts_in_class(&self, class: CoverageClass) -> Vec<ConceptId> {
        self.concepts
            .iter()
            .zip(&self.coverage_class)
            .filter(|(_, &c)| c == class)
            .map(|(&id, _)| id)
            .collect()
    }

    pub fn is_model_gap(&self, id: ConceptId) -> bool {
        self.model_gaps.contains(&id)
    }
}

/// Runs the full analysis. Every benchmark must be scored.
pub fn analyze(suite: &SuiteIndex, config: &AnalysisConfig) -> Result<AnalysisResult, MetricsError> {
    config.validate()?;
    if let Some(b) = suite.benchmarks().iter().find(|b| !b.scored) {
        return Err(MetricsError::UnscoredBenchmark(b.name.clone()));
    }
    let totals = SuiteTotals::compute(suite, None);
    let per_benchmark_coverage = totals.per_benchmark_coverage()?;
    let per_benchmark_performance = totals.per_benchmark_performance()?;
    let cross_coverage = cross_coverage_from(&per_benchmark_coverage);
    let cross_performance = cross_performance_from(&per_benchmark_performance);

    let cross = classify_coverage(&cross_coverage, config);
    let (per_benchmark_coverage_class, per_benchmark_thresholds) = per_benchmark_coverage
        .iter()
        .map(|chi| {
            let c = classify_coverage(chi, config);
            (c.classes, c.thresholds)
        })
        .unzip();
    let dictionary = suite.dictionary();
    let names = suite.benchmark_names();
    Ok(AnalysisResult {
        config: *config,
        concepts: dictionary.ids().collect(),
        model_gaps: model_gaps(dictionary, &cross_performance, config),
        overlap: overlap_from_coverage(&names, &per_benchmark_coverage, config.epsilon),
        benchmarks: names,
        per_benchmark_coverage,
        cross_coverage,
        per_benchmark_performance,
        cross_performance,
        coverage_class: cross.classes,
        per_benchmark_coverage_class,
        thresholds: cross.thresholds,
        per_benchmark_thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_suite, Concept, Provenance};

    fn dict(n: u32) -> ConceptDictionary {
        let concepts = (0..n).map(|id| Concept { id, label: String::new() }).collect();
        ConceptDictionary::new("sae", "model", concepts).unwrap()
    }

    fn rec(bench: &str, id: &str, len: u64, acts: &[(ConceptId, f64)], score: f64) -> ActivationRecord {
        ActivationRecord {
            benchmark: bench.into(),
            datapoint_id: id.into(),
            token_count: len,
            score: Some(score),
            provenance: Provenance::PromptOnly,
            activations: acts.iter().copied().collect(),
        }
    }

    fn suite(n: u32, records: Vec<ActivationRecord>) -> SuiteIndex {
        build_suite(dict(n), records, &AnalysisConfig::default()).unwrap()
    }

    #[test]
    fn normalized_activation_cases() {
        let r = rec("b", "1", 4, &[(0, 12.0)], 1.0);
        assert_eq!(normalized_activation(&r, 0), 3.0);
        assert_eq!(normalized_activation(&r, 1), 0.0);
        let doubled = rec("b", "1", 8, &[(0, 24.0)], 1.0);
        assert_eq!(normalized_activation(&doubled, 0), 3.0);
    }

    #[test]
    fn coverage_worked_example() {
        // concepts c1, c2, c3 -> ids 0, 1, 2
        let s = suite(
            3,
            vec![
                rec("b", "dp1", 1, &[(0, 2.0), (2, 1.0)], 1.0),
                rec("b", "dp2", 1, &[(0, 1.0)], 0.0),
            ],
        );
        assert_eq!(benchmark_coverage(&s, "b").unwrap(), vec![2.25, 0.0, 0.75]);
    }

    #[test]
    fn single_concept_coverage_is_one() {
        let s = suite(1, vec![rec("b", "1", 3, &[(0, 7.3)], 1.0), rec("b", "2", 5, &[(0, 0.1)], 1.0)]);
        assert_eq!(benchmark_coverage(&s, "b").unwrap(), vec![1.0]);
    }

    #[test]
    fn all_zero_benchmark_is_an_error() {
        let s = suite(2, vec![rec("b", "1", 3, &[], 1.0)]);
        assert_eq!(
            benchmark_coverage(&s, "b"),
            Err(MetricsError::AllZeroBenchmark("b".into()))
        );
        assert!(matches!(
            benchmark_coverage(&s, "nope"),
            Err(MetricsError::UnknownBenchmark(_))
        ));
    }

    #[test]
    fn cross_coverage_uses_full_benchmark_count() {
        assert_eq!(cross_coverage_from(&[vec![2.25], vec![0.5]]), vec![1.375]);
        assert_eq!(cross_coverage_from(&[vec![2.25], vec![0.0]]), vec![1.125]);
        assert_eq!(cross_coverage_from(&[vec![0.0], vec![0.0]]), vec![0.0]);
    }

    #[test]
    fn performance_worked_example() {
        let s = suite(
            2,
            vec![rec("b", "dp1", 1, &[(0, 2.0)], 1.0), rec("b", "dp2", 1, &[(0, 1.0), (1, 1.0)], 0.0)],
        );
        let perf = benchmark_performance(&s, "b").unwrap();
        assert!((perf[0].unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(perf[1], Some(0.0));
    }

    #[test]
    fn single_record_performance_and_undefined() {
        let s = suite(2, vec![rec("b", "dp1", 2, &[(0, 2.0)], 1.0), rec("b", "dp2", 2, &[], 0.0)]);
        assert_eq!(benchmark_performance(&s, "b").unwrap(), vec![Some(1.0), None]);
    }

    #[test]
    fn unscored_benchmark_rejected() {
        let mut r = rec("b", "1", 1, &[(0, 1.0)], 0.5);
        r.score = None;
        let s = suite(1, vec![r]);
        assert!(matches!(
            benchmark_performance(&s, "b"),
            Err(MetricsError::UnscoredBenchmark(_))
        ));
        assert!(matches!(analyze(&s, &AnalysisConfig::default()), Err(MetricsError::UnscoredBenchmark(_))));
    }

    #[test]
    fn cross_performance_means_over_defined() {
        let per = vec![vec![Some(0.4)], vec![None], vec![Some(0.8)]];
        let x = cross_performance_from(&per)[0].unwrap();
        assert!((x - 0.6).abs() < 1e-15);
        assert_eq!(cross_performance_from(&[vec![None], vec![None]]), vec![None]);
    }

    #[test]
    fn constant_scores_are_exact() {
        let m = 0.3;
        let s = suite(
            3,
            vec![
                rec("a", "1", 3, &[(0, 0.7), (1, 1.9)], m),
                rec("a", "2", 7, &[(0, 0.2), (2, 5.1)], m),
                rec("b", "1", 11, &[(0, 3.3)], m),
            ],
        );
        let x = cross_benchmark_performance(&s).unwrap();
        assert_eq!(x, vec![Some(m), Some(m), Some(m)]);
    }

    #[test]
    fn anchored_mean_of_repeated_value_is_exact() {
        assert_eq!(anchored_mean(&[0.1, 0.1, 0.1]), Some(0.1));
        assert_eq!(anchored_mean(&[]), None);
    }

    #[test]
    fn percentile_interpolates() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!((percentile_sorted(&v, 10.0) - 1.9).abs() < 1e-12);
        assert!((percentile_sorted(&v, 90.0) - 9.1).abs() < 1e-12);
        assert_eq!(percentile_sorted(&[4.0], 10.0), 4.0);
    }

    #[test]
    fn classify_ten_distinct() {
        let cfg = AnalysisConfig::default();
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let c = classify_coverage(&x, &cfg);
        assert_eq!(c.classes.iter().filter(|&&k| k == CoverageClass::Underrepresented).count(), 1);
        assert_eq!(c.classes.iter().filter(|&&k| k == CoverageClass::Overrepresented).count(), 1);
        assert_eq!(c.classes[0], CoverageClass::Underrepresented);
        assert_eq!(c.classes[9], CoverageClass::Overrepresented);
    }

    #[test]
    fn classify_missing_and_degenerate() {
        let cfg = AnalysisConfig::default();
        let c = classify_coverage(&[0.0, 2.0, 2.0, 2.0], &cfg);
        assert_eq!(c.classes[0], CoverageClass::Missing);
        assert!(c.classes[1..].iter().all(|&k| k == CoverageClass::Underrepresented));
        assert_eq!(c.thresholds, Some(DecileThresholds { p_under: 2.0, p_over: 2.0 }));

        let all_missing = classify_coverage(&[0.0, 0.001], &cfg);
        assert_eq!(all_missing.thresholds, None);
        assert!(all_missing.classes.iter().all(|&k| k == CoverageClass::Missing));
    }

    #[test]
    fn model_gap_rules() {
        let cfg = AnalysisConfig::default();
        let gaps = model_gaps(&dict(3), &[Some(0.0), Some(0.5), None], &cfg);
        assert_eq!(gaps.into_iter().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn overlap_cases() {
        let names = vec!["a".to_string(), "b".to_string()];
        let eps = 0.5;
        // S(a) = {1,2,3}, S(b) = {2,3,4}
        let m = overlap_from_coverage(
            &names,
            &[vec![0.0, 1.0, 1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0, 1.0, 1.0]],
            eps,
        );
        assert_eq!(m.values, vec![vec![1.0, 0.5], vec![0.5, 1.0]]);
        let disjoint = overlap_from_coverage(&names, &[vec![1.0, 0.0], vec![0.0, 1.0]], eps);
        assert_eq!(disjoint.values[0][1], 0.0);
        let same = overlap_from_coverage(&names, &[vec![1.0, 2.0], vec![1.0, 2.0]], eps);
        assert_eq!(same.values[0][1], 1.0);
        let empty = overlap_from_coverage(&names, &[vec![0.0], vec![0.0]], eps);
        assert_eq!(empty.values, vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn masked_totals_ignore_removed_records() {
        let s = suite(2, vec![rec("b", "1", 1, &[(0, 1.0)], 1.0), rec("b", "2", 1, &[(0, 1.0), (1, 1.0)], 0.0)]);
        let mut mask = RecordMask::keep_all(&s);
        mask.remove(RecordRef { benchmark: 0, record: 1 });
        let t = SuiteTotals::compute(&s, Some(&mask));
        assert_eq!(t.benchmarks()[0].kept(), 1);
        assert_eq!(t.cross_performance().unwrap(), vec![Some(1.0), None]);
        assert_eq!(mask.removed_count(), 1);
    }
}
