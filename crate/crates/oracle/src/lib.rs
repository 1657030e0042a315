// SPDX-License-Identifier: Apache-2.0

//! Dense brute-force reference implementation used only by tests.
//!
//! Everything is computed from a full `benchmark × record × concept` matrix
//! with the textbook formulas and no shortcuts, so it shares no code paths
//! with `cgaps-core` beyond the plain data types.

pub mod checks;

use std::collections::{BTreeMap, BTreeSet};

use cgaps_core::metrics::{DecileThresholds, OverlapMatrix};
use cgaps_core::{
    ActivationRecord, AnalysisConfig, AnalysisResult, Concept, ConceptDictionary, ConceptId, CoverageClass,
    Provenance, SparseActivations,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct DenseBenchmark {
    pub name: String,
    pub datapoints: Vec<String>,
    pub scores: Vec<Option<f64>>,
    /// `normalized[i][c]`: activation of concept position `c` on record `i`
    /// divided by the record's token count.
    pub normalized: Vec<Vec<f64>>,
}

pub struct DenseSuite {
    pub concepts: Vec<ConceptId>,
    pub benchmarks: Vec<DenseBenchmark>,
}

impl DenseSuite {
    /// Records of unknown concepts are ignored.
    pub fn new(dictionary: &ConceptDictionary, records: &[ActivationRecord]) -> Self {
        let concepts: Vec<ConceptId> = dictionary.concepts().iter().map(|c| c.id).collect();
        let mut by_name: BTreeMap<&str, Vec<&ActivationRecord>> = BTreeMap::new();
        for r in records {
            by_name.entry(r.benchmark.as_str()).or_default().push(r);
        }
        let benchmarks = by_name
            .into_iter()
            .map(|(name, mut recs)| {
                recs.sort_by(|a, b| a.datapoint_id.cmp(&b.datapoint_id));
                DenseBenchmark {
                    name: name.to_string(),
                    datapoints: recs.iter().map(|r| r.datapoint_id.clone()).collect(),
                    scores: recs.iter().map(|r| r.score).collect(),
                    normalized: recs
                        .iter()
                        .map(|r| {
                            concepts
                                .iter()
                                .map(|&c| {
                                    let raw = r
                                        .activations
                                        .iter()
                                        .find(|&(id, _)| id == c)
                                        .map_or(0.0, |(_, v)| v);
                                    raw / r.token_count as f64
                                })
                                .collect()
                        })
                        .collect(),
                }
            })
            .collect();
        Self { concepts, benchmarks }
    }

    /// Drops the `(benchmark, datapoint_id)` pairs in `removed`.
    pub fn without(mut self, removed: &BTreeSet<(String, String)>) -> Self {
        for b in &mut self.benchmarks {
            let rows: Vec<_> = std::mem::take(&mut b.datapoints)
                .into_iter()
                .zip(std::mem::take(&mut b.scores))
                .zip(std::mem::take(&mut b.normalized))
                .collect();
            for ((d, score), row) in rows {
                if !removed.contains(&(b.name.clone(), d.clone())) {
                    b.datapoints.push(d);
                    b.scores.push(score);
                    b.normalized.push(row);
                }
            }
        }
        self
    }

    fn totals(&self, b: usize) -> Vec<f64> {
        let bench = &self.benchmarks[b];
        (0..self.concepts.len())
            .map(|c| bench.normalized.iter().map(|row| row[c]).sum())
            .collect()
    }

    /// `chi_bench[b][c]`.
    pub fn chi_bench(&self) -> Vec<Vec<f64>> {
        (0..self.benchmarks.len())
            .map(|b| {
                let totals = self.totals(b);
                let mean = totals.iter().sum::<f64>() / totals.len() as f64;
                totals.iter().map(|t| t / mean).collect()
            })
            .collect()
    }

    pub fn x_bench(&self) -> Vec<f64> {
        let chi = self.chi_bench();
        (0..self.concepts.len())
            .map(|c| chi.iter().map(|row| row[c]).sum::<f64>() / chi.len() as f64)
            .collect()
    }

    /// `chi_model[b][c]`, `None` where the concept never activates in `b`.
    pub fn chi_model(&self) -> Vec<Vec<Option<f64>>> {
        self.benchmarks
            .iter()
            .map(|bench| {
                (0..self.concepts.len())
                    .map(|c| {
                        let mut num = 0.0;
                        let mut den = 0.0;
                        for (row, score) in bench.normalized.iter().zip(&bench.scores) {
                            num += score.expect("scored record") * row[c];
                            den += row[c];
                        }
                        (den > 0.0).then(|| num / den)
                    })
                    .collect()
            })
            .collect()
    }

    pub fn x_model(&self) -> Vec<Option<f64>> {
        let chi = self.chi_model();
        (0..self.concepts.len())
            .map(|c| {
                let defined: Vec<f64> = chi.iter().filter_map(|row| row[c]).collect();
                (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
            })
            .collect()
    }
}

/// Linear interpolation between closest ranks over ascending `sorted`.
pub fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let rank = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(percentile(&v, 50.0))
}

pub fn classify(values: &[f64], config: &AnalysisConfig) -> (Vec<CoverageClass>, Option<DecileThresholds>) {
    let mut present: Vec<f64> = values.iter().copied().filter(|&x| x >= config.epsilon).collect();
    if present.is_empty() {
        return (vec![CoverageClass::Missing; values.len()], None);
    }
    present.sort_by(f64::total_cmp);
    let p_under = percentile(&present, config.under_percentile);
    let p_over = percentile(&present, config.over_percentile);
    let classes = values
        .iter()
        .map(|&x| {
            if x < config.epsilon {
                CoverageClass::Missing
            } else if x <= p_under {
                CoverageClass::Underrepresented
            } else if x >= p_over {
                CoverageClass::Overrepresented
            } else {
                CoverageClass::Mid
            }
        })
        .collect();
    (classes, Some(DecileThresholds { p_under, p_over }))
}

pub fn jaccard(a: &BTreeSet<ConceptId>, b: &BTreeSet<ConceptId>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

pub fn overlap(concepts: &[ConceptId], names: &[String], chi_bench: &[Vec<f64>], epsilon: f64) -> OverlapMatrix {
    let sets: Vec<BTreeSet<ConceptId>> = chi_bench
        .iter()
        .map(|row| {
            concepts
                .iter()
                .zip(row)
                .filter(|(_, &x)| x >= epsilon)
                .map(|(&c, _)| c)
                .collect()
        })
        .collect();
    OverlapMatrix {
        benchmarks: names.to_vec(),
        values: sets.iter().map(|a| sets.iter().map(|b| jaccard(a, b)).collect()).collect(),
    }
}

/// Two-pass population standard deviation.
pub fn population_std(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Some((values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt())
}

/// Median of the defined cross-benchmark performance values.
pub fn median_x_model(suite: &DenseSuite) -> Option<f64> {
    let defined: Vec<f64> = suite.x_model().into_iter().flatten().collect();
    median(&defined)
}

/// Full analysis computed densely.
pub fn analyze(dictionary: &ConceptDictionary, records: &[ActivationRecord], config: &AnalysisConfig) -> AnalysisResult {
    let dense = DenseSuite::new(dictionary, records);
    let names: Vec<String> = dense.benchmarks.iter().map(|b| b.name.clone()).collect();
    let chi_bench = dense.chi_bench();
    let x_bench = dense.x_bench();
    let chi_model = dense.chi_model();
    let x_model = dense.x_model();
    let (coverage_class, thresholds) = classify(&x_bench, config);
    let (per_class, per_thresholds): (Vec<_>, Vec<_>) = chi_bench.iter().map(|row| classify(row, config)).unzip();
    let model_gaps = dense
        .concepts
        .iter()
        .zip(&x_model)
        .filter(|(_, x)| matches!(x, Some(v) if *v < config.epsilon))
        .map(|(&c, _)| c)
        .collect();
    AnalysisResult {
        config: *config,
        overlap: overlap(&dense.concepts, &names, &chi_bench, config.epsilon),
        concepts: dense.concepts,
        benchmarks: names,
        per_benchmark_coverage: chi_bench,
        cross_coverage: x_bench,
        per_benchmark_performance: chi_model,
        cross_performance: x_model,
        coverage_class,
        per_benchmark_coverage_class: per_class,
        model_gaps,
        thresholds,
        per_benchmark_thresholds: per_thresholds,
    }
}

pub struct RandomSuite {
    pub dictionary: ConceptDictionary,
    pub records: Vec<ActivationRecord>,
}

#[derive(Debug, Clone, Copy)]
pub struct RandomSuiteBounds {
    pub max_benchmarks: usize,
    pub max_concepts: usize,
    pub max_records: usize,
}

impl Default for RandomSuiteBounds {
    fn default() -> Self {
        Self {
            max_benchmarks: 5,
            max_concepts: 50,
            max_records: 200,
        }
    }
}

/// A scored random suite within `bounds`. Every benchmark has at least one
/// activation; some concepts are never active and some concepts are active
/// in only part of the suite.
pub fn random_suite(seed: u64, bounds: RandomSuiteBounds) -> RandomSuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_bench = rng.random_range(1..=bounds.max_benchmarks);
    let n_concepts = rng.random_range(1..=bounds.max_concepts);
    let ids: Vec<ConceptId> = if rng.random_bool(0.5) {
        (0..n_concepts as ConceptId).collect()
    } else {
        let mut set = BTreeSet::new();
        while set.len() < n_concepts {
            set.insert(rng.random_range(0..100_000));
        }
        set.into_iter().collect()
    };
    let dictionary = ConceptDictionary::new(
        "random-sae",
        "random-model",
        ids.iter()
            .map(|&id| Concept {
                id,
                label: format!("random concept {id}"),
            })
            .collect(),
    )
    .expect("valid dictionary");

    let dead: BTreeSet<ConceptId> = ids
        .iter()
        .copied()
        .filter(|_| rng.random_bool(0.15))
        .collect();
    let mut records = Vec::new();
    for b in 0..n_bench {
        let name = format!("bench-{b}");
        let n_records = rng.random_range(1..=bounds.max_records);
        let density = rng.random_range(0.02..0.5);
        let score_mode = rng.random_range(0..3);
        let off: BTreeSet<ConceptId> = ids.iter().copied().filter(|_| rng.random_bool(0.2)).collect();
        let live: Vec<ConceptId> = ids
            .iter()
            .copied()
            .filter(|c| !dead.contains(c) && !off.contains(c))
            .collect();
        for i in 0..n_records {
            let mut pairs: Vec<(ConceptId, f64)> = Vec::new();
            for &c in &live {
                if rng.random_bool(density) {
                    pairs.push((c, rng.random_range(0.001..20.0)));
                }
            }
            if i == 0 && pairs.is_empty() {
                let c = if live.is_empty() {
                    ids[rng.random_range(0..ids.len())]
                } else {
                    live[rng.random_range(0..live.len())]
                };
                pairs.push((c, rng.random_range(0.5..5.0)));
            }
            let score = match score_mode {
                0 => rng.random_range(0.0..=1.0),
                1 => f64::from(u8::from(rng.random_bool(0.5))),
                _ => [0.0, 0.5, 1.0][rng.random_range(0..3)],
            };
            records.push(ActivationRecord {
                benchmark: name.clone(),
                datapoint_id: format!("dp-{i:04}"),
                token_count: rng.random_range(1..=512),
                score: Some(score),
                provenance: Provenance::PromptOnly,
                activations: SparseActivations::from_pairs(pairs),
            });
        }
    }
    RandomSuite { dictionary, records }
}

/// `|a - b| <= tol * max(|a|, |b|)`, with exact equality accepted.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

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

    fn dict(n: u32) -> ConceptDictionary {
        ConceptDictionary::new("s", "m", (1..=n).map(|id| Concept { id, label: String::new() }).collect()).unwrap()
    }

    #[test]
    fn hand_worked_coverage() {
        let records = vec![rec("b", "1", 1, 1.0, &[(1, 2.0), (3, 1.0)]), rec("b", "2", 1, 0.0, &[(1, 1.0)])];
        let d = DenseSuite::new(&dict(3), &records);
        assert_eq!(d.chi_bench(), vec![vec![2.25, 0.0, 0.75]]);
        let chi_model = d.chi_model();
        assert!(close(chi_model[0][0].unwrap(), 2.0 / 3.0, 1e-15));
        assert_eq!(chi_model[0][1], None);
    }

    #[test]
    fn percentile_matches_linear_rule() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!(close(percentile(&v, 10.0), 1.9, 1e-15));
        assert!(close(percentile(&v, 90.0), 9.1, 1e-15));
        assert_eq!(percentile(&[3.0], 10.0), 3.0);
    }

    #[test]
    fn jaccard_half() {
        let a = BTreeSet::from([1, 2, 3]);
        let b = BTreeSet::from([2, 3, 4]);
        assert_eq!(jaccard(&a, &b), 0.5);
        assert_eq!(jaccard(&BTreeSet::new(), &BTreeSet::new()), 1.0);
    }

    #[test]
    fn random_suites_are_valid_and_reproducible() {
        for seed in 0..20 {
            let s = random_suite(seed, RandomSuiteBounds::default());
            let config = AnalysisConfig::default();
            cgaps_core::build_suite(s.dictionary.clone(), s.records.clone(), &config).unwrap();
            assert_eq!(random_suite(seed, RandomSuiteBounds::default()).records, s.records);
        }
    }
}
