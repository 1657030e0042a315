// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic suites with planted structure, for tests and demos.
//!
//! Every record draws its background activations from a uniform
//! distribution masked by Bernoulli(`sparsity`) over the unplanted concepts.
//! A quarter of the records are themed on the planted-high concepts and a
//! quarter on the planted-low ones (when those sets are non-empty); themed
//! records carry most of their activation mass on one to three planted
//! concepts and receive scores near 1 (high) or near 0 (low). Planted-missing
//! concepts never activate. Record `i` also activates background concept
//! `i mod |background|`, so with at least that many records every unplanted
//! concept is covered.
//!
//! Each record is generated from its own ChaCha stream keyed by its position,
//! so output depends only on the [`SyntheticSpec`].

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ActivationRecord, Concept, ConceptDictionary, ConceptId, Provenance, SparseActivations};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_benchmarks: usize,
    pub n_concepts: usize,
    pub n_records_per_benchmark: usize,
    pub sparsity: f64,
    #[serde(default)]
    pub planted_high_concepts: BTreeSet<ConceptId>,
    #[serde(default)]
    pub planted_low_concepts: BTreeSet<ConceptId>,
    #[serde(default)]
    pub planted_missing_concepts: BTreeSet<ConceptId>,
    pub seed: u64,
    /// Draw every score from {0, 1}: themed records get exactly 1 or 0 and the
    /// rest a fair coin. Otherwise scores are continuous.
    #[serde(default)]
    pub binary_scores: bool,
}

impl SyntheticSpec {
    pub fn new(n_benchmarks: usize, n_concepts: usize, n_records_per_benchmark: usize) -> Self {
        Self {
            n_benchmarks,
            n_concepts,
            n_records_per_benchmark,
            sparsity: 0.05,
            planted_high_concepts: BTreeSet::new(),
            planted_low_concepts: BTreeSet::new(),
            planted_missing_concepts: BTreeSet::new(),
            seed: 0,
            binary_scores: false,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: String| Err(SynthError::SpecInvalid(m));
        if self.n_benchmarks == 0 || self.n_concepts == 0 || self.n_records_per_benchmark == 0 {
            return fail("n_benchmarks, n_concepts and n_records_per_benchmark must be positive".into());
        }
        if self.n_concepts > ConceptId::MAX as usize {
            return fail(format!("n_concepts {} exceeds the concept id range", self.n_concepts));
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return fail(format!("sparsity must lie in (0, 1], got {}", self.sparsity));
        }
        let sets = [
            ("planted_high_concepts", &self.planted_high_concepts),
            ("planted_low_concepts", &self.planted_low_concepts),
            ("planted_missing_concepts", &self.planted_missing_concepts),
        ];
        for (name, set) in sets {
            if let Some(&c) = set.iter().find(|&&c| c as usize >= self.n_concepts) {
                return fail(format!("{name} contains {c}, outside [0, {})", self.n_concepts));
            }
        }
        for i in 0..sets.len() {
            for j in i + 1..sets.len() {
                if let Some(c) = sets[i].1.intersection(sets[j].1).next() {
                    return fail(format!("concept {c} is in both {} and {}", sets[i].0, sets[j].0));
                }
            }
        }
        if self.planted_missing_concepts.len() == self.n_concepts {
            return fail("every concept is planted missing; nothing can activate".into());
        }
        Ok(())
    }

    fn benchmark_name(&self, b: usize) -> String {
        let width = digits(self.n_benchmarks.saturating_sub(1)).max(2);
        format!("bench-{b:0width$}")
    }

    fn datapoint_id(&self, r: usize) -> String {
        let width = digits(self.n_records_per_benchmark.saturating_sub(1)).max(6);
        format!("dp-{r:0width$}")
    }
}

fn digits(n: usize) -> usize {
    n.checked_ilog10().map_or(1, |d| d as usize + 1)
}

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    SpecInvalid(String),
}

/// Lazily generated records in canonical order (benchmark, then datapoint).
#[derive(Debug, Clone)]
pub struct SyntheticRecords {
    spec: SyntheticSpec,
    background: Vec<ConceptId>,
    high: Vec<ConceptId>,
    low: Vec<ConceptId>,
    next: usize,
}

#[derive(Clone, Copy)]
enum Theme {
    High,
    Low,
    Neutral,
}

impl SyntheticRecords {
    pub fn benchmark_names(&self) -> Vec<String> {
        (0..self.spec.n_benchmarks).map(|b| self.spec.benchmark_name(b)).collect()
    }

    fn total(&self) -> usize {
        self.spec.n_benchmarks * self.spec.n_records_per_benchmark
    }

    /// Generates the record at linear position `index`.
    pub fn record(&self, index: usize) -> ActivationRecord {
        let spec = &self.spec;
        let (b, r) = (index / spec.n_records_per_benchmark, index % spec.n_records_per_benchmark);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(index as u64);

        let token_count: u64 = rng.random_range(8..=256);
        let len = token_count as f64;
        // Activations are quantized to 1e-3 in summed units to keep files compact.
        let quantize = |normalized: f64| (normalized * len * 1000.0).round().max(1.0) / 1000.0;

        let mut pairs: Vec<(ConceptId, f64)> = Vec::new();
        // Geometric skipping samples the Bernoulli mask in O(active) time.
        let p = spec.sparsity;
        let mut i = 0usize;
        while i < self.background.len() {
            if p < 1.0 {
                let u: f64 = 1.0 - rng.random::<f64>();
                let skip = (u.ln() / (1.0 - p).ln()).floor();
                if skip >= (self.background.len() - i) as f64 {
                    break;
                }
                i += skip as usize;
            }
            let value = 1.0 - rng.random::<f64>();
            pairs.push((self.background[i], quantize(value)));
            i += 1;
        }

        // Cycling one extra background concept per record means every unplanted
        // concept activates once there are at least as many records as concepts.
        if !self.background.is_empty() {
            let anchor = self.background[index % self.background.len()];
            if !pairs.iter().any(|&(c, _)| c == anchor) {
                pairs.push((anchor, quantize(1.0 - rng.random::<f64>())));
            }
        }

        let draw: f64 = rng.random();
        let theme = if draw < 0.25 && !self.high.is_empty() {
            Theme::High
        } else if (0.25..0.5).contains(&draw) && !self.low.is_empty() {
            Theme::Low
        } else {
            Theme::Neutral
        };
        let themed = match theme {
            Theme::High => Some(&self.high),
            Theme::Low => Some(&self.low),
            Theme::Neutral => None,
        };
        if let Some(set) = themed {
            let background_mass = 0.5 * p * self.background.len() as f64;
            let strength = background_mass.max(1.0);
            let k = rng.random_range(1..=set.len().min(3));
            for &c in set.choose_multiple(&mut rng, k) {
                let value = strength * rng.random_range(1.0..2.0);
                pairs.push((c, quantize(value)));
            }
        } else if pairs.is_empty() {
            if let Some(&c) = self.background.choose(&mut rng) {
                pairs.push((c, quantize(1.0 - rng.random::<f64>())));
            }
        }

        let u: f64 = rng.random();
        let score = match (theme, spec.binary_scores) {
            (Theme::High, true) => 1.0,
            (Theme::Low, true) => 0.0,
            (Theme::Neutral, true) => f64::from(u8::from(u < 0.5)),
            (Theme::High, false) => 1.0 - (u * 100.0).round() / 1000.0,
            (Theme::Low, false) => (u * 100.0).round() / 1000.0,
            (Theme::Neutral, false) => (u * 1000.0).round() / 1000.0,
        };

        ActivationRecord {
            benchmark: spec.benchmark_name(b),
            datapoint_id: spec.datapoint_id(r),
            token_count,
            score: Some(score),
            provenance: Provenance::PromptOnly,
            activations: SparseActivations::from_pairs(pairs),
        }
    }
}

impl Iterator for SyntheticRecords {
    type Item = ActivationRecord;

    fn next(&mut self) -> Option<ActivationRecord> {
        if self.next >= self.total() {
            return None;
        }
        let record = self.record(self.next);
        self.next += 1;
        Some(record)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.total() - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for SyntheticRecords {}

/// Builds the dictionary and the record stream described by `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(ConceptDictionary, SyntheticRecords), SynthError> {
    spec.validate()?;
    let n = spec.n_concepts as ConceptId;
    let concepts = (0..n)
        .map(|id| {
            let tag = if spec.planted_high_concepts.contains(&id) {
                " (planted high)"
            } else if spec.planted_low_concepts.contains(&id) {
                " (planted low)"
            } else if spec.planted_missing_concepts.contains(&id) {
                " (planted missing)"
            } else {
                ""
            };
            Concept {
                id,
                label: format!("synthetic concept {id}{tag}"),
            }
        })
        .collect();
    let dictionary = ConceptDictionary::new("synthetic-sae", "synthetic-model", concepts)
        .expect("synthetic ids are unique and non-empty");
    let planted = |c: &ConceptId| {
        spec.planted_high_concepts.contains(c)
            || spec.planted_low_concepts.contains(c)
            || spec.planted_missing_concepts.contains(c)
    };
    let records = SyntheticRecords {
        spec: spec.clone(),
        background: (0..n).filter(|c| !planted(c)).collect(),
        high: spec.planted_high_concepts.iter().copied().collect(),
        low: spec.planted_low_concepts.iter().copied().collect(),
        next: 0,
    };
    Ok((dictionary, records))
}
