// SPDX-License-Identifier: Apache-2.0

//! Core data types shared by every stage of the pipeline: the concept
//! dictionary, activation records, the validated suite index and the
//! analysis configuration.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Index of a concept (a sparse autoencoder latent) in the dictionary.
pub type ConceptId = u32;

/// exp(-5), the default threshold below which a score counts as zero.
pub const DEFAULT_EPSILON: f64 = 0.006_737_946_999_085_467;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: ConceptId,
    pub label: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DictionaryError {
    #[error("concept dictionary is empty")]
    Empty,
    #[error("duplicate concept id {0}")]
    DuplicateConceptId(ConceptId),
}

/// The concept space together with its interpretability labels.
///
/// Concepts are held sorted by id; every dense per-concept vector produced by
/// the metrics module is aligned with this order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDictionary")]
pub struct ConceptDictionary {
    sae_id: String,
    model_id: String,
    concepts: Vec<Concept>,
    #[serde(skip)]
    contiguous: bool,
}

#[derive(Deserialize)]
struct RawDictionary {
    sae_id: String,
    model_id: String,
    concepts: Vec<Concept>,
}

impl TryFrom<RawDictionary> for ConceptDictionary {
    type Error = DictionaryError;

    fn try_from(raw: RawDictionary) -> Result<Self, Self::Error> {
        ConceptDictionary::new(raw.sae_id, raw.model_id, raw.concepts)
    }
}

impl ConceptDictionary {
    pub fn new(
        sae_id: impl Into<String>,
        model_id: impl Into<String>,
        mut concepts: Vec<Concept>,
    ) -> Result<Self, DictionaryError> {
        if concepts.is_empty() {
            return Err(DictionaryError::Empty);
        }
        concepts.sort_by_key(|c| c.id);
        if let Some(w) = concepts.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(DictionaryError::DuplicateConceptId(w[0].id));
        }
        let contiguous = concepts.iter().enumerate().all(|(i, c)| c.id as usize == i);
        Ok(Self {
            sae_id: sae_id.into(),
            model_id: model_id.into(),
            concepts,
            contiguous,
        })
    }

    pub fn sae_id(&self) -> &str {
        &self.sae_id
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    /// Always false for a constructed dictionary; provided for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ConceptId> + '_ {
        self.concepts.iter().map(|c| c.id)
    }

    /// Dense position of `id`, or `None` if the dictionary does not know it.
    #[inline]
    pub fn position(&self, id: ConceptId) -> Option<usize> {
        if self.contiguous {
            let i = id as usize;
            (i < self.concepts.len()).then_some(i)
        } else {
            self.concepts.binary_search_by_key(&id, |c| c.id).ok()
        }
    }

    pub fn contains(&self, id: ConceptId) -> bool {
        self.position(id).is_some()
    }

    pub fn label(&self, id: ConceptId) -> Option<&str> {
        self.position(id).map(|i| self.concepts[i].label.as_str())
    }
}

/// Summed per-concept activations of one datapoint, sorted by concept id.
///
/// Exact zeros are never stored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseActivations(Vec<(ConceptId, f64)>);

impl SparseActivations {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from arbitrary pairs. Later duplicates of an id replace earlier ones.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (ConceptId, f64)>) -> Self {
        let map: BTreeMap<ConceptId, f64> = pairs.into_iter().collect();
        Self(map.into_iter().filter(|&(_, v)| v != 0.0).collect())
    }

    pub fn get(&self, id: ConceptId) -> Option<f64> {
        self.0
            .binary_search_by_key(&id, |&(c, _)| c)
            .ok()
            .map(|i| self.0[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ConceptId, f64)> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[(ConceptId, f64)] {
        &self.0
    }

    pub(crate) fn retain(&mut self, f: impl FnMut(&(ConceptId, f64)) -> bool) {
        self.0.retain(f)
    }

    /// Multiplies every value by `k`; zeros stay absent.
    pub fn scaled(&self, k: f64) -> Self {
        Self::from_pairs(self.0.iter().map(|&(c, v)| (c, v * k)))
    }
}

impl FromIterator<(ConceptId, f64)> for SparseActivations {
    fn from_iter<T: IntoIterator<Item = (ConceptId, f64)>>(iter: T) -> Self {
        Self::from_pairs(iter)
    }
}

impl Serialize for SparseActivations {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (id, value) in &self.0 {
            map.serialize_entry(&id.to_string(), value)?;
        }
        map.end()
    }
}

/// Map key holding a concept id written as a decimal string.
struct ConceptKey(ConceptId);

impl<'de> Deserialize<'de> for ConceptKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct KeyVisitor;

        impl Visitor<'_> for KeyVisitor {
            type Value = ConceptKey;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a decimal concept id")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<ConceptKey, E> {
                v.parse()
                    .map(ConceptKey)
                    .map_err(|_| E::custom(format!("invalid concept id key {v:?}")))
            }
        }

        deserializer.deserialize_str(KeyVisitor)
    }
}

impl<'de> Deserialize<'de> for SparseActivations {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct MapVisitor;

        impl<'de> Visitor<'de> for MapVisitor {
            type Value = SparseActivations;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of concept id to activation")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut pairs = Vec::with_capacity(access.size_hint().unwrap_or(0));
                let mut sorted = true;
                while let Some(ConceptKey(id)) = access.next_key()? {
                    let value: f64 = access.next_value()?;
                    if let Some(&(prev, _)) = pairs.last() {
                        sorted &= prev < id;
                    }
                    pairs.push((id, value));
                }
                if !sorted {
                    pairs.sort_by_key(|&(id, _)| id);
                    if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
                        return Err(de::Error::custom(format!("duplicate concept id {}", w[0].0)));
                    }
                }
                pairs.retain(|&(_, v)| v != 0.0);
                Ok(SparseActivations(pairs))
            }
        }

        deserializer.deserialize_map(MapVisitor)
    }
}

/// What text the activations were extracted from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    PromptOnly,
    PromptAndResponse,
}

/// One benchmark datapoint: its token count, summed activations and the
/// scoring-policy value in [0, 1] when the benchmark is scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationRecord {
    pub benchmark: String,
    pub datapoint_id: String,
    pub token_count: u64,
    #[serde(default)]
    pub score: Option<f64>,
    #[serde(default)]
    pub provenance: Provenance,
    pub activations: SparseActivations,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub epsilon: f64,
    pub under_percentile: f64,
    pub over_percentile: f64,
    pub strict_concepts: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            under_percentile: 10.0,
            over_percentile: 90.0,
            strict_concepts: true,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("epsilon must be a positive finite number, got {0}")]
    Epsilon(f64),
    #[error("percentiles must satisfy 0 < under < over < 100, got under={under} over={over}")]
    Percentiles { under: f64, over: f64 },
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(ConfigError::Epsilon(self.epsilon));
        }
        let (under, over) = (self.under_percentile, self.over_percentile);
        if !(under > 0.0 && over < 100.0 && under < over) {
            return Err(ConfigError::Percentiles { under, over });
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("token_count must be at least 1")]
    ZeroTokenCount,
    #[error("non-finite value in {field}")]
    NonFiniteValue { field: String },
    #[error("negative activation {value} for concept {concept}")]
    NegativeActivation { concept: ConceptId, value: f64 },
    #[error("score {0} is outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("concept id {0} is not in the dictionary")]
    UnknownConceptId(ConceptId),
}

/// A record that passed validation, and how many unknown concept ids were
/// dropped from it (always zero in strict mode).
#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub record: ActivationRecord,
    pub dropped_unknown: usize,
}

pub fn validate_record(
    mut record: ActivationRecord,
    dictionary: &ConceptDictionary,
    config: &AnalysisConfig,
) -> Result<Validated, ValidationError> {
    if record.token_count == 0 {
        return Err(ValidationError::ZeroTokenCount);
    }
    for (concept, value) in record.activations.iter() {
        if !value.is_finite() {
            return Err(ValidationError::NonFiniteValue {
                field: format!("activations[{concept}]"),
            });
        }
        if value < 0.0 {
            return Err(ValidationError::NegativeActivation { concept, value });
        }
    }
    if let Some(score) = record.score {
        if !score.is_finite() {
            return Err(ValidationError::NonFiniteValue { field: "score".into() });
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(ValidationError::ScoreOutOfRange(score));
        }
    }

    let unknown = record
        .activations
        .iter()
        .filter(|&(c, _)| !dictionary.contains(c))
        .count();
    if unknown > 0 {
        if config.strict_concepts {
            let id = record
                .activations
                .iter()
                .map(|(c, _)| c)
                .find(|&c| !dictionary.contains(c))
                .unwrap_or_default();
            return Err(ValidationError::UnknownConceptId(id));
        }
        record.activations.retain(|&(c, _)| dictionary.contains(c));
    }
    Ok(Validated {
        record,
        dropped_unknown: unknown,
    })
}

#[derive(Debug, Error, PartialEq)]
pub enum SuiteError {
    #[error("duplicate datapoint {datapoint_id:?} in benchmark {benchmark:?}")]
    DuplicateDatapoint { benchmark: String, datapoint_id: String },
    #[error("suite contains no records")]
    EmptySuite,
    #[error("record {datapoint_id:?} in benchmark {benchmark:?}: {source}")]
    InvalidRecord {
        benchmark: String,
        datapoint_id: String,
        #[source]
        source: ValidationError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// One benchmark's records, sorted by datapoint id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub name: String,
    pub records: Vec<ActivationRecord>,
    /// True iff every record carries a score.
    pub scored: bool,
}

/// Position of a record inside a [`SuiteIndex`]: (benchmark, record) in
/// canonical order. Ordering on this type is the canonical record order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordRef {
    pub benchmark: usize,
    pub record: usize,
}

/// The validated, immutable benchmark suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteIndex {
    dictionary: ConceptDictionary,
    benchmarks: Vec<Benchmark>,
}

impl SuiteIndex {
    pub fn dictionary(&self) -> &ConceptDictionary {
        &self.dictionary
    }

    pub fn benchmarks(&self) -> &[Benchmark] {
        &self.benchmarks
    }

    pub fn benchmark_names(&self) -> Vec<String> {
        self.benchmarks.iter().map(|b| b.name.clone()).collect()
    }

    pub fn benchmark_index(&self, name: &str) -> Option<usize> {
        self.benchmarks
            .binary_search_by(|b| b.name.as_str().cmp(name))
            .ok()
    }

    pub fn record(&self, at: RecordRef) -> &ActivationRecord {
        &self.benchmarks[at.benchmark].records[at.record]
    }

    pub fn record_count(&self) -> usize {
        self.benchmarks.iter().map(|b| b.records.len()).sum()
    }

    pub fn is_scored(&self) -> bool {
        self.benchmarks.iter().all(|b| b.scored)
    }

    /// Every record with its position, in canonical order.
    pub fn records(&self) -> impl Iterator<Item = (RecordRef, &ActivationRecord)> + '_ {
        self.benchmarks.iter().enumerate().flat_map(|(b, bench)| {
            bench
                .records
                .iter()
                .enumerate()
                .map(move |(r, rec)| (RecordRef { benchmark: b, record: r }, rec))
        })
    }

    /// Copy of this suite with every record passed through `f`. Records keep
    /// their positions; intended for building perturbed variants in tests and
    /// studies.
    pub fn map_records(&self, mut f: impl FnMut(&ActivationRecord) -> ActivationRecord) -> Self {
        let benchmarks = self
            .benchmarks
            .iter()
            .map(|b| {
                let records: Vec<_> = b.records.iter().map(&mut f).collect();
                Benchmark {
                    name: b.name.clone(),
                    scored: records.iter().all(|r| r.score.is_some()),
                    records,
                }
            })
            .collect();
        Self {
            dictionary: self.dictionary.clone(),
            benchmarks,
        }
    }
}

/// Incremental suite construction; validates each record as it arrives.
pub struct SuiteBuilder {
    dictionary: ConceptDictionary,
    config: AnalysisConfig,
    groups: BTreeMap<String, Vec<ActivationRecord>>,
    dropped_unknown: usize,
}

impl SuiteBuilder {
    pub fn new(dictionary: ConceptDictionary, config: AnalysisConfig) -> Result<Self, SuiteError> {
        config.validate()?;
        Ok(Self {
            dictionary,
            config,
            groups: BTreeMap::new(),
            dropped_unknown: 0,
        })
    }

    pub fn push(&mut self, record: ActivationRecord) -> Result<(), SuiteError> {
        let (benchmark, datapoint_id) = (record.benchmark.clone(), record.datapoint_id.clone());
        let validated = validate_record(record, &self.dictionary, &self.config).map_err(|source| {
            SuiteError::InvalidRecord {
                benchmark,
                datapoint_id,
                source,
            }
        })?;
        if validated.dropped_unknown > 0 {
            log::warn!(
                "dropped {} unknown concept ids from {}/{}",
                validated.dropped_unknown,
                validated.record.benchmark,
                validated.record.datapoint_id
            );
        }
        self.dropped_unknown += validated.dropped_unknown;
        let record = validated.record;
        match self.groups.get_mut(&record.benchmark) {
            Some(group) => group.push(record),
            None => {
                self.groups.insert(record.benchmark.clone(), vec![record]);
            }
        }
        Ok(())
    }

    /// Unknown concept ids dropped so far (non-strict mode only).
    pub fn dropped_unknown(&self) -> usize {
        self.dropped_unknown
    }

    pub fn finish(self) -> Result<SuiteIndex, SuiteError> {
        if self.groups.is_empty() {
            return Err(SuiteError::EmptySuite);
        }
        let mut benchmarks = Vec::with_capacity(self.groups.len());
        for (name, mut records) in self.groups {
            records.sort_by(|a, b| a.datapoint_id.cmp(&b.datapoint_id));
            if let Some(w) = records.windows(2).find(|w| w[0].datapoint_id == w[1].datapoint_id) {
                return Err(SuiteError::DuplicateDatapoint {
                    benchmark: name,
                    datapoint_id: w[0].datapoint_id.clone(),
                });
            }
            let scored = records.iter().all(|r| r.score.is_some());
            benchmarks.push(Benchmark {
                name,
                records,
                scored,
            });
        }
        Ok(SuiteIndex {
            dictionary: self.dictionary,
            benchmarks,
        })
    }
}

/// Validates, groups and canonically orders `records` into a suite.
pub fn build_suite(
    dictionary: ConceptDictionary,
    records: impl IntoIterator<Item = ActivationRecord>,
    config: &AnalysisConfig,
) -> Result<SuiteIndex, SuiteError> {
    let mut builder = SuiteBuilder::new(dictionary, *config)?;
    for record in records {
        builder.push(record)?;
    }
    builder.finish()
}
