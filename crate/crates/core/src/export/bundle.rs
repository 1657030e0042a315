// SPDX-License-Identifier: Apache-2.0

//! Static explorer bundle.
//!
//! ```text
//! manifest.json
//! concepts/page-00000.json   rows 0..page_size, sorted by concept id
//! detail/<id>.json           one per concept
//! distributions.json         histograms of x_bench and x_model
//! benchmarks.json            per-benchmark missing ratio and histograms
//! overlap.json               benchmark coverage overlap matrix
//! ```

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, read_json, write_json, ExportError};
use crate::domain::{AnalysisConfig, ConceptId, RecordRef, SuiteIndex};
use crate::metrics::{median, AnalysisResult, CoverageClass, DecileThresholds, OverlapMatrix};

pub const BUNDLE_LAYOUT_VERSION: u32 = 1;
pub const HISTOGRAM_BINS: usize = 50;
/// Records scoring at least this go to the high-score example group.
pub const SCORE_SPLIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleOptions {
    pub top_k_examples: usize,
    pub page_size: usize,
}

impl Default for BundleOptions {
    fn default() -> Self {
        Self {
            top_k_examples: 10,
            page_size: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub layout_version: u32,
    pub sae_id: String,
    pub model_id: String,
    pub benchmarks: Vec<String>,
    pub config: AnalysisConfig,
    pub thresholds: Option<DecileThresholds>,
    pub generated_at: String,
    pub concept_count: usize,
    pub page_size: usize,
    pub page_count: usize,
    pub top_k_examples: usize,
    pub score_split: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptRow {
    pub id: ConceptId,
    pub label: String,
    pub x_bench: f64,
    pub x_model: Option<f64>,
    pub coverage_class: CoverageClass,
    pub is_model_gap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptPage {
    pub page: usize,
    pub page_size: usize,
    pub page_count: usize,
    pub total: usize,
    pub rows: Vec<ConceptRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkBreakdown {
    pub chi_bench: f64,
    pub chi_model: Option<f64>,
    pub coverage_class: CoverageClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleDatapoint {
    pub benchmark: String,
    pub datapoint_id: String,
    pub score: Option<f64>,
    pub salience: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptDetail {
    pub id: ConceptId,
    pub label: String,
    pub x_bench: f64,
    pub x_model: Option<f64>,
    pub coverage_class: CoverageClass,
    pub is_model_gap: bool,
    /// Empty for missing concepts.
    pub benchmarks: BTreeMap<String, BenchmarkBreakdown>,
    pub high_score_examples: Vec<ExampleDatapoint>,
    pub low_score_examples: Vec<ExampleDatapoint>,
}

/// Uniform bins over the observed range. `min`, `max` and `median` are
/// `null` when there are no values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub median: Option<f64>,
    pub count: usize,
    pub undefined: usize,
    pub counts: Vec<u64>,
}

/// Bins the defined values into [`HISTOGRAM_BINS`] uniform bins; the top
/// edge is inclusive.
pub fn histogram(values: impl IntoIterator<Item = Option<f64>>) -> Histogram {
    let mut defined = Vec::new();
    let mut undefined = 0;
    for v in values {
        match v {
            Some(x) => defined.push(x),
            None => undefined += 1,
        }
    }
    let mut counts = vec![0u64; HISTOGRAM_BINS];
    if defined.is_empty() {
        return Histogram {
            min: None,
            max: None,
            median: None,
            count: 0,
            undefined,
            counts,
        };
    }
    let min = defined.iter().copied().fold(f64::INFINITY, f64::min);
    let max = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = max - min;
    for &x in &defined {
        let bin = if width > 0.0 {
            (((x - min) / width * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)
        } else {
            0
        };
        counts[bin] += 1;
    }
    Histogram {
        min: Some(min),
        max: Some(max),
        median: median(&defined),
        count: defined.len(),
        undefined,
        counts,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distributions {
    pub x_bench: Histogram,
    pub x_model: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub name: String,
    pub record_count: usize,
    pub missing_count: usize,
    pub missing_ratio: f64,
    pub thresholds: Option<DecileThresholds>,
    pub chi_bench: Histogram,
    pub chi_model: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarksDocument {
    pub benchmarks: Vec<BenchmarkSummary>,
}

/// Everything the explorer reads, held in memory. [`StaticBundle::write`]
/// and [`StaticBundle::load`] convert to and from the directory layout.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticBundle {
    pub manifest: BundleManifest,
    /// Sorted by concept id.
    pub rows: Vec<ConceptRow>,
    /// Aligned with `rows`.
    pub details: Vec<ConceptDetail>,
    pub distributions: Distributions,
    pub benchmarks: BenchmarksDocument,
    pub overlap: OverlapMatrix,
}

#[derive(Clone, Copy)]
struct Candidate {
    salience: f64,
    at: RecordRef,
}

/// Salience descending, then canonical record order.
fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    b.salience.total_cmp(&a.salience).then(a.at.cmp(&b.at))
}

fn keep_top(list: &mut Vec<Candidate>, k: usize) {
    list.sort_by(rank);
    list.truncate(k);
}

fn check_alignment(suite: &SuiteIndex, result: &AnalysisResult) -> Result<(), ExportError> {
    let dict = suite.dictionary();
    if result.concepts.len() != dict.len() || result.concepts.iter().zip(dict.concepts()).any(|(a, c)| *a != c.id) {
        return Err(ExportError::Mismatch("concept ids differ from the dictionary".into()));
    }
    if !result.benchmarks.iter().map(String::as_str).eq(suite.benchmark_names()) {
        return Err(ExportError::Mismatch("benchmark names differ from the suite".into()));
    }
    Ok(())
}

/// Top `k` activating records per concept and score group, one pass over
/// the suite.
fn example_candidates(suite: &SuiteIndex, k: usize) -> Vec<[Vec<Candidate>; 2]> {
    let dict = suite.dictionary();
    let mut lists: Vec<[Vec<Candidate>; 2]> = (0..dict.len()).map(|_| [Vec::new(), Vec::new()]).collect();
    if k == 0 {
        return lists;
    }
    let prune_at = (4 * k).max(64);
    for (at, record) in suite.records() {
        let group = match record.score {
            Some(s) if s >= SCORE_SPLIT => 0,
            _ => 1,
        };
        let tokens = record.token_count as f64;
        for (c, s) in record.activations.iter() {
            let Some(pos) = dict.position(c) else { continue };
            let list = &mut lists[pos][group];
            list.push(Candidate { salience: s / tokens, at });
            if list.len() >= prune_at {
                keep_top(list, k);
            }
        }
    }
    for pair in &mut lists {
        for list in pair.iter_mut() {
            keep_top(list, k);
        }
    }
    lists
}

/// Builds the bundle for `result`, which must come from `suite`.
pub fn build_static_bundle(
    suite: &SuiteIndex,
    result: &AnalysisResult,
    generated_at: &str,
    options: BundleOptions,
) -> Result<StaticBundle, ExportError> {
    check_alignment(suite, result)?;
    if options.page_size == 0 {
        return Err(ExportError::Mismatch("page_size must be at least 1".into()));
    }
    let dict = suite.dictionary();
    let n = dict.len();

    let rows: Vec<ConceptRow> = dict
        .concepts()
        .iter()
        .enumerate()
        .map(|(i, c)| ConceptRow {
            id: c.id,
            label: c.label.clone(),
            x_bench: result.cross_coverage[i],
            x_model: result.cross_performance[i],
            coverage_class: result.coverage_class[i],
            is_model_gap: result.model_gaps.contains(&c.id),
        })
        .collect();

    let example = |c: &Candidate| {
        let bench = &suite.benchmarks()[c.at.benchmark];
        let record = &bench.records[c.at.record];
        ExampleDatapoint {
            benchmark: bench.name.clone(),
            datapoint_id: record.datapoint_id.clone(),
            score: record.score,
            salience: c.salience,
        }
    };
    let candidates = example_candidates(suite, options.top_k_examples);
    let details: Vec<ConceptDetail> = rows
        .iter()
        .zip(candidates)
        .enumerate()
        .map(|(i, (row, [high, low]))| {
            let missing = row.coverage_class == CoverageClass::Missing;
            let benchmarks = if missing {
                BTreeMap::new()
            } else {
                result
                    .benchmarks
                    .iter()
                    .enumerate()
                    .map(|(b, name)| {
                        (
                            name.clone(),
                            BenchmarkBreakdown {
                                chi_bench: result.per_benchmark_coverage[b][i],
                                chi_model: result.per_benchmark_performance[b][i],
                                coverage_class: result.per_benchmark_coverage_class[b][i],
                            },
                        )
                    })
                    .collect()
            };
            let (high, low) = if missing {
                (Vec::new(), Vec::new())
            } else {
                (high.iter().map(example).collect(), low.iter().map(example).collect())
            };
            ConceptDetail {
                id: row.id,
                label: row.label.clone(),
                x_bench: row.x_bench,
                x_model: row.x_model,
                coverage_class: row.coverage_class,
                is_model_gap: row.is_model_gap,
                benchmarks,
                high_score_examples: high,
                low_score_examples: low,
            }
        })
        .collect();

    let distributions = Distributions {
        x_bench: histogram(result.cross_coverage.iter().map(|&x| Some(x))),
        x_model: histogram(result.cross_performance.iter().copied()),
    };
    let benchmarks = BenchmarksDocument {
        benchmarks: suite
            .benchmarks()
            .iter()
            .enumerate()
            .map(|(b, bench)| {
                let missing_count = result.per_benchmark_coverage_class[b]
                    .iter()
                    .filter(|&&c| c == CoverageClass::Missing)
                    .count();
                BenchmarkSummary {
                    name: bench.name.clone(),
                    record_count: bench.records.len(),
                    missing_count,
                    missing_ratio: missing_count as f64 / n as f64,
                    thresholds: result.per_benchmark_thresholds[b],
                    chi_bench: histogram(result.per_benchmark_coverage[b].iter().map(|&x| Some(x))),
                    chi_model: histogram(result.per_benchmark_performance[b].iter().copied()),
                }
            })
            .collect(),
    };

    let manifest = BundleManifest {
        layout_version: BUNDLE_LAYOUT_VERSION,
        sae_id: dict.sae_id().to_string(),
        model_id: dict.model_id().to_string(),
        benchmarks: result.benchmarks.clone(),
        config: result.config,
        thresholds: result.thresholds,
        generated_at: generated_at.to_string(),
        concept_count: n,
        page_size: options.page_size,
        page_count: n.div_ceil(options.page_size).max(1),
        top_k_examples: options.top_k_examples,
        score_split: SCORE_SPLIT,
    };
    Ok(StaticBundle {
        manifest,
        rows,
        details,
        distributions,
        benchmarks,
        overlap: result.overlap.clone(),
    })
}

fn page_file(page: usize) -> String {
    format!("page-{page:05}.json")
}

impl StaticBundle {
    pub fn page(&self, page: usize) -> Option<ConceptPage> {
        let m = &self.manifest;
        if page >= m.page_count {
            return None;
        }
        let start = (page * m.page_size).min(self.rows.len());
        let end = (start + m.page_size).min(self.rows.len());
        Some(ConceptPage {
            page,
            page_size: m.page_size,
            page_count: m.page_count,
            total: self.rows.len(),
            rows: self.rows[start..end].to_vec(),
        })
    }

    pub fn detail(&self, id: ConceptId) -> Option<&ConceptDetail> {
        self.rows
            .binary_search_by_key(&id, |r| r.id)
            .ok()
            .map(|i| &self.details[i])
    }

    /// Writes the directory layout. Stale `concepts/` and `detail/`
    /// directories from an earlier bundle are replaced.
    pub fn write(&self, dir: &Path) -> Result<(), ExportError> {
        let concepts_dir = dir.join("concepts");
        let detail_dir = dir.join("detail");
        for sub in [&concepts_dir, &detail_dir] {
            if sub.exists() {
                std::fs::remove_dir_all(sub).map_err(io_err(sub))?;
            }
            std::fs::create_dir_all(sub).map_err(io_err(sub))?;
        }
        write_json(&dir.join("manifest.json"), &self.manifest)?;
        for p in 0..self.manifest.page_count {
            let page = self.page(p).expect("page in range");
            write_json(&concepts_dir.join(page_file(p)), &page)?;
        }
        for d in &self.details {
            write_json(&detail_dir.join(format!("{}.json", d.id)), d)?;
        }
        write_json(&dir.join("distributions.json"), &self.distributions)?;
        write_json(&dir.join("benchmarks.json"), &self.benchmarks)?;
        write_json(&dir.join("overlap.json"), &self.overlap)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, ExportError> {
        let manifest_path = dir.join("manifest.json");
        let manifest: BundleManifest = read_json(&manifest_path)?;
        if manifest.layout_version != BUNDLE_LAYOUT_VERSION {
            return Err(ExportError::UnsupportedVersion {
                path: manifest_path,
                found: manifest.layout_version,
            });
        }
        let mut rows = Vec::with_capacity(manifest.concept_count);
        for p in 0..manifest.page_count {
            let path = dir.join("concepts").join(page_file(p));
            let page: ConceptPage = read_json(&path)?;
            if page.page != p {
                return Err(ExportError::Mismatch(format!("{} holds page {}", path.display(), page.page)));
            }
            rows.extend(page.rows);
        }
        if rows.len() != manifest.concept_count {
            return Err(ExportError::Mismatch(format!(
                "pages hold {} rows, manifest says {}",
                rows.len(),
                manifest.concept_count
            )));
        }
        let details = rows
            .iter()
            .map(|r| read_json(&dir.join("detail").join(format!("{}.json", r.id))))
            .collect::<Result<Vec<ConceptDetail>, _>>()?;
        Ok(Self {
            distributions: read_json(&dir.join("distributions.json"))?,
            benchmarks: read_json(&dir.join("benchmarks.json"))?,
            overlap: read_json(&dir.join("overlap.json"))?,
            manifest,
            rows,
            details,
        })
    }
}
