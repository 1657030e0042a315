// SPDX-License-Identifier: Apache-2.0

//! Stability of the cross-benchmark scores under random subsampling, and
//! their response to removing the datapoints most salient for the best and
//! worst performing concepts.
//!
//! Repetitions run in parallel; each one derives its own ChaCha stream from
//! `(seed, repetition)` and holds only a removal mask over the shared suite,
//! so reports are identical for any thread count.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ConceptId, RecordRef, SuiteIndex};
use crate::metrics::{
    cross_coverage_from, median, normalized_activation, MetricsError, RecordMask, SuiteTotals,
};

#[derive(Debug, Error, PartialEq)]
pub enum RobustnessError {
    #[error("benchmark {benchmark:?} with {records} records cannot lose {dropped}")]
    BenchmarkTooSmall {
        benchmark: String,
        records: usize,
        dropped: usize,
    },
    #[error("suite too small: {0}")]
    SuiteTooSmall(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("baseline median performance is zero; percentage changes are undefined")]
    DegenerateBaseline,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn require_scored(suite: &SuiteIndex) -> Result<(), RobustnessError> {
    match suite.benchmarks().iter().find(|b| !b.scored) {
        Some(b) => Err(MetricsError::UnscoredBenchmark(b.name.clone()).into()),
        None => Ok(()),
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Population standard deviation (Welford). Identical inputs give exactly 0.
pub fn population_std(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
    for x in values {
        n += 1;
        let delta = x - mean;
        mean += delta / n as f64;
        m2 += delta * (x - mean);
    }
    (n > 0).then(|| (m2 / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsampleParams {
    pub drop_fraction: f64,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for SubsampleParams {
    fn default() -> Self {
        Self {
            drop_fraction: 0.2,
            repetitions: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptDispersion {
    pub id: ConceptId,
    pub x_bench_std: f64,
    /// Over the repetitions where the value was defined; null if it never was.
    pub x_model_std: Option<f64>,
    pub x_model_defined_reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleReport {
    pub repetitions: usize,
    pub drop_fraction: f64,
    pub seed: u64,
    /// Std across repetitions of the median (over defined concepts) of X_model.
    pub median_x_model_std: f64,
    /// Std across repetitions of the median (over all concepts) of X_bench.
    pub median_x_bench_std: f64,
    pub per_concept_std: Vec<ConceptDispersion>,
}

/// Re-runs the cross-benchmark analysis `repetitions` times, each time
/// dropping `floor(drop_fraction * |D_b|)` uniformly chosen records from
/// every benchmark.
pub fn subsample_stability(
    suite: &SuiteIndex,
    params: &SubsampleParams,
) -> Result<SubsampleReport, RobustnessError> {
    if !(0.0..1.0).contains(&params.drop_fraction) {
        return Err(RobustnessError::InvalidParameter(format!(
            "drop_fraction must lie in [0, 1), got {}",
            params.drop_fraction
        )));
    }
    if params.repetitions == 0 {
        return Err(RobustnessError::InvalidParameter("repetitions must be at least 1".into()));
    }
    require_scored(suite)?;

    let drops: Vec<usize> = suite
        .benchmarks()
        .iter()
        .map(|b| {
            let n = b.records.len();
            let dropped = (params.drop_fraction * n as f64).floor() as usize;
            if dropped >= n {
                Err(RobustnessError::BenchmarkTooSmall {
                    benchmark: b.name.clone(),
                    records: n,
                    dropped,
                })
            } else {
                Ok(dropped)
            }
        })
        .collect::<Result<_, _>>()?;

    let runs: Vec<(Vec<f64>, Vec<Option<f64>>)> = (0..params.repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng_for(params.seed, rep as u64);
            let mut mask = RecordMask::keep_all(suite);
            for (b, (bench, &dropped)) in suite.benchmarks().iter().zip(&drops).enumerate() {
                for record in index::sample(&mut rng, bench.records.len(), dropped) {
                    mask.remove(RecordRef { benchmark: b, record });
                }
            }
            let totals = SuiteTotals::compute(suite, Some(&mask));
            let coverage = totals.per_benchmark_coverage().map_err(|e| match e {
                MetricsError::AllZeroBenchmark(name) => {
                    let b = suite.benchmark_index(&name).unwrap_or_default();
                    RobustnessError::BenchmarkTooSmall {
                        benchmark: name,
                        records: suite.benchmarks()[b].records.len(),
                        dropped: drops[b],
                    }
                }
                other => other.into(),
            })?;
            Ok((cross_coverage_from(&coverage), totals.cross_performance()?))
        })
        .collect::<Result<_, RobustnessError>>()?;

    let bench_medians: Vec<f64> = runs.iter().filter_map(|(xb, _)| median(xb)).collect();
    let model_medians: Vec<f64> = runs
        .iter()
        .filter_map(|(_, xm)| median(&xm.iter().flatten().copied().collect::<Vec<_>>()))
        .collect();

    let per_concept_std = suite
        .dictionary()
        .ids()
        .enumerate()
        .map(|(c, id)| {
            let defined: Vec<f64> = runs.iter().filter_map(|(_, xm)| xm[c]).collect();
            ConceptDispersion {
                id,
                x_bench_std: population_std(runs.iter().map(|(xb, _)| xb[c])).unwrap_or(0.0),
                x_model_std: population_std(defined.iter().copied()),
                x_model_defined_reps: defined.len(),
            }
        })
        .collect();

    Ok(SubsampleReport {
        repetitions: params.repetitions,
        drop_fraction: params.drop_fraction,
        seed: params.seed,
        median_x_model_std: population_std(model_medians).unwrap_or(0.0),
        median_x_bench_std: population_std(bench_medians).unwrap_or(0.0),
        per_concept_std,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SalienceEntry {
    pub at: RecordRef,
    pub salience: f64,
}

/// Ranks every record by its summed normalized activation over `concepts`,
/// descending; ties keep canonical record order.
pub fn datapoint_salience(suite: &SuiteIndex, concepts: &BTreeSet<ConceptId>) -> Vec<SalienceEntry> {
    let mut ranking: Vec<SalienceEntry> = suite
        .records()
        .map(|(at, record)| {
            let salience = record
                .activations
                .iter()
                .filter(|(c, _)| concepts.contains(c))
                .map(|(c, _)| normalized_activation(record, c))
                .sum();
            SalienceEntry { at, salience }
        })
        .collect();
    ranking.sort_by(|a, b| b.salience.total_cmp(&a.salience));
    ranking
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationParams {
    pub k_concepts: usize,
    pub k_datapoints: usize,
    pub repetitions: usize,
    pub candidate_pool: usize,
    pub seed: u64,
}

impl Default for AblationParams {
    fn default() -> Self {
        Self {
            k_concepts: 100,
            k_datapoints: 100,
            repetitions: 10,
            candidate_pool: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DatapointKey {
    pub benchmark: String,
    pub datapoint_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRepetition {
    /// Removed records in canonical order.
    pub removed: Vec<DatapointKey>,
    pub median_x_model: f64,
    pub delta_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSide {
    /// The extreme concepts, most extreme first.
    pub concepts: Vec<ConceptId>,
    pub repetitions: Vec<AblationRepetition>,
    pub mean_delta_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub k_concepts: usize,
    pub k_datapoints: usize,
    pub repetitions: usize,
    pub candidate_pool: usize,
    pub seed: u64,
    pub baseline_median_x_model: f64,
    /// Mean % change of median X_model after removing records salient for the
    /// best-performing concepts.
    pub high_side_delta_pct: f64,
    /// Same for the worst-performing concepts.
    pub low_side_delta_pct: f64,
    pub high_side: AblationSide,
    pub low_side: AblationSide,
}

fn defined_median(values: &[Option<f64>]) -> Option<f64> {
    median(&values.iter().flatten().copied().collect::<Vec<_>>())
}

/// Removes samples of the records most salient for the best and worst
/// performing concepts and reports the change of median X_model.
///
/// For each side, the `candidate_pool` most salient records form the pool and
/// each repetition removes `k_datapoints` of them chosen uniformly at random.
/// With `candidate_pool == k_datapoints` every repetition removes exactly the
/// top-k records.
pub fn adversarial_ablation(
    suite: &SuiteIndex,
    params: &AblationParams,
) -> Result<AblationReport, RobustnessError> {
    let p = params;
    if p.k_concepts == 0 || p.k_datapoints == 0 || p.repetitions == 0 {
        return Err(RobustnessError::InvalidParameter(
            "k_concepts, k_datapoints and repetitions must be at least 1".into(),
        ));
    }
    if p.candidate_pool < p.k_datapoints {
        return Err(RobustnessError::InvalidParameter(format!(
            "candidate_pool {} is smaller than k_datapoints {}",
            p.candidate_pool, p.k_datapoints
        )));
    }
    require_scored(suite)?;
    if suite.record_count() < p.candidate_pool {
        return Err(RobustnessError::SuiteTooSmall(format!(
            "{} records, candidate_pool needs {}",
            suite.record_count(),
            p.candidate_pool
        )));
    }

    let baseline = SuiteTotals::compute(suite, None).cross_performance()?;
    let mut defined: Vec<(ConceptId, f64)> = suite
        .dictionary()
        .ids()
        .zip(&baseline)
        .filter_map(|(id, x)| x.map(|x| (id, x)))
        .collect();
    if defined.len() < p.k_concepts {
        return Err(RobustnessError::SuiteTooSmall(format!(
            "{} concepts with defined performance, k_concepts needs {}",
            defined.len(),
            p.k_concepts
        )));
    }
    let baseline_median = defined_median(&baseline).unwrap_or(0.0);
    if baseline_median == 0.0 {
        return Err(RobustnessError::DegenerateBaseline);
    }

    defined.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let best: Vec<ConceptId> = defined[..p.k_concepts].iter().map(|&(id, _)| id).collect();
    defined.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let worst: Vec<ConceptId> = defined[..p.k_concepts].iter().map(|&(id, _)| id).collect();

    let run_side = |side: u64, concepts: Vec<ConceptId>| -> Result<AblationSide, RobustnessError> {
        let set: BTreeSet<ConceptId> = concepts.iter().copied().collect();
        let ranking = datapoint_salience(suite, &set);
        let pool = &ranking[..p.candidate_pool];
        let repetitions: Vec<AblationRepetition> = (0..p.repetitions)
            .into_par_iter()
            .map(|rep| {
                let mut rng = rng_for(p.seed, (side << 32) | rep as u64);
                let mut chosen: Vec<RecordRef> = index::sample(&mut rng, pool.len(), p.k_datapoints)
                    .into_iter()
                    .map(|i| pool[i].at)
                    .collect();
                chosen.sort();
                let mut mask = RecordMask::keep_all(suite);
                for &at in &chosen {
                    mask.remove(at);
                }
                let x_model = SuiteTotals::compute(suite, Some(&mask)).cross_performance()?;
                let median_x_model = defined_median(&x_model).unwrap_or(0.0);
                let removed = chosen
                    .iter()
                    .map(|&at| DatapointKey {
                        benchmark: suite.benchmarks()[at.benchmark].name.clone(),
                        datapoint_id: suite.record(at).datapoint_id.clone(),
                    })
                    .collect();
                Ok(AblationRepetition {
                    removed,
                    median_x_model,
                    delta_pct: (median_x_model - baseline_median) / baseline_median * 100.0,
                })
            })
            .collect::<Result<_, RobustnessError>>()?;
        let mean_delta_pct =
            repetitions.iter().map(|r| r.delta_pct).sum::<f64>() / repetitions.len() as f64;
        Ok(AblationSide {
            concepts,
            repetitions,
            mean_delta_pct,
        })
    };

    let high_side = run_side(0, best)?;
    let low_side = run_side(1, worst)?;
    Ok(AblationReport {
        k_concepts: p.k_concepts,
        k_datapoints: p.k_datapoints,
        repetitions: p.repetitions,
        candidate_pool: p.candidate_pool,
        seed: p.seed,
        baseline_median_x_model: baseline_median,
        high_side_delta_pct: high_side.mean_delta_pct,
        low_side_delta_pct: low_side.mean_delta_pct,
        high_side,
        low_side,
    })
}
