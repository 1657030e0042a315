// SPDX-License-Identifier: Apache-2.0

//! Python module `cgaps`: load or synthesize a suite, analyze it, and read
//! the scores back as Python lists. Larger reports come back as parsed JSON.

use std::path::PathBuf;

use cgaps_core::ingest::{generate_synthetic, load_suite, SyntheticSpec};
use cgaps_core::robustness::{adversarial_ablation, subsample_stability, AblationParams, SubsampleParams};
use cgaps_core::{analyze, build_suite, AnalysisConfig, AnalysisResult, ConceptId, CoverageClass, SuiteIndex};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn config(epsilon: Option<f64>, under: Option<f64>, over: Option<f64>) -> PyResult<AnalysisConfig> {
    let mut c = AnalysisConfig::default();
    if let Some(v) = epsilon {
        c.epsilon = v;
    }
    if let Some(v) = under {
        c.under_percentile = v;
    }
    if let Some(v) = over {
        c.over_percentile = v;
    }
    c.validate().map_err(value_err)?;
    Ok(c)
}

/// A validated benchmark suite.
#[pyclass(frozen, module = "cgaps")]
struct Suite {
    inner: SuiteIndex,
}

#[pymethods]
impl Suite {
    #[getter]
    fn benchmark_names(&self) -> Vec<String> {
        self.inner.benchmark_names()
    }

    #[getter]
    fn record_count(&self) -> usize {
        self.inner.record_count()
    }

    #[getter]
    fn concept_count(&self) -> usize {
        self.inner.dictionary().len()
    }

    #[pyo3(signature = (epsilon=None, under_percentile=None, over_percentile=None))]
    fn analyze(&self, epsilon: Option<f64>, under_percentile: Option<f64>, over_percentile: Option<f64>) -> PyResult<Analysis> {
        let c = config(epsilon, under_percentile, over_percentile)?;
        let inner = analyze(&self.inner, &c).map_err(value_err)?;
        Ok(Analysis { inner })
    }

    #[pyo3(signature = (seed, drop_fraction=0.2, repetitions=100))]
    fn subsample<'py>(&self, py: Python<'py>, seed: u64, drop_fraction: f64, repetitions: usize) -> PyResult<Bound<'py, PyAny>> {
        let params = SubsampleParams {
            drop_fraction,
            repetitions,
            seed,
        };
        let report = py.detach(|| subsample_stability(&self.inner, &params)).map_err(value_err)?;
        to_py(py, &report)
    }

    #[pyo3(signature = (seed, k_concepts=100, k_datapoints=100, repetitions=10, candidate_pool=500))]
    fn ablation<'py>(
        &self,
        py: Python<'py>,
        seed: u64,
        k_concepts: usize,
        k_datapoints: usize,
        repetitions: usize,
        candidate_pool: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let params = AblationParams {
            k_concepts,
            k_datapoints,
            repetitions,
            candidate_pool,
            seed,
        };
        let report = py.detach(|| adversarial_ablation(&self.inner, &params)).map_err(value_err)?;
        to_py(py, &report)
    }
}

/// Scores and classes of one analysis run, indexed like `concepts`.
#[pyclass(frozen, module = "cgaps")]
struct Analysis {
    inner: AnalysisResult,
}

#[pymethods]
impl Analysis {
    #[getter]
    fn concepts(&self) -> Vec<ConceptId> {
        self.inner.concepts.clone()
    }

    #[getter]
    fn benchmarks(&self) -> Vec<String> {
        self.inner.benchmarks.clone()
    }

    #[getter]
    fn x_bench(&self) -> Vec<f64> {
        self.inner.cross_coverage.clone()
    }

    /// `None` where the concept never activates.
    #[getter]
    fn x_model(&self) -> Vec<Option<f64>> {
        self.inner.cross_performance.clone()
    }

    #[getter]
    fn chi_bench(&self) -> Vec<Vec<f64>> {
        self.inner.per_benchmark_coverage.clone()
    }

    #[getter]
    fn chi_model(&self) -> Vec<Vec<Option<f64>>> {
        self.inner.per_benchmark_performance.clone()
    }

    #[getter]
    fn coverage_class(&self) -> Vec<&'static str> {
        self.inner.coverage_class.iter().map(|c| c.as_str()).collect()
    }

    #[getter]
    fn model_gaps(&self) -> Vec<ConceptId> {
        self.inner.model_gaps.iter().copied().collect()
    }

    /// `(p_under, p_over)`, or `None` when every concept is missing.
    #[getter]
    fn thresholds(&self) -> Option<(f64, f64)> {
        self.inner.thresholds.map(|t| (t.p_under, t.p_over))
    }

    #[getter]
    fn overlap(&self) -> Vec<Vec<f64>> {
        self.inner.overlap.values.clone()
    }

    fn concepts_in_class(&self, class: &str) -> PyResult<Vec<ConceptId>> {
        let class: CoverageClass = class.parse().map_err(PyValueError::new_err)?;
        Ok(self.inner.concepts_in_class(class))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.concepts.len()
    }
}

/// Loads the suite named by a manifest file.
#[pyfunction]
#[pyo3(signature = (manifest, lenient=false))]
fn load(py: Python<'_>, manifest: PathBuf, lenient: bool) -> PyResult<Suite> {
    let c = AnalysisConfig {
        strict_concepts: !lenient,
        ..AnalysisConfig::default()
    };
    let loaded = py.detach(|| load_suite(&manifest, &c)).map_err(|e| {
        if e.is_io() {
            PyOSError::new_err(e.to_string())
        } else {
            value_err(e)
        }
    })?;
    Ok(Suite { inner: loaded.suite })
}

/// Generates a seeded synthetic suite in memory.
#[pyfunction]
#[pyo3(signature = (benchmarks, concepts, records, seed=0, sparsity=0.05, missing=Vec::new(), high=Vec::new(), low=Vec::new(), binary_scores=false))]
#[allow(clippy::too_many_arguments)]
fn synthetic(
    benchmarks: usize,
    concepts: usize,
    records: usize,
    seed: u64,
    sparsity: f64,
    missing: Vec<ConceptId>,
    high: Vec<ConceptId>,
    low: Vec<ConceptId>,
    binary_scores: bool,
) -> PyResult<Suite> {
    let mut spec = SyntheticSpec::new(benchmarks, concepts, records);
    spec.seed = seed;
    spec.sparsity = sparsity;
    spec.planted_missing_concepts = missing.into_iter().collect();
    spec.planted_high_concepts = high.into_iter().collect();
    spec.planted_low_concepts = low.into_iter().collect();
    spec.binary_scores = binary_scores;
    let (dict, recs) = generate_synthetic(&spec).map_err(value_err)?;
    let inner = build_suite(dict, recs, &AnalysisConfig::default()).map_err(value_err)?;
    Ok(Suite { inner })
}

#[pymodule]
fn cgaps(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Suite>()?;
    m.add_class::<Analysis>()?;
    m.add_function(wrap_pyfunction!(load, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic, m)?)?;
    Ok(())
}
