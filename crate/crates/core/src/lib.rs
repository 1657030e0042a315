// SPDX-License-Identifier: Apache-2.0

//! Concept-level coverage and competency-gap analysis for LLM benchmark
//! suites, computed from sparse autoencoder concept activations.
//!
//! The pipeline is: read activation records ([`ingest`]), validate them into a
//! [`SuiteIndex`], compute coverage and performance scores ([`metrics`]),
//! optionally probe their stability ([`robustness`]), and export reports or a
//! static explorer bundle ([`export`]). [`assist`] drives an external
//! chat-completion service to triage long concept lists.

pub mod assist;
pub mod domain;
pub mod export;
pub mod ingest;
pub mod metrics;
pub mod robustness;

pub use domain::{
    build_suite, validate_record, ActivationRecord, AnalysisConfig, Benchmark, Concept,
    ConceptDictionary, ConceptId, Provenance, RecordRef, SparseActivations, SuiteBuilder,
    SuiteError, SuiteIndex, ValidationError,
};
pub use metrics::{analyze, AnalysisResult, CoverageClass, MetricsError};
