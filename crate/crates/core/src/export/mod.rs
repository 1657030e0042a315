// SPDX-License-Identifier: Apache-2.0

//! Report files and the static explorer bundle.
//!
//! Every writer here is deterministic: the same analysis always produces
//! byte-identical files.

mod bundle;
mod report;

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

pub use bundle::{
    build_static_bundle, histogram, BenchmarkBreakdown, BenchmarkSummary, BenchmarksDocument, BundleManifest,
    BundleOptions, ConceptDetail, ConceptPage, ConceptRow, Distributions, ExampleDatapoint, Histogram, StaticBundle,
    BUNDLE_LAYOUT_VERSION, HISTOGRAM_BINS, SCORE_SPLIT,
};
pub use report::{
    export_report, read_structured_report, write_structured, write_tabular, ReportFormat, StructuredReport,
    REPORT_FORMAT_VERSION,
};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("analysis does not match the suite: {0}")]
    Mismatch(String),
    #[error("{}: unsupported layout version {found}", path.display())]
    UnsupportedVersion { path: PathBuf, found: u32 },
}

impl ExportError {
    pub fn is_io(&self) -> bool {
        matches!(self, ExportError::Io { .. })
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Pretty JSON with a trailing newline.
pub(crate) fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable value");
    out.push(b'\n');
    out
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExportError> {
    std::fs::write(path, to_json_bytes(value)).map_err(io_err(path))
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ExportError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|source| ExportError::Json {
        path: path.to_path_buf(),
        source,
    })
}
