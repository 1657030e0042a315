// SPDX-License-Identifier: Apache-2.0

//! Reading and writing activation-record files, concept dictionaries and
//! suite manifests, plus helpers for extraction adapters and a seeded
//! synthetic suite generator.

mod format;
mod manifest;
mod synth;
mod tokens;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::domain::SuiteError;

pub use format::{
    open_record_file, read_dictionary, read_record_file, read_records, write_dictionary,
    write_record_file, write_records, RecordFileHeader, RecordReader, FORMAT_VERSION,
};
pub use manifest::{load_suite, LoadedSuite, SuiteManifest};
pub use synth::{generate_synthetic, SynthError, SyntheticRecords, SyntheticSpec};
pub use tokens::{sum_token_activations, TokenSumError};

/// Errors raised while decoding one record stream.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("missing header line")]
    MissingHeader,
    #[error("unsupported format version {0} (this build reads version {FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("{}: {message}", path.display())]
    Document { path: PathBuf, message: String },
    #[error("{}: header declares {field} {found:?} but the dictionary has {expected:?}", path.display())]
    HeaderMismatch {
        path: PathBuf,
        field: &'static str,
        expected: String,
        found: String,
    },
    #[error("{}: record {datapoint_id:?} belongs to benchmark {found:?}, manifest lists the file under {expected:?}", path.display())]
    BenchmarkMismatch {
        path: PathBuf,
        datapoint_id: String,
        expected: String,
        found: String,
    },
    #[error(transparent)]
    Suite(#[from] SuiteError),
}

impl IngestError {
    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            IngestError::Io { .. }
                | IngestError::Format {
                    source: FormatError::Io(_),
                    ..
                }
        )
    }
}
