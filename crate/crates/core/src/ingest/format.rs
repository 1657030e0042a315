// SPDX-License-Identifier: Apache-2.0

//! Line-delimited activation-record files (`*.cgr`, optionally gzipped).
//!
//! The first line is a header object; every following non-blank line is one
//! record object:
//!
//! ```text
//! {"format_version":1,"sae_id":"...","model_id":"...","created_at":"..."}
//! {"benchmark":"mmlu","datapoint_id":"q17","token_count":42,"score":1.0,"provenance":"prompt_only","activations":{"2":0.5,"5":1.25}}
//! ```
//!
//! Activation keys are written in ascending concept id and floats in their
//! shortest round-trip form, so equal inputs always produce equal bytes.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::{Compression, GzBuilder};
use serde::{Deserialize, Serialize};

use super::{FormatError, IngestError};
use crate::domain::{ActivationRecord, ConceptDictionary};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFileHeader {
    pub format_version: u32,
    pub sae_id: String,
    pub model_id: String,
    pub created_at: String,
}

impl RecordFileHeader {
    pub fn new(dictionary: &ConceptDictionary, created_at: impl Into<String>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            sae_id: dictionary.sae_id().to_string(),
            model_id: dictionary.model_id().to_string(),
            created_at: created_at.into(),
        }
    }
}

/// Streaming record decoder. Yields records in file order.
pub struct RecordReader<R> {
    inner: R,
    header: RecordFileHeader,
    line_no: usize,
    buf: String,
    failed: bool,
}

impl<R: BufRead> RecordReader<R> {
    pub fn header(&self) -> &RecordFileHeader {
        &self.header
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<ActivationRecord, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            self.buf.clear();
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            }
            self.line_no += 1;
            let line = self.buf.trim();
            if line.is_empty() {
                continue;
            }
            let parsed = serde_json::from_str(line).map_err(|e| FormatError::MalformedLine {
                line: self.line_no,
                message: e.to_string(),
            });
            self.failed = parsed.is_err();
            return Some(parsed);
        }
    }
}

/// Reads the header line and returns a reader positioned at the first record.
pub fn read_records<R: BufRead>(mut inner: R) -> Result<RecordReader<R>, FormatError> {
    let mut buf = String::new();
    if inner.read_line(&mut buf)? == 0 || buf.trim().is_empty() {
        return Err(FormatError::MissingHeader);
    }
    let value: serde_json::Value = serde_json::from_str(buf.trim()).map_err(|e| FormatError::MalformedLine {
        line: 1,
        message: e.to_string(),
    })?;
    let Some(version) = value.get("format_version") else {
        return Err(FormatError::MissingHeader);
    };
    match version.as_u64() {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(v) => return Err(FormatError::UnsupportedVersion(v.min(u64::from(u32::MAX)) as u32)),
        None => {
            return Err(FormatError::MalformedLine {
                line: 1,
                message: "format_version is not an unsigned integer".into(),
            })
        }
    }
    let header = serde_json::from_value(value).map_err(|e| FormatError::MalformedLine {
        line: 1,
        message: e.to_string(),
    })?;
    Ok(RecordReader {
        inner,
        header,
        line_no: 1,
        buf,
        failed: false,
    })
}

pub fn write_records<'a, W: Write>(
    mut out: W,
    header: &RecordFileHeader,
    records: impl IntoIterator<Item = &'a ActivationRecord>,
) -> io::Result<()> {
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Opens a record file, decompressing transparently when it ends in `.gz`.
pub fn open_record_file(path: &Path) -> Result<RecordReader<Box<dyn BufRead + Send>>, IngestError> {
    let file = File::open(path).map_err(io_err(path))?;
    let inner: Box<dyn BufRead + Send> = if is_gzip(path) {
        Box::new(BufReader::with_capacity(1 << 16, MultiGzDecoder::new(file)))
    } else {
        Box::new(BufReader::with_capacity(1 << 16, file))
    };
    read_records(inner).map_err(|source| IngestError::Format {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a whole record file into memory.
pub fn read_record_file(path: &Path) -> Result<(RecordFileHeader, Vec<ActivationRecord>), IngestError> {
    let reader = open_record_file(path)?;
    let header = reader.header().clone();
    let records = reader
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| IngestError::Format {
            path: path.to_path_buf(),
            source,
        })?;
    Ok((header, records))
}

pub fn write_record_file<'a>(
    path: &Path,
    header: &RecordFileHeader,
    records: impl IntoIterator<Item = &'a ActivationRecord>,
) -> Result<(), IngestError> {
    let file = File::create(path).map_err(io_err(path))?;
    let result = if is_gzip(path) {
        let gz = GzBuilder::new().write(BufWriter::new(file), Compression::default());
        let mut gz = BufWriter::new(gz);
        write_records(&mut gz, header, records).and_then(|_| {
            gz.into_inner()
                .map_err(|e| e.into_error())?
                .finish()?
                .flush()
        })
    } else {
        write_records(BufWriter::new(file), header, records)
    };
    result.map_err(io_err(path))
}

pub fn read_dictionary(path: &Path) -> Result<ConceptDictionary, IngestError> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| {
        if e.is_io() {
            IngestError::Io {
                path: path.to_path_buf(),
                source: e.into(),
            }
        } else {
            IngestError::Document {
                path: path.to_path_buf(),
                message: e.to_string(),
            }
        }
    })
}

pub fn write_dictionary(path: &Path, dictionary: &ConceptDictionary) -> Result<(), IngestError> {
    let mut bytes = serde_json::to_vec_pretty(dictionary).expect("dictionary serializes");
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(io_err(path))
}
