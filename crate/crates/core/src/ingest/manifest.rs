// SPDX-License-Identifier: Apache-2.0

//! Suite manifests: one JSON document naming the dictionary and the record
//! files of every benchmark. Relative paths resolve against the manifest's
//! directory.
//!
//! ```json
//! {
//!   "dictionary": "dictionary.json",
//!   "benchmarks": { "mmlu": ["mmlu.cgr"], "gsm8k": "gsm8k.cgr.gz" },
//!   "config": { "epsilon": 1e-5 }
//! }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::format::{read_dictionary, read_record_file, RecordFileHeader};
use super::IngestError;
use crate::domain::{AnalysisConfig, SuiteBuilder, SuiteIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(PathBuf),
    Many(Vec<PathBuf>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub dictionary: PathBuf,
    #[serde(deserialize_with = "one_or_many")]
    pub benchmarks: BTreeMap<String, Vec<PathBuf>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<AnalysisConfig>,
}

fn one_or_many<'de, D>(d: D) -> Result<BTreeMap<String, Vec<PathBuf>>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let raw = BTreeMap::<String, OneOrMany>::deserialize(d)?;
    Ok(raw
        .into_iter()
        .map(|(k, v)| match v {
            OneOrMany::One(p) => (k, vec![p]),
            OneOrMany::Many(ps) => (k, ps),
        })
        .collect())
}

impl SuiteManifest {
    /// Reads a manifest and resolves its paths against the manifest directory.
    pub fn read(path: &Path) -> Result<Self, IngestError> {
        let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut manifest: SuiteManifest = serde_json::from_slice(&bytes).map_err(|e| IngestError::Document {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        manifest.dictionary = base.join(&manifest.dictionary);
        for files in manifest.benchmarks.values_mut() {
            for f in files.iter_mut() {
                *f = base.join(&*f);
            }
        }
        Ok(manifest)
    }

    /// Every file the manifest references, dictionary first.
    pub fn input_files(&self) -> Vec<PathBuf> {
        std::iter::once(self.dictionary.clone())
            .chain(self.benchmarks.values().flatten().cloned())
            .collect()
    }
}

#[derive(Debug)]
pub struct LoadedSuite {
    pub suite: SuiteIndex,
    pub manifest: SuiteManifest,
    pub headers: Vec<(PathBuf, RecordFileHeader)>,
    /// Unknown concept ids dropped in non-strict mode.
    pub dropped_unknown: usize,
}

/// Loads and validates every file named by the manifest at `path`.
pub fn load_suite(path: &Path, config: &AnalysisConfig) -> Result<LoadedSuite, IngestError> {
    let manifest = SuiteManifest::read(path)?;
    let dictionary = read_dictionary(&manifest.dictionary)?;

    let jobs: Vec<(&String, &PathBuf)> = manifest
        .benchmarks
        .iter()
        .flat_map(|(name, files)| files.iter().map(move |f| (name, f)))
        .collect();
    let parsed: Vec<_> = jobs
        .par_iter()
        .map(|&(name, file)| read_record_file(file).map(|(h, recs)| (name, file, h, recs)))
        .collect::<Result<_, _>>()?;

    let mut builder = SuiteBuilder::new(dictionary.clone(), *config)?;
    let mut headers = Vec::with_capacity(parsed.len());
    for (name, file, header, records) in parsed {
        for (field, expected, found) in [
            ("sae_id", dictionary.sae_id(), header.sae_id.as_str()),
            ("model_id", dictionary.model_id(), header.model_id.as_str()),
        ] {
            if expected != found {
                return Err(IngestError::HeaderMismatch {
                    path: file.clone(),
                    field,
                    expected: expected.to_string(),
                    found: found.to_string(),
                });
            }
        }
        for record in records {
            if &record.benchmark != name {
                return Err(IngestError::BenchmarkMismatch {
                    path: file.clone(),
                    datapoint_id: record.datapoint_id,
                    expected: name.clone(),
                    found: record.benchmark,
                });
            }
            builder.push(record)?;
        }
        headers.push((file.clone(), header));
    }
    let dropped_unknown = builder.dropped_unknown();
    Ok(LoadedSuite {
        suite: builder.finish()?,
        manifest,
        headers,
        dropped_unknown,
    })
}
