// SPDX-License-Identifier: Apache-2.0

pub mod analyze;
pub mod gaps;
pub mod robustness;
pub mod serve;
pub mod synth;

use std::path::Path;

use cgaps_core::ingest::{load_suite, LoadedSuite, SuiteManifest};
use cgaps_core::AnalysisConfig;
use clap::Args;

use crate::error::{CliError, CliResult};
use crate::run::{absolute, read_json, RunManifest};

/// Analysis settings shared by `analyze` and `robustness`. Precedence, last
/// wins: built-in defaults, the suite manifest's `config`, `--config`, flags.
#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// JSON file with any subset of the analysis config fields.
    #[arg(long, value_name = "FILE")]
    pub config: Option<std::path::PathBuf>,
    /// Coverage floor below which a concept counts as missing.
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    /// Percentile at or below which a concept is underrepresented.
    #[arg(long, allow_hyphen_values = true)]
    pub under_percentile: Option<f64>,
    /// Percentile at or above which a concept is overrepresented.
    #[arg(long, allow_hyphen_values = true)]
    pub over_percentile: Option<f64>,
    /// Drop activations of concepts missing from the dictionary instead of failing.
    #[arg(long)]
    pub lenient: bool,
}

impl ConfigArgs {
    pub fn resolve(&self, manifest: &SuiteManifest) -> CliResult<AnalysisConfig> {
        let mut config = manifest.config.unwrap_or_default();
        if let Some(path) = &self.config {
            let overlay: serde_json::Value = read_json(path)?;
            let serde_json::Value::Object(fields) = overlay else {
                return Err(CliError::validation(format!("{}: expected a JSON object", path.display())));
            };
            let mut merged = serde_json::to_value(config).expect("config serializes");
            let target = merged.as_object_mut().expect("config is an object");
            for (k, v) in fields {
                if !target.contains_key(&k) {
                    return Err(CliError::validation(format!("{}: unknown config field {k:?}", path.display())));
                }
                target.insert(k, v);
            }
            config = serde_json::from_value(merged)
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        }
        if let Some(v) = self.epsilon {
            config.epsilon = v;
        }
        if let Some(v) = self.under_percentile {
            config.under_percentile = v;
        }
        if let Some(v) = self.over_percentile {
            config.over_percentile = v;
        }
        if self.lenient {
            config.strict_concepts = false;
        }
        config.validate().map_err(|e| CliError::validation(e.to_string()))?;
        Ok(config)
    }
}

/// Loads a suite and starts a run manifest recording its inputs.
pub fn load(manifest_path: &Path, args: &ConfigArgs, command: &str) -> CliResult<(LoadedSuite, RunManifest)> {
    let manifest = SuiteManifest::read(manifest_path)?;
    let config = args.resolve(&manifest)?;
    let loaded = load_suite(manifest_path, &config)?;
    if loaded.dropped_unknown > 0 {
        log::warn!("dropped {} activation(s) of unknown concepts", loaded.dropped_unknown);
    }
    let mut run = RunManifest::new(command);
    run.config = Some(config);
    run.suite_manifest = Some(absolute(manifest_path)?);
    run.add_input(manifest_path)?;
    if let Some(path) = &args.config {
        run.add_input(path)?;
    }
    for file in loaded.manifest.input_files() {
        run.add_input(&file)?;
    }
    Ok((loaded, run))
}

/// The latest `created_at` among the record file headers.
pub fn generated_at(loaded: &LoadedSuite) -> String {
    loaded
        .headers
        .iter()
        .map(|(_, h)| h.created_at.as_str())
        .max()
        .unwrap_or("")
        .to_string()
}
