// SPDX-License-Identifier: Apache-2.0

//! Run manifests and small filesystem helpers shared by the commands.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use cgaps_core::AnalysisConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Written next to every command's outputs as `run-<command>.json`.
/// Holds no timestamps, so reruns produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<AnalysisConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite_manifest: Option<PathBuf>,
    /// Absolute path to lowercase hex SHA-256 of the file contents.
    pub inputs: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub parameters: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config: None,
            suite_manifest: None,
            inputs: BTreeMap::new(),
            seeds: Vec::new(),
            parameters: serde_json::Value::Object(Default::default()),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> CliResult<()> {
        let abs = absolute(path)?;
        let digest = sha256_file(&abs)?;
        self.inputs.insert(abs.display().to_string(), digest);
        Ok(())
    }

    pub fn file_name(&self) -> String {
        format!("run-{}.json", self.command)
    }

    pub fn write(&self, out_dir: &Path) -> CliResult<PathBuf> {
        let path = out_dir.join(self.file_name());
        write_json(&path, self)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        read_json(path)
    }

    /// Inputs whose current contents no longer match the recorded digest.
    pub fn stale_inputs(&self) -> Vec<String> {
        self.inputs
            .iter()
            .filter(|(path, digest)| sha256_file(Path::new(path)).map_or(true, |d| &d != *digest))
            .map(|(path, _)| path.clone())
            .collect()
    }
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn absolute(path: &Path) -> CliResult<PathBuf> {
    std::fs::canonicalize(path).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let write = || -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()
    };
    write().map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}
