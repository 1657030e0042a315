// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::path::Path;

use cgaps_core::export::ExportError;
use cgaps_core::ingest::{IngestError, SynthError};
use cgaps_core::robustness::RobustnessError;
use cgaps_core::{MetricsError, SuiteError};

/// Exit codes: 0 success, 2 invalid input or arguments, 3 filesystem
/// failure, 4 external service failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Validation = 2,
    Io = 3,
    Service = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Validation,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Self {
            kind: ExitKind::Io,
            message: format!("{}: {err}", path.display()),
        }
    }

    pub fn service(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Service,
            message: message.into(),
        }
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        let kind = if e.is_io() { ExitKind::Io } else { ExitKind::Validation };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        let kind = match e {
            ExportError::Io { .. } | ExportError::Csv(_) => ExitKind::Io,
            _ => ExitKind::Validation,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

macro_rules! validation_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::validation(e.to_string())
            }
        }
    )*};
}

validation_from!(MetricsError, RobustnessError, SuiteError, SynthError);

pub type CliResult<T> = Result<T, CliError>;
