// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cgaps_core::export::{build_static_bundle, read_structured_report, BundleOptions, ReportFormat, StaticBundle};
use cgaps_core::ingest::load_suite;
use clap::Args;

use crate::error::{CliError, CliResult, ExitKind};
use crate::run::RunManifest;

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// A bundle directory, or the output directory of `analyze`.
    pub dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Where to write the bundle built from an analysis directory
    /// (default: DIR/bundle).
    #[arg(long)]
    pub bundle_out: Option<PathBuf>,
    /// Write the bundle and exit without serving.
    #[arg(long)]
    pub build_only: bool,
    /// Example datapoints per score group in concept details.
    #[arg(long, default_value_t = BundleOptions::default().top_k_examples)]
    pub top_k: usize,
    /// Rows per concept page.
    #[arg(long, default_value_t = BundleOptions::default().page_size)]
    pub page_size: usize,
}

fn is_bundle(dir: &Path) -> bool {
    dir.join("manifest.json").is_file()
}

fn is_analysis(dir: &Path) -> bool {
    dir.join(ReportFormat::Structured.file_name()).is_file() && dir.join("run-analyze.json").is_file()
}

/// Rebuilds the suite recorded by an analyze run and derives its bundle.
fn build_from_analysis(dir: &Path, options: BundleOptions) -> CliResult<StaticBundle> {
    let run = RunManifest::read(&dir.join("run-analyze.json"))?;
    let stale = run.stale_inputs();
    if !stale.is_empty() {
        return Err(CliError::validation(format!(
            "inputs changed since the analysis ran: {}",
            stale.join(", ")
        )));
    }
    let (Some(manifest), Some(config)) = (run.suite_manifest.as_deref(), run.config) else {
        return Err(CliError::validation("run-analyze.json lacks the suite manifest or config"));
    };
    let report = read_structured_report(&dir.join(ReportFormat::Structured.file_name()))?;
    let loaded = load_suite(manifest, &config)?;
    Ok(build_static_bundle(&loaded.suite, &report.analysis, &report.generated_at, options)?)
}

fn serve_error(e: cgaps_serve::ServeError) -> CliError {
    CliError {
        kind: ExitKind::Io,
        message: e.to_string(),
    }
}

pub fn run(args: ServeArgs, threads: Option<usize>) -> CliResult<()> {
    if args.page_size == 0 {
        return Err(CliError::validation("--page-size must be at least 1"));
    }
    let bundle = if is_bundle(&args.dir) {
        StaticBundle::load(&args.dir)?
    } else if is_analysis(&args.dir) {
        let options = BundleOptions {
            top_k_examples: args.top_k,
            page_size: args.page_size,
        };
        let bundle = build_from_analysis(&args.dir, options)?;
        let out = args.bundle_out.clone().unwrap_or_else(|| args.dir.join("bundle"));
        bundle.write(&out)?;
        log::info!("wrote bundle to {}", out.display());
        bundle
    } else {
        return Err(CliError::validation(format!(
            "{}: neither a bundle (manifest.json) nor an analysis directory (report.json, run-analyze.json)",
            args.dir.display()
        )));
    };
    if args.build_only {
        return Ok(());
    }

    let mut rt = tokio::runtime::Builder::new_multi_thread();
    if let Some(n) = threads {
        rt.worker_threads(n);
    }
    let rt = rt.enable_all().build().map_err(|e| CliError::io(Path::new("<runtime>"), e))?;
    rt.block_on(async move {
        let listener = cgaps_serve::bind(args.bind).await.map_err(serve_error)?;
        if let Ok(addr) = listener.local_addr() {
            println!("listening on http://{addr}");
            let _ = std::io::stdout().flush();
        }
        cgaps_serve::serve_on(listener, Arc::new(bundle)).await.map_err(serve_error)
    })
}
