// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use cgaps_core::analyze;
use cgaps_core::export::{export_report, ReportFormat, StructuredReport};
use clap::Args;
use serde_json::json;

use super::{generated_at, load, ConfigArgs};
use crate::error::CliResult;
use crate::run::create_dir;

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Suite manifest naming the dictionary and record files.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn run(args: AnalyzeArgs) -> CliResult<()> {
    let (loaded, mut run) = load(&args.manifest, &args.config, "analyze")?;
    let config = run.config.expect("load sets the config");
    let result = analyze(&loaded.suite, &config)?;
    let report = StructuredReport::new(loaded.suite.dictionary(), result, generated_at(&loaded))?;

    create_dir(&args.out_dir)?;
    for format in [ReportFormat::Structured, ReportFormat::Tabular] {
        export_report(&args.out_dir, &report, format)?;
    }
    run.parameters = json!({
        "records": loaded.suite.record_count(),
        "dropped_unknown": loaded.dropped_unknown,
        "thresholds": report.analysis.thresholds,
    });
    run.write(&args.out_dir)?;
    log::info!(
        "analyzed {} concepts over {} benchmarks; {} model gaps",
        report.analysis.concepts.len(),
        report.analysis.benchmarks.len(),
        report.analysis.model_gaps.len()
    );
    Ok(())
}
