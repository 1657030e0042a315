// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cgaps_core::assist::{AssistClient, AssistConfig, AssistError, HttpTransport, Placeholder, PromptTemplate, Substitutions};
use cgaps_core::export::{read_structured_report, ReportFormat, StructuredReport};
use cgaps_core::{Concept, ConceptId, CoverageClass};
use clap::Args;
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::run::{create_dir, read_json, write_json, RunManifest};

#[derive(Debug, Clone, Args)]
pub struct GapsArgs {
    /// Output directory of a previous `analyze` run.
    #[arg(long)]
    pub analysis_dir: PathBuf,
    /// Where to write gaps.json (default: the analysis directory).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Chat-completion service settings; enables relevance filtering.
    #[arg(long, value_name = "FILE")]
    pub assist_config: Option<PathBuf>,
    /// JSON object mapping benchmark names to short definitions; enables
    /// per-benchmark filtering of each benchmark's missing concepts.
    #[arg(long, value_name = "FILE")]
    pub benchmark_definitions: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapEntry {
    pub id: ConceptId,
    pub label: String,
    pub value: Option<f64>,
}

#[derive(Debug, Default, Serialize)]
struct BenchmarkGaps {
    missing: Vec<ConceptId>,
    underrepresented: Vec<ConceptId>,
    overrepresented: Vec<ConceptId>,
}

#[derive(Debug, Serialize)]
struct Relevant {
    concepts: Vec<GapEntry>,
    chunks: usize,
    requests: usize,
    discarded: usize,
}

#[derive(Debug, Default, Serialize)]
struct AssistSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    relevant_missing: Option<Relevant>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    relevant_missing_per_benchmark: BTreeMap<String, Relevant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct GapsDocument {
    sae_id: String,
    model_id: String,
    generated_at: String,
    missing: Vec<GapEntry>,
    underrepresented: Vec<GapEntry>,
    overrepresented: Vec<GapEntry>,
    model_gaps: Vec<GapEntry>,
    per_benchmark: BTreeMap<String, BenchmarkGaps>,
    #[serde(skip_serializing_if = "Option::is_none")]
    assist: Option<AssistSection>,
}

fn entries(report: &StructuredReport, ids: impl IntoIterator<Item = usize>, model: bool) -> Vec<GapEntry> {
    let a = &report.analysis;
    ids.into_iter()
        .map(|i| GapEntry {
            id: a.concepts[i],
            label: report.labels[i].clone(),
            value: if model { a.cross_performance[i] } else { Some(a.cross_coverage[i]) },
        })
        .collect()
}

fn listing(report: &StructuredReport) -> GapsDocument {
    let a = &report.analysis;
    let in_class = |class| (0..a.concepts.len()).filter(move |&i| a.coverage_class[i] == class);
    let gaps = (0..a.concepts.len()).filter(|&i| a.model_gaps.contains(&a.concepts[i]));
    let per_benchmark = a
        .benchmarks
        .iter()
        .enumerate()
        .map(|(b, name)| {
            let mut g = BenchmarkGaps::default();
            for (i, class) in a.per_benchmark_coverage_class[b].iter().enumerate() {
                match class {
                    CoverageClass::Missing => g.missing.push(a.concepts[i]),
                    CoverageClass::Underrepresented => g.underrepresented.push(a.concepts[i]),
                    CoverageClass::Overrepresented => g.overrepresented.push(a.concepts[i]),
                    CoverageClass::Mid => {}
                }
            }
            (name.clone(), g)
        })
        .collect();
    GapsDocument {
        sae_id: report.sae_id.clone(),
        model_id: report.model_id.clone(),
        generated_at: report.generated_at.clone(),
        missing: entries(report, in_class(CoverageClass::Missing), false),
        underrepresented: entries(report, in_class(CoverageClass::Underrepresented), false),
        overrepresented: entries(report, in_class(CoverageClass::Overrepresented), false),
        model_gaps: entries(report, gaps, true),
        per_benchmark,
        assist: None,
    }
}

fn concepts_of(report: &StructuredReport, ids: &[ConceptId]) -> Vec<Concept> {
    ids.iter()
        .map(|&id| {
            let i = report.analysis.concept_index(id).expect("id comes from the report");
            Concept {
                id,
                label: report.labels[i].clone(),
            }
        })
        .collect()
}

fn run_assist(
    report: &StructuredReport,
    doc: &GapsDocument,
    config: AssistConfig,
    definitions: &BTreeMap<String, String>,
    section: &mut AssistSection,
) -> Result<(), AssistError> {
    let transport = HttpTransport::from_config(&config)?;
    let client = AssistClient::new(config, transport)?;
    let relevant = |outcome: cgaps_core::assist::FilterOutcome| Relevant {
        concepts: entries(
            report,
            outcome.ids.iter().map(|&id| report.analysis.concept_index(id).expect("closed world")),
            false,
        ),
        chunks: outcome.chunks,
        requests: outcome.requests,
        discarded: outcome.discarded,
    };

    let missing: Vec<ConceptId> = doc.missing.iter().map(|e| e.id).collect();
    let outcome = client.filter_concepts(
        PromptTemplate::MissingCrossBenchmark,
        &Substitutions::new(),
        &concepts_of(report, &missing),
    )?;
    section.relevant_missing = Some(relevant(outcome));

    for (name, definition) in definitions {
        let Some(gaps) = doc.per_benchmark.get(name) else {
            log::warn!("no benchmark named {name:?} in the analysis; skipping its definition");
            continue;
        };
        let subs = Substitutions::new()
            .with(Placeholder::BenchmarkName, name.clone())
            .with(Placeholder::BenchmarkDefinition, definition.clone());
        let outcome = client.filter_concepts(
            PromptTemplate::MissingPerBenchmark,
            &subs,
            &concepts_of(report, &gaps.missing),
        )?;
        section.relevant_missing_per_benchmark.insert(name.clone(), relevant(outcome));
    }
    Ok(())
}

fn report_path(dir: &Path) -> PathBuf {
    dir.join(ReportFormat::Structured.file_name())
}

pub fn run(args: GapsArgs) -> CliResult<()> {
    let path = report_path(&args.analysis_dir);
    let report = read_structured_report(&path)?;
    let assist_config: Option<AssistConfig> = args.assist_config.as_deref().map(read_json).transpose()?;
    let definitions: BTreeMap<String, String> = match &args.benchmark_definitions {
        Some(p) => read_json(p)?,
        None => BTreeMap::new(),
    };
    if assist_config.is_none() && !definitions.is_empty() {
        return Err(CliError::validation("--benchmark-definitions needs --assist-config"));
    }

    let mut doc = listing(&report);
    let mut failure = None;
    if let Some(config) = assist_config {
        let mut section = AssistSection::default();
        if let Err(e) = run_assist(&report, &doc, config, &definitions, &mut section) {
            log::error!("assist failed; writing the unfiltered lists: {e}");
            if let AssistError::UnparseableResponse { raw } = &e {
                log::debug!("unparseable response: {raw}");
            }
            section.error = Some(e.to_string());
            failure = Some(e);
        }
        doc.assist = Some(section);
    }

    let out_dir = args.out_dir.unwrap_or(args.analysis_dir);
    create_dir(&out_dir)?;
    write_json(&out_dir.join("gaps.json"), &doc)?;
    let mut run = RunManifest::new("gaps");
    run.add_input(&path)?;
    for p in [&args.assist_config, &args.benchmark_definitions].into_iter().flatten() {
        run.add_input(p)?;
    }
    run.config = Some(report.analysis.config);
    run.parameters = json!({ "assist": args.assist_config.is_some() });
    run.write(&out_dir)?;

    match failure {
        Some(AssistError::InvalidConfig(m)) => Err(CliError::validation(m)),
        Some(AssistError::Prompt(e)) => Err(CliError::validation(e.to_string())),
        Some(e) => Err(CliError::service(format!("assist: {e}"))),
        None => Ok(()),
    }
}
