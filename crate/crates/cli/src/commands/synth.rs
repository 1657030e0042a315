// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use cgaps_core::ingest::{generate_synthetic, write_dictionary, write_record_file, RecordFileHeader, SyntheticSpec};
use cgaps_core::{ActivationRecord, ConceptId};
use clap::Args;
use rayon::prelude::*;
use serde_json::json;

use crate::error::CliResult;
use crate::run::{create_dir, write_json, RunManifest};

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub benchmarks: usize,
    #[arg(long)]
    pub concepts: usize,
    /// Records per benchmark.
    #[arg(long)]
    pub records: usize,
    /// Probability that a background concept fires on a record.
    #[arg(long, default_value_t = 0.05)]
    pub sparsity: f64,
    /// Concepts that co-occur with high scores (comma separated ids).
    #[arg(long, value_delimiter = ',')]
    pub high: Vec<ConceptId>,
    /// Concepts that co-occur with low scores.
    #[arg(long, value_delimiter = ',')]
    pub low: Vec<ConceptId>,
    /// Concepts that never activate.
    #[arg(long, value_delimiter = ',')]
    pub missing: Vec<ConceptId>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Draw every score from {0, 1}.
    #[arg(long)]
    pub binary_scores: bool,
    /// Write gzipped record files.
    #[arg(long)]
    pub gzip: bool,
    /// Value of the record file headers' `created_at`.
    #[arg(long, default_value = "1970-01-01T00:00:00Z")]
    pub created_at: String,
}

impl SynthArgs {
    fn spec(&self) -> SyntheticSpec {
        let mut spec = SyntheticSpec::new(self.benchmarks, self.concepts, self.records);
        spec.sparsity = self.sparsity;
        spec.planted_high_concepts = self.high.iter().copied().collect::<BTreeSet<_>>();
        spec.planted_low_concepts = self.low.iter().copied().collect();
        spec.planted_missing_concepts = self.missing.iter().copied().collect();
        spec.seed = self.seed;
        spec.binary_scores = self.binary_scores;
        spec
    }
}

pub fn run(args: SynthArgs) -> CliResult<()> {
    let spec = args.spec();
    let (dict, records) = generate_synthetic(&spec)?;
    create_dir(&args.out_dir.join("records"))?;
    write_dictionary(&args.out_dir.join("dictionary.json"), &dict)?;

    let header = RecordFileHeader::new(&dict, args.created_at.clone());
    let ext = if args.gzip { "cgr.gz" } else { "cgr" };
    let names = records.benchmark_names();
    let per = spec.n_records_per_benchmark;
    names.par_iter().enumerate().try_for_each(|(b, name)| -> CliResult<()> {
        let batch: Vec<ActivationRecord> = (b * per..(b + 1) * per).map(|i| records.record(i)).collect();
        let path = args.out_dir.join("records").join(format!("{name}.{ext}"));
        write_record_file(&path, &header, &batch)?;
        Ok(())
    })?;

    let benchmarks: BTreeMap<&String, String> = names.iter().map(|n| (n, format!("records/{n}.{ext}"))).collect();
    let suite_path = args.out_dir.join("suite.json");
    write_json(&suite_path, &json!({ "dictionary": "dictionary.json", "benchmarks": benchmarks }))?;

    let mut run = RunManifest::new("synth");
    run.seeds = vec![spec.seed];
    run.parameters = json!({ "spec": spec, "gzip": args.gzip, "created_at": args.created_at });
    run.write(&args.out_dir)?;
    log::info!("wrote {} records to {}", names.len() * per, args.out_dir.display());
    Ok(())
}
