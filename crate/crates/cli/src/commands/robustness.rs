// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use cgaps_core::robustness::{adversarial_ablation, subsample_stability, AblationParams, SubsampleParams};
use clap::{Args, Subcommand};

use super::{load, ConfigArgs};
use crate::error::CliResult;
use crate::run::{create_dir, write_json};

#[derive(Debug, Clone, Args)]
pub struct RobustnessArgs {
    #[command(subcommand)]
    pub mode: Mode,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Mode {
    /// Re-run the analysis on random subsamples and report score dispersion.
    Subsample {
        #[command(flatten)]
        common: Common,
        /// Fraction of each benchmark's records dropped per repetition.
        #[arg(long = "drop", default_value_t = 0.2)]
        drop_fraction: f64,
        #[arg(long, default_value_t = 100)]
        repetitions: usize,
    },
    /// Remove the datapoints most salient for the top and bottom concepts.
    Ablation {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        k_concepts: usize,
        #[arg(long, default_value_t = 100)]
        k_datapoints: usize,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
        /// Most salient datapoints each repetition samples from.
        #[arg(long, default_value_t = 500)]
        candidate_pool: usize,
    },
}

pub fn run(args: RobustnessArgs) -> CliResult<()> {
    match args.mode {
        Mode::Subsample {
            common,
            drop_fraction,
            repetitions,
        } => {
            let params = SubsampleParams {
                drop_fraction,
                repetitions,
                seed: common.seed,
            };
            let (loaded, mut run) = load(&common.manifest, &common.config, "subsample")?;
            let report = subsample_stability(&loaded.suite, &params)?;
            create_dir(&common.out_dir)?;
            write_json(&common.out_dir.join("subsample.json"), &report)?;
            run.seeds = vec![params.seed];
            run.parameters = serde_json::to_value(params).expect("params serialize");
            run.write(&common.out_dir)?;
        }
        Mode::Ablation {
            common,
            k_concepts,
            k_datapoints,
            repetitions,
            candidate_pool,
        } => {
            let params = AblationParams {
                k_concepts,
                k_datapoints,
                repetitions,
                candidate_pool,
                seed: common.seed,
            };
            let (loaded, mut run) = load(&common.manifest, &common.config, "ablation")?;
            let report = adversarial_ablation(&loaded.suite, &params)?;
            create_dir(&common.out_dir)?;
            write_json(&common.out_dir.join("ablation.json"), &report)?;
            run.seeds = vec![params.seed];
            run.parameters = serde_json::to_value(params).expect("params serialize");
            run.write(&common.out_dir)?;
        }
    }
    Ok(())
}
