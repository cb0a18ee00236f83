//! Batch driver for the joint acoustic/articulatory modeling pipeline.
//!
//! Every subcommand is a pure function of its flags, config file and seed.
//! Failures map onto a fixed exit-code contract (see [`exit_code`]).

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use jointam_core::arch::{ArchKind, Scale};
use jointam_core::config::KeyValues;
use jointam_core::dsp::FrontEnd;
use jointam_core::inversion::{Condition, Split};
use jointam_core::{Error, Result};

mod corpus;
mod data;
mod inversion;
mod model;
mod report;

pub use data::{load_utterances, results_header, ResultRecord, RESULTS_NAME};

#[derive(Debug, Parser)]
#[command(name = "jointam", version, about = "Joint acoustic and articulatory acoustic modeling")]
pub struct Cli {
    /// Line-oriented `key = value` config file for the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for corpus generation, initialization and shuffling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "toy")]
    pub scale: Scale,
    /// Worker threads for corpus generation.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TvSourceArg {
    GroundTruth,
    Inverted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConditionArg {
    Clean,
    Noisy,
    Both,
}

impl ConditionArg {
    pub fn conditions(self) -> &'static [Condition] {
        match self {
            ConditionArg::Clean => &[Condition::Clean],
            ConditionArg::Noisy => &[Condition::Noisy],
            ConditionArg::Both => &[Condition::Clean, Condition::Noisy],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConditionArg::Clean => "clean",
            ConditionArg::Noisy => "noisy",
            ConditionArg::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Wer,
    Accuracy,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic parallel corpus (audio, TVs, labels, manifest).
    CorpusGen,
    /// Train the NMC-to-TV inversion network on a corpus.
    TrainInversion {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Estimate TVs for wav files, or for one split of a corpus.
    Invert {
        #[arg(long)]
        model: PathBuf,
        /// Corpus whose split is inverted; its stored TVs are the reference.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
        wavs: Vec<PathBuf>,
    },
    /// Write filterbank or NMC feature files for wav files.
    ExtractFeatures {
        #[arg(long, default_value = "fbank")]
        front_end: FrontEnd,
        wavs: Vec<PathBuf>,
    },
    /// Train a frame classifier.
    Train {
        #[arg(long)]
        arch: ArchKind,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "ground-truth")]
        tv_source: TvSourceArg,
        #[arg(long)]
        inversion_model: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        condition: ConditionArg,
        /// Training-set label used in results tables (default: corpus directory name).
        #[arg(long)]
        set_name: Option<String>,
    },
    /// Score a trained model on a corpus split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long, value_enum, default_value = "noisy")]
        condition: ConditionArg,
        #[arg(long, value_enum, default_value = "ground-truth")]
        tv_source: TvSourceArg,
        #[arg(long)]
        inversion_model: Option<PathBuf>,
        /// Results file to append to (default: `<out>/results.tsv`).
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Render a results file as a table with the best row of each panel marked.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_enum, default_value = "wer")]
        metric: MetricArg,
    },
}

/// 0 success, 1 I/O or unreadable file, 2 configuration or precondition,
/// 3 numerical failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Format(_) | Error::Corrupt(_) | Error::Version { .. } => 1,
        Error::Divergence(_) => 3,
        _ => 2,
    }
}

impl Cli {
    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    /// Config keys, empty when no file was given.
    pub fn key_values(&self) -> Result<KeyValues> {
        match &self.config {
            Some(path) => KeyValues::from_file(path),
            None => Ok(KeyValues::default()),
        }
    }
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::CorpusGen => corpus::corpus_gen(cli),
        Command::TrainInversion { corpus } => inversion::train_inversion(cli, corpus),
        Command::Invert {
            model,
            corpus,
            split,
            wavs,
        } => inversion::invert(cli, model, corpus.as_deref(), *split, wavs),
        Command::ExtractFeatures { front_end, wavs } => inversion::extract_features(cli, *front_end, wavs),
        Command::Train {
            arch,
            corpus,
            tv_source,
            inversion_model,
            condition,
            set_name,
        } => model::train(
            cli,
            &model::TrainArgs {
                arch: *arch,
                corpus,
                tv_source: *tv_source,
                inversion_model: inversion_model.as_deref(),
                condition: *condition,
                set_name: set_name.as_deref(),
            },
        ),
        Command::Evaluate {
            model,
            corpus,
            split,
            condition,
            tv_source,
            inversion_model,
            results,
        } => model::evaluate(
            cli,
            &model::EvalArgs {
                model,
                corpus,
                split: *split,
                condition: *condition,
                tv_source: *tv_source,
                inversion_model: inversion_model.as_deref(),
                results: results.as_deref(),
            },
        ),
        Command::Report { results, metric } => report::report(results, *metric),
    }
}
