//! `ecg-distill`: the pipeline from synthetic records to benchmarked,
//! quantized ECG-only models.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use run::CliError;

#[derive(Debug, Parser)]
#[command(name = "ecg-distill", version, about = "Seizure detection from ECG, distilled from an ECG+EEG teacher")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every pipeline step.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment configuration (TOML); flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run seed, propagated to every stochastic component.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Bsr1,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Training overrides.
#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Line-oriented JSON training log, one record per evaluation.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic cohort of ECG/EEG records.
    Synth {
        #[arg(long, default_value = "records")]
        out: PathBuf,
        #[arg(long)]
        records: Option<usize>,
        /// Record length in seconds.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        seizure_fraction: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, value_enum, default_value = "bsr1")]
        format: Format,
    },
    /// Window, filter, detrend and standardize records, then split them.
    Preprocess {
        /// Directory of `.bsr1` or `.csv` records.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "dataset.pwd")]
        out: PathBuf,
        #[arg(long)]
        val_per_class: Option<usize>,
        #[arg(long)]
        test_per_class: Option<usize>,
        #[arg(long)]
        min_train_per_class: Option<usize>,
        /// CSV of the preprocessing stages of the first ECG window.
        #[arg(long)]
        dump_stages: Option<PathBuf>,
    },
    /// Train the three-branch ECG+EEG teacher.
    TrainTeacher {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "teacher.r1dc")]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Distill an ECG-only student from a trained teacher.
    Distill {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        teacher: PathBuf,
        #[arg(long, default_value = "student.r1dc")]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Train the ECG-only network directly on labels.
    TrainBaseline {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "baseline.r1dc")]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Convert a float student to 16-bit fixed point.
    Quantize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "student-q.r1dc")]
        out: PathBuf,
        #[arg(long, default_value_t = 13)]
        frac_bits: u32,
        /// Dataset for the accuracy drop and the fractional-bit sweep.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Detection metrics of a model on one part of a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
        /// Metrics JSON output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Operation counts, measured latency and battery life.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 50)]
        segments: usize,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
        /// Bundled profile name or TOML file; repeatable. Defaults to all
        /// bundled profiles.
        #[arg(long)]
        profile: Vec<String>,
    },
    /// Recompute the published detection and energy figures.
    ReproduceTables {
        /// Print JSON rows instead of a table.
        #[arg(long)]
        json: bool,
    },
}

fn dispatch(command: Command, common: &Common) -> Result<(), CliError> {
    match command {
        Command::Synth {
            out,
            records,
            duration,
            seizure_fraction,
            noise,
            format,
        } => commands::synth(common, &out, records, duration, seizure_fraction, noise, format),
        Command::Preprocess {
            input,
            out,
            val_per_class,
            test_per_class,
            min_train_per_class,
            dump_stages,
        } => commands::preprocess(
            common,
            &input,
            &out,
            val_per_class,
            test_per_class,
            min_train_per_class,
            dump_stages.as_deref(),
        ),
        Command::TrainTeacher { data, out, train } => commands::train_teacher(common, &data, &out, &train),
        Command::Distill {
            data,
            teacher,
            out,
            train,
        } => commands::distill(common, &data, &teacher, &out, &train),
        Command::TrainBaseline { data, out, train } => commands::train_baseline(common, &data, &out, &train),
        Command::Quantize {
            model,
            out,
            frac_bits,
            data,
        } => commands::quantize(common, &model, &out, frac_bits, data.as_deref()),
        Command::Eval { model, data, split, out } => commands::eval(common, &model, &data, split, out.as_deref()),
        Command::Bench {
            model,
            data,
            segments,
            repetitions,
            profile,
        } => commands::bench(common, &model, &data, segments, repetitions, &profile),
        Command::ReproduceTables { json } => commands::reproduce_tables(common, json),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command, &cli.common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
