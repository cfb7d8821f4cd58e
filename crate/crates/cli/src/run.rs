//! Run configuration, error classes and report output.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use ecg_distill::distill::TrainConfig;
use ecg_distill::experiment::ExperimentConfig;
use ecg_distill::{Error, ErrorClass};
use serde::Serialize;

use crate::{Common, TrainArgs};

#[derive(Debug)]
pub enum CliError {
    /// A library failure, tagged with the module it came from.
    Lib { module: &'static str, error: Error },
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib { error, .. } => match error.class() {
                ErrorClass::Usage => 2,
                ErrorClass::Io => 3,
                ErrorClass::Invariant => 4,
                ErrorClass::Numerical => 5,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Lib { module, error } => write!(f, "[{module}] {error}"),
            CliError::Usage(msg) => write!(f, "[cli] {msg}"),
        }
    }
}

pub trait At<T> {
    fn at(self, module: &'static str) -> Result<T, CliError>;
}

impl<T> At<T> for ecg_distill::Result<T> {
    fn at(self, module: &'static str) -> Result<T, CliError> {
        self.map_err(|error| CliError::Lib { module, error })
    }
}

impl<T> At<T> for std::io::Result<T> {
    fn at(self, module: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::Lib {
            module,
            error: Error::Io(e),
        })
    }
}

/// Everything needed to repeat a run, given the same input files.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub seed: u64,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    pub fn new(command: &'static str, common: &Common) -> Result<Self, CliError> {
        let experiment = load_config(common)?;
        Ok(Self {
            command,
            seed: experiment.seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            experiment,
        })
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.to_path_buf());
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.to_path_buf());
        self
    }
}

/// The config file (or the desk defaults), then `--seed` on top.
pub fn load_config(common: &Common) -> Result<ExperimentConfig, CliError> {
    let cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).at("cli")?;
            ExperimentConfig::from_toml(&text).at("cli")?
        }
        None => ExperimentConfig::desk(common.seed.unwrap_or(1)),
    };
    Ok(match common.seed {
        Some(seed) => cfg.with_seed(seed),
        None => cfg,
    })
}

pub fn apply_train_args(cfg: &mut TrainConfig, args: &TrainArgs) -> Result<(), CliError> {
    if let Some(n) = args.iterations {
        cfg.max_iterations = n;
    }
    if let Some(lr) = args.lr {
        cfg.adam.lr = lr;
    }
    if let Some(b) = args.batch_size {
        cfg.batch_size = b;
    }
    if let Some(e) = args.eval_every {
        cfg.eval_every = e;
    }
    if let Some(p) = args.patience {
        cfg.patience = p;
    }
    cfg.validate().at("distill")
}

/// Prints `report` as JSON and copies it to `--report` when given.
pub fn emit<T: Serialize>(common: &Common, report: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e).at("cli"),
        _ => {}
    }
    if let Some(path) = &common.report {
        std::fs::write(path, format!("{text}\n")).at("cli")?;
    }
    Ok(())
}

pub fn log(line: impl AsRef<str>) {
    eprintln!("{}", line.as_ref());
}
