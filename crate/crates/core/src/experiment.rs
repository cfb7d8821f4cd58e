//! The desk-scale end-to-end run: synthetic cohort, preprocessing, split,
//! teacher, distilled student and ECG-only baseline, all evaluated on the
//! same balanced test set.

use serde::{Deserialize, Serialize};

use crate::biosignal::{split_dataset, synth_cohort, windows_from_record, CohortConfig, DatasetSplit, SignalRecord, SplitPolicy, Windowed};
use crate::distill::{
    evaluate_student, evaluate_teacher, prepare_windows, train_baseline_ecg, train_student, train_teacher,
    PreparedWindow, TrainConfig, TrainReport,
};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::nn::AdamConfig;
use crate::preprocess::Preprocessor;
use crate::res1dcnn::{Res1dCnnConfig, StudentModel, TeacherModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub cohort: CohortConfig,
    pub split: SplitPolicy,
    /// Smallest acceptable per-class training pool after undersampling.
    pub min_train_per_class: usize,
    pub model: Res1dCnnConfig,
    pub teacher: TrainConfig,
    pub student: TrainConfig,
    pub baseline: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk(1)
    }
}

impl ExperimentConfig {
    /// Budget sized for a desktop CPU in minutes rather than hours.
    pub fn desk(seed: u64) -> Self {
        let train = TrainConfig {
            max_iterations: 300,
            eval_every: 25,
            seed,
            adam: AdamConfig {
                lr: 1e-3,
                ..AdamConfig::default()
            },
            ..TrainConfig::default()
        };
        Self {
            seed,
            cohort: CohortConfig {
                seed,
                ..CohortConfig::default()
            },
            split: SplitPolicy {
                val_per_class: 100,
                test_per_class: 200,
            },
            min_train_per_class: 500,
            model: Res1dCnnConfig::default(),
            teacher: train.clone(),
            student: TrainConfig {
                max_iterations: 1200,
                eval_every: 50,
                patience: 10,
                adam: AdamConfig {
                    lr: 1e-2,
                    ..AdamConfig::default()
                },
                ..train.clone()
            },
            baseline: train,
        }
    }

    /// Propagates one seed to every stochastic component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.cohort.seed = seed;
        self.teacher.seed = seed;
        self.student.seed = seed;
        self.baseline.seed = seed;
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        for t in [&self.teacher, &self.student, &self.baseline] {
            t.validate()?;
        }
        let c = &self.cohort;
        let cohort_ok = c.records > 0
            && c.duration_s.is_finite()
            && c.duration_s > 0.0
            && (0.0..1.0).contains(&c.seizure_fraction)
            && c.noise_level.is_finite()
            && c.noise_level >= 0.0;
        if !cohort_ok {
            return Err(Error::InvalidConfig(
                "cohort needs records, a positive duration, a seizure fraction in [0, 1) and finite noise".into(),
            ));
        }
        if self.split.val_per_class == 0 || self.split.test_per_class == 0 {
            return Err(Error::InvalidConfig("validation and test sets must be non-empty".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Synthesizes the cohort, preprocesses every window and splits by record.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<DatasetSplit<PreparedWindow>> {
    prepare_records(&synth_cohort(&cfg.cohort)?, cfg)
}

/// Windows, preprocesses and splits existing records.
pub fn prepare_records(records: &[SignalRecord], cfg: &ExperimentConfig) -> Result<DatasetSplit<PreparedWindow>> {
    let pre = Preprocessor::new()?;
    let mut windows = Vec::new();
    for r in records {
        windows.extend(prepare_windows(&windows_from_record(r)?, &pre)?);
    }
    let split = split_dataset(&windows, cfg.split, cfg.seed)?;
    let seizures = split.train.iter().filter(|w| w.label().is_seizure()).count();
    let minority = seizures.min(split.train.len() - seizures);
    if minority < cfg.min_train_per_class {
        return Err(Error::InsufficientWindows {
            class: if seizures < split.train.len() - seizures { "seizure" } else { "non-seizure" },
            purpose: "training",
            needed: cfg.min_train_per_class,
            available: minority,
        });
    }
    Ok(split)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    pub teacher: MetricsReport,
    pub student: MetricsReport,
    pub baseline: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub data: DatasetSplit<PreparedWindow>,
    pub teacher: TeacherModel,
    pub student: StudentModel,
    pub baseline: StudentModel,
    pub teacher_report: TrainReport,
    pub student_report: TrainReport,
    pub baseline_report: TrainReport,
    pub test: TestMetrics,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let data = prepare_data(cfg)?;
    let (teacher, teacher_report) = train_teacher(&data, &cfg.model, &cfg.teacher)?;
    let (student, student_report) = train_student(&teacher, &data, &cfg.student)?;
    let (baseline, baseline_report) = train_baseline_ecg(&data, &cfg.model, &cfg.baseline)?;
    let test = TestMetrics {
        teacher: evaluate_teacher(&teacher, &data.test)?,
        student: evaluate_student(&student, &data.test)?,
        baseline: evaluate_student(&baseline, &data.test)?,
    };
    Ok(ExperimentOutcome {
        data,
        teacher,
        student,
        baseline,
        teacher_report,
        student_report,
        baseline_report,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_seed() {
        let cfg = ExperimentConfig::desk(3).with_seed(9);
        assert_eq!(cfg.cohort.seed, 9);
        assert_eq!(cfg.baseline.seed, 9);
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert!(ExperimentConfig::from_toml("unknown = 1").is_err());
        let mut bad = cfg.clone();
        bad.cohort.noise_level = f64::NAN;
        assert!(ExperimentConfig::from_toml(&bad.to_toml()).is_err());
        bad = cfg;
        bad.student.adam.lr = 0.0;
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn desk_data_meets_the_size_floor() {
        let split = prepare_data(&ExperimentConfig::desk(1)).unwrap();
        assert_eq!(split.validation.len(), 200);
        assert_eq!(split.test.len(), 400);
        let s = split.train.iter().filter(|w| w.label.is_seizure()).count();
        assert!(s >= 500 && split.train.len() - s >= 500);
    }
}
