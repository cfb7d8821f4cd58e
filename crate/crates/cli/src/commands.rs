use std::path::{Path, PathBuf};

use ecg_distill::bench::{battery_life, flop_count, time_inference, EnergyReport, MacCount, PlatformProfile, TimingReport};
use ecg_distill::biosignal::{load_record, save_record, synth_cohort, windows_from_record, ChannelId, RecordFormat};
use ecg_distill::dataset_io::{load_dataset, save_dataset};
use ecg_distill::distill::{self, evaluate_student, evaluate_teacher, train_baseline_ecg, train_student, PreparedWindow, TrainReport};
use ecg_distill::experiment::prepare_records;
use ecg_distill::metrics::{MetricDeltas, MetricsReport};
use ecg_distill::model_io::{load_model, save_model, SavedModel};
use ecg_distill::preprocess::Preprocessor;
use ecg_distill::quant::{
    accuracy_drop, evaluate_quantized, float_payload_bytes, frac_bit_sweep, quantize_model_with, QFormat,
    QuantizationReport, SweepPoint,
};
use ecg_distill::reproduce::{all_pass, published_tables, render, render_unreproduced, unreproduced, TableRow};
use ecg_distill::res1dcnn::StudentModel;
use ecg_distill::nn::Params;
use ecg_distill::Error;
use serde::Serialize;

use crate::run::{apply_train_args, emit, log, At, CliError, RunConfig};
use crate::{Common, Format, Split, TrainArgs};

#[derive(Serialize)]
struct SynthReport {
    run: RunConfig,
    files: Vec<PathBuf>,
    samples_per_record: usize,
}

pub fn synth(
    common: &Common,
    out: &Path,
    records: Option<usize>,
    duration: Option<f64>,
    seizure_fraction: Option<f64>,
    noise: Option<f64>,
    format: Format,
) -> Result<(), CliError> {
    let mut run = RunConfig::new("synth", common)?.output(out);
    let cohort = &mut run.experiment.cohort;
    if let Some(n) = records {
        cohort.records = n;
    }
    if let Some(d) = duration {
        cohort.duration_s = d;
    }
    if let Some(f) = seizure_fraction {
        cohort.seizure_fraction = f;
    }
    if let Some(n) = noise {
        cohort.noise_level = n;
    }
    let cohort = run.experiment.cohort.clone();
    let recs = synth_cohort(&cohort).at("biosignal-io")?;
    std::fs::create_dir_all(out).at("biosignal-io")?;
    let (ext, fmt) = match format {
        Format::Bsr1 => ("bsr1", RecordFormat::Binary),
        Format::Csv => ("csv", RecordFormat::Csv),
    };
    let mut files = Vec::with_capacity(recs.len());
    for r in &recs {
        let path = out.join(format!("{}.{ext}", r.patient_id));
        save_record(r, &path, fmt).at("biosignal-io")?;
        files.push(path);
    }
    log(format!("wrote {} records to {}", files.len(), out.display()));
    let samples_per_record = recs.first().map_or(0, |r| r.len());
    emit(
        common,
        &SynthReport {
            run,
            files,
            samples_per_record,
        },
    )
}

fn record_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).at("biosignal-io")? {
        let path = entry.at("biosignal-io")?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let is_record = name.ends_with(".bsr1") || (name.ends_with(".csv") && !name.ends_with(".annotations.csv"));
        if path.is_file() && is_record {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::Usage(format!("no .bsr1 or .csv records in {}", dir.display())));
    }
    Ok(files)
}

#[derive(Serialize)]
struct PartSize {
    seizure: usize,
    non_seizure: usize,
}

impl PartSize {
    fn of(part: &[PreparedWindow]) -> Self {
        let seizure = part.iter().filter(|w| w.label.is_seizure()).count();
        Self {
            seizure,
            non_seizure: part.len() - seizure,
        }
    }
}

#[derive(Serialize)]
struct PreprocessReport {
    run: RunConfig,
    records: usize,
    train: PartSize,
    validation: PartSize,
    test: PartSize,
}

pub fn preprocess(
    common: &Common,
    input: &Path,
    out: &Path,
    val_per_class: Option<usize>,
    test_per_class: Option<usize>,
    min_train_per_class: Option<usize>,
    dump_stages: Option<&Path>,
) -> Result<(), CliError> {
    let mut run = RunConfig::new("preprocess", common)?.input(input).output(out);
    if let Some(v) = val_per_class {
        run.experiment.split.val_per_class = v;
    }
    if let Some(t) = test_per_class {
        run.experiment.split.test_per_class = t;
    }
    if let Some(m) = min_train_per_class {
        run.experiment.min_train_per_class = m;
    }
    let records = record_files(input)?
        .iter()
        .map(|p| load_record(p, RecordFormat::from_path(p)))
        .collect::<ecg_distill::Result<Vec<_>>>()
        .at("biosignal-io")?;
    if let Some(path) = dump_stages {
        let first = windows_from_record(&records[0]).at("biosignal-io")?;
        let raw = first
            .first()
            .and_then(|w| w.channel(ChannelId::Ecg))
            .ok_or(Error::Empty("windows"))
            .at("preprocess")?;
        let dump = Preprocessor::new().and_then(|p| p.run_with_stages(raw)).at("preprocess")?;
        std::fs::write(path, dump.to_csv()).at("preprocess")?;
        run = run.output(path);
    }
    let split = prepare_records(&records, &run.experiment).at("preprocess")?;
    save_dataset(out, &split).at("preprocess")?;
    log(format!(
        "{} train, {} validation, {} test windows",
        split.train.len(),
        split.validation.len(),
        split.test.len()
    ));
    emit(
        common,
        &PreprocessReport {
            run,
            records: records.len(),
            train: PartSize::of(&split.train),
            validation: PartSize::of(&split.validation),
            test: PartSize::of(&split.test),
        },
    )
}

#[derive(Serialize)]
struct TrainSummary {
    run: RunConfig,
    model: &'static str,
    iterations_run: usize,
    best_iteration: usize,
    stopped_early: bool,
    wall_clock_s: f64,
    final_loss: Option<f64>,
    validation: MetricsReport,
}

fn finish_training(
    common: &Common,
    run: RunConfig,
    model: &SavedModel,
    out: &Path,
    report: &TrainReport,
    args: &TrainArgs,
) -> Result<(), CliError> {
    save_model(out, model).at("res1dcnn")?;
    if let Some(path) = &args.log {
        std::fs::write(path, report.to_jsonl()).at("distill")?;
    }
    log(format!(
        "{}: {} iterations, validation Gmean {:.4}",
        model.kind_name(),
        report.iterations_run,
        report.validation.gmean
    ));
    emit(
        common,
        &TrainSummary {
            run,
            model: model.kind_name(),
            iterations_run: report.iterations_run,
            best_iteration: report.best_iteration,
            stopped_early: report.stopped_early,
            wall_clock_s: report.wall_clock_s,
            final_loss: report.losses.last().copied(),
            validation: report.validation,
        },
    )
}

pub fn train_teacher(common: &Common, data: &Path, out: &Path, args: &TrainArgs) -> Result<(), CliError> {
    let mut run = RunConfig::new("train-teacher", common)?.input(data).output(out);
    apply_train_args(&mut run.experiment.teacher, args)?;
    let split = load_dataset(data).at("preprocess")?;
    let (teacher, report) = distill::train_teacher(&split, &run.experiment.model, &run.experiment.teacher).at("distill")?;
    finish_training(common, run, &SavedModel::Teacher(teacher), out, &report, args)
}

pub fn distill(common: &Common, data: &Path, teacher: &Path, out: &Path, args: &TrainArgs) -> Result<(), CliError> {
    let mut run = RunConfig::new("distill", common)?.input(data).input(teacher).output(out);
    apply_train_args(&mut run.experiment.student, args)?;
    let split = load_dataset(data).at("preprocess")?;
    let teacher = match load_model(teacher).at("res1dcnn")? {
        SavedModel::Teacher(t) => t,
        other => return Err(wrong_kind("a teacher", &other)),
    };
    let (student, report) = train_student(&teacher, &split, &run.experiment.student).at("distill")?;
    finish_training(common, run, &SavedModel::Student(student), out, &report, args)
}

pub fn train_baseline(common: &Common, data: &Path, out: &Path, args: &TrainArgs) -> Result<(), CliError> {
    let mut run = RunConfig::new("train-baseline", common)?.input(data).output(out);
    apply_train_args(&mut run.experiment.baseline, args)?;
    let split = load_dataset(data).at("preprocess")?;
    let (baseline, report) =
        train_baseline_ecg(&split, &run.experiment.model, &run.experiment.baseline).at("distill")?;
    finish_training(common, run, &SavedModel::Student(baseline), out, &report, args)
}

fn wrong_kind(expected: &str, got: &SavedModel) -> CliError {
    CliError::Lib {
        module: "res1dcnn",
        error: Error::TopologyMismatch(format!("expected {expected} model, found a {} model", got.kind_name())),
    }
}

fn load_student(path: &Path) -> Result<StudentModel, CliError> {
    match load_model(path).at("res1dcnn")? {
        SavedModel::Student(s) => Ok(s),
        other => Err(wrong_kind("a float single-branch", &other)),
    }
}

#[derive(Serialize)]
struct QuantizeReport {
    run: RunConfig,
    frac_bits: u32,
    parameters: usize,
    float_payload_bytes: usize,
    fixed_payload_bytes: usize,
    saturation: QuantizationReport,
    accuracy_drop: Option<MetricDeltas>,
    sweep: Option<Vec<SweepPoint>>,
}

pub fn quantize(common: &Common, model: &Path, out: &Path, frac_bits: u32, data: Option<&Path>) -> Result<(), CliError> {
    let mut run = RunConfig::new("quantize", common)?.input(model).output(out);
    let student = load_student(model)?;
    let format = QFormat::new(frac_bits).at("quant")?;
    let (q, saturation) = quantize_model_with(&student, format).at("quant")?;
    for w in saturation.warnings() {
        log(format!("warning: {w}"));
    }
    save_model(out, &SavedModel::Quantized(q.clone())).at("quant")?;
    let (accuracy_drop, sweep) = match data {
        Some(path) => {
            run = run.input(path);
            let split = load_dataset(path).at("preprocess")?;
            (
                Some(accuracy_drop(&student, &q, &split.test).at("quant")?),
                Some(frac_bit_sweep(&student, &split.test, 11..=15).at("quant")?),
            )
        }
        None => (None, None),
    };
    let parameters = student.param_count();
    emit(
        common,
        &QuantizeReport {
            run,
            frac_bits,
            parameters,
            float_payload_bytes: float_payload_bytes(&student),
            fixed_payload_bytes: 2 * parameters,
            saturation,
            accuracy_drop,
            sweep,
        },
    )
}

fn part(split: ecg_distill::biosignal::DatasetSplit<PreparedWindow>, which: Split) -> Vec<PreparedWindow> {
    match which {
        Split::Train => split.train,
        Split::Validation => split.validation,
        Split::Test => split.test,
    }
}

pub fn eval(common: &Common, model: &Path, data: &Path, split: Split, out: Option<&Path>) -> Result<(), CliError> {
    let windows = part(load_dataset(data).at("preprocess")?, split);
    let metrics = match load_model(model).at("res1dcnn")? {
        SavedModel::Student(m) => evaluate_student(&m, &windows),
        SavedModel::Teacher(m) => evaluate_teacher(&m, &windows),
        SavedModel::Quantized(m) => evaluate_quantized(&m, &windows),
    }
    .at("metrics")?;
    if let Some(path) = out {
        std::fs::write(path, format!("{}\n", metrics.to_json())).at("metrics")?;
    }
    emit(common, &metrics)
}

#[derive(Serialize)]
struct BenchReport {
    run: RunConfig,
    model: &'static str,
    macs: MacCount,
    total_macs: u64,
    timing: TimingReport,
    energy: Vec<EnergyReport>,
}

fn profile(name: &str) -> Result<PlatformProfile, CliError> {
    let path = Path::new(name);
    if path.is_file() {
        let text = std::fs::read_to_string(path).at("bench")?;
        PlatformProfile::from_toml(&text).at("bench")
    } else {
        PlatformProfile::bundled(name).at("bench")
    }
}

pub fn bench(
    common: &Common,
    model: &Path,
    data: &Path,
    segments: usize,
    repetitions: usize,
    profiles: &[String],
) -> Result<(), CliError> {
    let run = RunConfig::new("bench", common)?.input(model).input(data);
    let mut windows = load_dataset(data).at("preprocess")?.test;
    windows.truncate(segments);
    let len = windows.first().map_or(0, |w| w.ecg.len());
    let saved = load_model(model).at("res1dcnn")?;
    let (macs, timing) = match &saved {
        SavedModel::Student(m) => (flop_count(m, len), time_inference(m, &windows, repetitions)),
        SavedModel::Teacher(m) => (flop_count(m, len), time_inference(m, &windows, repetitions)),
        SavedModel::Quantized(m) => (flop_count(m, len), time_inference(m, &windows, repetitions)),
    };
    let timing = timing.at("bench")?;
    let names: Vec<String> = if profiles.is_empty() {
        PlatformProfile::bundled_names().into_iter().map(String::from).collect()
    } else {
        profiles.to_vec()
    };
    let energy = names
        .iter()
        .map(|n| profile(n).and_then(|p| battery_life(&p).at("bench")))
        .collect::<Result<Vec<_>, _>>()?;
    emit(
        common,
        &BenchReport {
            run,
            model: saved.kind_name(),
            macs,
            total_macs: macs.total(),
            timing,
            energy,
        },
    )
}

pub fn reproduce_tables(common: &Common, json: bool) -> Result<(), CliError> {
    let rows: Vec<TableRow> = published_tables().at("metrics")?;
    let missing = unreproduced().at("bench")?;
    let report = serde_json::json!({ "rows": rows, "unreproduced": missing });
    if json {
        emit(common, &report)?;
    } else {
        print!("{}{}", render(&rows), render_unreproduced(&missing));
        if let Some(path) = &common.report {
            std::fs::write(path, serde_json::to_string_pretty(&report).expect("rows serialize")).at("cli")?;
        }
    }
    if all_pass(&rows) {
        Ok(())
    } else {
        Err(CliError::Lib {
            module: "metrics",
            error: Error::InvalidConfig("a published figure was not reproduced".into()),
        })
    }
}
