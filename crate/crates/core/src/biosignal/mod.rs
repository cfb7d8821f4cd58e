//! Synchronized ECG/EEG recordings: file formats, synthesis, window labeling,
//! class balancing and dataset splits.

pub mod bsr1;
pub mod csv_io;
mod dataset;
mod record;
pub mod synth;

use std::path::Path;

pub use dataset::{
    label_window, label_window_with, record_ids, split_dataset, undersample, undersample_indices,
    windows_from_record, DatasetSplit, SplitPolicy, Windowed, SEIZURE_OVERLAP_THRESHOLD,
};
pub use record::{
    Channel, ChannelId, Label, LabeledWindow, SeizureInterval, SignalRecord, WindowOrigin, SAMPLE_RATE,
    WINDOW_LEN, WINDOW_OVERLAP,
};
pub use synth::{synth_cohort, synth_record, CohortConfig, SynthConfig};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Binary,
    Csv,
}

impl RecordFormat {
    /// Guesses from the extension: `.csv` is CSV, anything else `BSR1`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => RecordFormat::Csv,
            _ => RecordFormat::Binary,
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("record")
        .to_owned()
}

/// Companion annotation file of a CSV record: `<stem>.annotations.csv`.
pub fn annotation_path(path: &Path) -> std::path::PathBuf {
    path.with_file_name(format!("{}.annotations.csv", stem(path)))
}

/// Loads a record; the patient id is the file stem.
pub fn load_record(path: &Path, format: RecordFormat) -> Result<SignalRecord> {
    match format {
        RecordFormat::Binary => bsr1::decode(&std::fs::read(path)?, &stem(path)),
        RecordFormat::Csv => {
            let text = std::fs::read_to_string(path)?;
            let ann_path = annotation_path(path);
            let ann = if ann_path.exists() {
                Some(std::fs::read_to_string(ann_path)?)
            } else {
                None
            };
            csv_io::parse_signal(&text, ann.as_deref(), &stem(path))
        }
    }
}

pub fn save_record(record: &SignalRecord, path: &Path, format: RecordFormat) -> Result<()> {
    match format {
        RecordFormat::Binary => std::fs::write(path, bsr1::encode(record)?)?,
        RecordFormat::Csv => {
            std::fs::write(path, csv_io::write_signal(record))?;
            std::fs::write(annotation_path(path), csv_io::write_annotations(record))?;
        }
    }
    Ok(())
}
