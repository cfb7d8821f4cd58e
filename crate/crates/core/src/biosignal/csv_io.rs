//! CSV record format.
//!
//! Signal file: header `t,ecg,eeg1,eeg2`, one row per sample, `t` in seconds.
//! A column may end early (empty trailing cells); that surfaces as a
//! channel-length mismatch. Annotation file: optional header
//! `start_sample,end_sample`, then one interval per line.

use std::fmt::Write as _;

use crate::biosignal::record::{Channel, ChannelId, SeizureInterval, SignalRecord, SAMPLE_RATE};
use crate::error::{Error, Result};

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Csv(e.to_string())
}

pub fn parse_signal(text: &str, annotations: Option<&str>, patient_id: &str) -> Result<SignalRecord> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.get(0) != Some("t") || headers.len() < 2 {
        return Err(Error::MalformedHeader {
            format: "csv",
            reason: format!("expected header starting with `t,` and at least one channel, got {:?}", headers.iter().collect::<Vec<_>>()),
        });
    }
    let mut channels: Vec<Channel> = Vec::with_capacity(headers.len() - 1);
    for name in headers.iter().skip(1) {
        let name = ChannelId::from_name(name).map_or_else(|| name.to_owned(), |id| id.name().to_owned());
        channels.push(Channel::new(name, Vec::new()));
    }
    for (row_idx, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err)?;
        if row.len() > headers.len() {
            return Err(Error::Csv(format!("row {} has {} fields", row_idx + 2, row.len())));
        }
        for (col, ch) in channels.iter_mut().enumerate() {
            let cell = row.get(col + 1).unwrap_or("");
            if cell.is_empty() {
                continue;
            }
            if ch.samples.len() != row_idx {
                return Err(Error::Csv(format!("gap in column {} at row {}", ch.name, row_idx + 2)));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Csv(format!("bad number {cell:?} at row {}", row_idx + 2)))?;
            ch.samples.push(v);
        }
    }
    let annotations = match annotations {
        Some(text) => parse_annotations(text)?,
        None => Vec::new(),
    };
    SignalRecord::new(patient_id, SAMPLE_RATE, channels, annotations)
}

pub fn parse_annotations(text: &str) -> Result<Vec<SeizureInterval>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("start")) {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::Csv(format!("annotation line {} is not `start,end`", i + 1)))?;
        let start: u64 = a.trim().parse().map_err(|_| Error::Csv(format!("bad annotation start on line {}", i + 1)))?;
        let end: u64 = b.trim().parse().map_err(|_| Error::Csv(format!("bad annotation end on line {}", i + 1)))?;
        if start >= end {
            return Err(Error::AnnotationOrder { start, end });
        }
        out.push(SeizureInterval {
            start_sample: usize::try_from(start).map_err(|_| Error::AnnotationOutOfRange { start, end, len: 0 })?,
            end_sample: usize::try_from(end).map_err(|_| Error::AnnotationOutOfRange { start, end, len: 0 })?,
        });
    }
    Ok(out)
}

/// Renders the signal CSV. Floats use Rust's shortest round-trip form, so
/// writing and re-reading is bit-exact.
pub fn write_signal(record: &SignalRecord) -> String {
    let mut out = String::from("t");
    for ch in &record.channels {
        out.push(',');
        out.push_str(&ch.name.to_ascii_lowercase());
    }
    out.push('\n');
    let rate = f64::from(record.sample_rate);
    for i in 0..record.len() {
        let _ = write!(out, "{}", i as f64 / rate);
        for ch in &record.channels {
            let _ = write!(out, ",{}", ch.samples[i]);
        }
        out.push('\n');
    }
    out
}

pub fn write_annotations(record: &SignalRecord) -> String {
    let mut out = String::from("start_sample,end_sample\n");
    for a in &record.annotations {
        let _ = writeln!(out, "{},{}", a.start_sample, a.end_sample);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_header_and_annotations() {
        let mut text = String::from("t,ecg,eeg1,eeg2\n");
        for i in 0..768 {
            text.push_str(&format!("{},{},{},{}\n", i as f64 / 256.0, i, -(i as f64), 0.5));
        }
        let rec = parse_signal(&text, Some("start_sample,end_sample\n10,20\n"), "p").unwrap();
        assert_eq!(rec.len(), 768);
        assert_eq!(rec.channel(ChannelId::Eeg1).unwrap()[3], -3.0);
        assert_eq!(rec.annotations, vec![SeizureInterval::new(10, 20).unwrap()]);
    }

    #[test]
    fn annotation_past_end_is_range_error() {
        let mut text = String::from("t,ecg,eeg1,eeg2\n");
        for i in 0..768 {
            text.push_str(&format!("{i},1,2,3\n"));
        }
        let err = parse_signal(&text, Some("0,1000\n"), "p").unwrap_err();
        assert!(matches!(err, Error::AnnotationOutOfRange { end: 1000, len: 768, .. }));
    }

    #[test]
    fn short_column_is_length_mismatch() {
        let mut text = String::from("t,ecg,eeg1,eeg2\n");
        for i in 0..10 {
            if i < 8 {
                text.push_str(&format!("{i},1,2,3\n"));
            } else {
                text.push_str(&format!("{i},1,,3\n"));
            }
        }
        let err = parse_signal(&text, None, "p").unwrap_err();
        assert!(matches!(err, Error::ChannelLengthMismatch { len: 8, expected: 10, .. }));
    }

    #[test]
    fn bad_header() {
        assert!(matches!(
            parse_signal("x,ecg\n1,2\n", None, "p").unwrap_err(),
            Error::MalformedHeader { .. }
        ));
    }

    #[test]
    fn write_then_parse_is_exact() {
        let ch = |n: &str, k: f64| Channel::new(n, (0..50).map(|i| (i as f64 * k).sin() / 3.0).collect());
        let rec = SignalRecord::new(
            "p",
            SAMPLE_RATE,
            vec![ch("ECG", 0.1), ch("EEG1", 0.7), ch("EEG2", 1.3)],
            vec![SeizureInterval::new(3, 9).unwrap()],
        )
        .unwrap();
        let back = parse_signal(&write_signal(&rec), Some(&write_annotations(&rec)), "p").unwrap();
        assert_eq!(back, rec);
    }
}
