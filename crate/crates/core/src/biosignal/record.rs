use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Acquisition rate of every record, in Hz.
pub const SAMPLE_RATE: u32 = 256;
/// Samples per analysis window (3 s at 256 Hz).
pub const WINDOW_LEN: usize = 768;
/// Samples shared by consecutive windows.
pub const WINDOW_OVERLAP: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelId {
    Ecg,
    Eeg1,
    Eeg2,
}

impl ChannelId {
    pub const ALL: [ChannelId; 3] = [ChannelId::Ecg, ChannelId::Eeg1, ChannelId::Eeg2];

    pub fn name(self) -> &'static str {
        match self {
            ChannelId::Ecg => "ECG",
            ChannelId::Eeg1 => "EEG1",
            ChannelId::Eeg2 => "EEG2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "ECG" => Some(ChannelId::Ecg),
            "EEG1" => Some(ChannelId::Eeg1),
            "EEG2" => Some(ChannelId::Eeg2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub samples: Vec<f64>,
}

impl Channel {
    pub fn new(name: impl Into<String>, samples: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            samples,
        }
    }
}

/// Half-open sample range `[start_sample, end_sample)` annotated as ictal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeizureInterval {
    pub start_sample: usize,
    pub end_sample: usize,
}

impl SeizureInterval {
    pub fn new(start_sample: usize, end_sample: usize) -> Result<Self> {
        if start_sample >= end_sample {
            return Err(Error::AnnotationOrder {
                start: start_sample as u64,
                end: end_sample as u64,
            });
        }
        Ok(Self {
            start_sample,
            end_sample,
        })
    }

    pub fn len(&self) -> usize {
        self.end_sample - self.start_sample
    }

    pub fn is_empty(&self) -> bool {
        self.end_sample <= self.start_sample
    }

    /// Number of samples of `[start, end)` inside this interval.
    pub fn overlap(&self, start: usize, end: usize) -> usize {
        let lo = self.start_sample.max(start);
        let hi = self.end_sample.min(end);
        hi.saturating_sub(lo)
    }
}

/// Synchronized multi-channel recording with its seizure annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    pub patient_id: String,
    pub sample_rate: u32,
    pub channels: Vec<Channel>,
    pub annotations: Vec<SeizureInterval>,
}

impl SignalRecord {
    /// Builds a record and checks every invariant.
    pub fn new(
        patient_id: impl Into<String>,
        sample_rate: u32,
        channels: Vec<Channel>,
        annotations: Vec<SeizureInterval>,
    ) -> Result<Self> {
        let record = Self {
            patient_id: patient_id.into(),
            sample_rate,
            channels,
            annotations,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate != SAMPLE_RATE {
            return Err(Error::MalformedHeader {
                format: "record",
                reason: format!("sample rate {} Hz, expected {SAMPLE_RATE}", self.sample_rate),
            });
        }
        let Some(first) = self.channels.first() else {
            return Err(Error::MalformedHeader {
                format: "record",
                reason: "no channels".into(),
            });
        };
        let expected = first.samples.len();
        for ch in &self.channels[1..] {
            if ch.samples.len() != expected {
                return Err(Error::ChannelLengthMismatch {
                    channel: ch.name.clone(),
                    len: ch.samples.len(),
                    expected,
                });
            }
        }
        for (i, name) in self.channels.iter().map(|c| &c.name).enumerate() {
            if self.channels[..i].iter().any(|c| &c.name == name) {
                return Err(Error::MalformedHeader {
                    format: "record",
                    reason: format!("duplicate channel {name}"),
                });
            }
        }
        let mut prev_end = 0usize;
        for ann in &self.annotations {
            if ann.start_sample >= ann.end_sample {
                return Err(Error::AnnotationOrder {
                    start: ann.start_sample as u64,
                    end: ann.end_sample as u64,
                });
            }
            if ann.end_sample > expected {
                return Err(Error::AnnotationOutOfRange {
                    start: ann.start_sample as u64,
                    end: ann.end_sample as u64,
                    len: expected,
                });
            }
            if ann.start_sample < prev_end {
                return Err(Error::AnnotationOrder {
                    start: ann.start_sample as u64,
                    end: ann.end_sample as u64,
                });
            }
            prev_end = ann.end_sample;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, |c| c.samples.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, id: ChannelId) -> Option<&[f64]> {
        self.channel_by_name(id.name())
    }

    pub fn channel_by_name(&self, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(name))
            .map(|c| c.samples.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    NonSeizure,
    Seizure,
}

impl Label {
    /// Output-node index of the two-class head.
    pub fn class_index(self) -> usize {
        match self {
            Label::NonSeizure => 0,
            Label::Seizure => 1,
        }
    }

    pub fn is_seizure(self) -> bool {
        self == Label::Seizure
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::NonSeizure => "non-seizure",
            Label::Seizure => "seizure",
        }
    }
}

/// Where a window came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowOrigin {
    pub record: String,
    pub start: usize,
}

/// Raw, labeled window of `WINDOW_LEN` samples per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub channels: Vec<Channel>,
    pub label: Label,
    pub origin: WindowOrigin,
}

impl LabeledWindow {
    pub fn channel(&self, id: ChannelId) -> Option<&[f64]> {
        self.channels
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(id.name()))
            .map(|c| c.samples.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chans(lens: &[usize]) -> Vec<Channel> {
        lens.iter()
            .zip(ChannelId::ALL)
            .map(|(&n, id)| Channel::new(id.name(), vec![0.0; n]))
            .collect()
    }

    #[test]
    fn rejects_unequal_channels() {
        let err = SignalRecord::new("p", SAMPLE_RATE, chans(&[768, 700, 768]), vec![]).unwrap_err();
        assert!(matches!(err, Error::ChannelLengthMismatch { len: 700, .. }));
    }

    #[test]
    fn rejects_overlapping_annotations() {
        let anns = vec![
            SeizureInterval::new(0, 100).unwrap(),
            SeizureInterval::new(50, 200).unwrap(),
        ];
        let err = SignalRecord::new("p", SAMPLE_RATE, chans(&[768; 3]), anns).unwrap_err();
        assert!(matches!(err, Error::AnnotationOrder { .. }));
    }

    #[test]
    fn rejects_annotation_past_end() {
        let anns = vec![SeizureInterval::new(0, 1000).unwrap()];
        let err = SignalRecord::new("p", SAMPLE_RATE, chans(&[768; 3]), anns).unwrap_err();
        assert!(matches!(err, Error::AnnotationOutOfRange { end: 1000, .. }));
    }

    #[test]
    fn interval_overlap() {
        let iv = SeizureInterval::new(10, 20).unwrap();
        assert_eq!(iv.overlap(0, 15), 5);
        assert_eq!(iv.overlap(20, 30), 0);
        assert_eq!(iv.overlap(0, 100), 10);
        assert!(SeizureInterval::new(5, 5).is_err());
    }
}
