use crate::biosignal::{ChannelId, Label, LabeledWindow, WindowOrigin, Windowed};
use crate::error::{Error, Result};
use crate::preprocess::Preprocessor;

/// A labeled window after preprocessing, one standardized signal per channel.
/// EEG channels are optional so that ECG-only data can be represented.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedWindow {
    pub ecg: Vec<f64>,
    pub eeg1: Option<Vec<f64>>,
    pub eeg2: Option<Vec<f64>>,
    pub label: Label,
    pub origin: WindowOrigin,
}

impl Windowed for PreparedWindow {
    fn label(&self) -> Label {
        self.label
    }

    fn record_id(&self) -> &str {
        &self.origin.record
    }
}

impl PreparedWindow {
    pub fn prepare(window: &LabeledWindow, pre: &Preprocessor) -> Result<Self> {
        let run = |id: ChannelId| -> Result<Option<Vec<f64>>> {
            window.channel(id).map(|raw| pre.run(raw).map(|s| s.samples)).transpose()
        };
        Ok(Self {
            ecg: run(ChannelId::Ecg)?.ok_or(Error::MissingChannel(ChannelId::Ecg.name().into()))?,
            eeg1: run(ChannelId::Eeg1)?,
            eeg2: run(ChannelId::Eeg2)?,
            label: window.label,
            origin: window.origin.clone(),
        })
    }

    /// ECG, EEG1 and EEG2, or the name of the first missing channel.
    pub fn all_channels(&self) -> Result<(&[f64], &[f64], &[f64])> {
        let eeg1 = self.eeg1.as_deref().ok_or(Error::MissingChannel(ChannelId::Eeg1.name().into()))?;
        let eeg2 = self.eeg2.as_deref().ok_or(Error::MissingChannel(ChannelId::Eeg2.name().into()))?;
        Ok((&self.ecg, eeg1, eeg2))
    }

    pub fn without_eeg(&self) -> Self {
        Self {
            eeg1: None,
            eeg2: None,
            ..self.clone()
        }
    }
}

pub fn prepare_windows(windows: &[LabeledWindow], pre: &Preprocessor) -> Result<Vec<PreparedWindow>> {
    windows.iter().map(|w| PreparedWindow::prepare(w, pre)).collect()
}

pub(crate) fn require_eeg(windows: &[PreparedWindow]) -> Result<()> {
    windows.iter().try_for_each(|w| w.all_channels().map(|_| ()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biosignal::{synth_record, windows_from_record, SynthConfig};

    #[test]
    fn prepares_every_channel() {
        let rec = synth_record(&SynthConfig::new(12.0, vec![(3.0, 9.0)], 2)).unwrap();
        let windows = windows_from_record(&rec).unwrap();
        let prepared = prepare_windows(&windows, &Preprocessor::default()).unwrap();
        assert_eq!(prepared.len(), windows.len());
        for p in &prepared {
            let (a, b, c) = p.all_channels().unwrap();
            assert_eq!((a.len(), b.len(), c.len()), (768, 768, 768));
            let mean = a.iter().sum::<f64>() / 768.0;
            assert!(mean.abs() < 1e-9);
        }
        assert!(matches!(prepared[0].without_eeg().all_channels(), Err(Error::MissingChannel(_))));
    }
}
