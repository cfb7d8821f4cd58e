use std::fmt::Write as _;

use crate::biosignal::{ChannelId, WindowOrigin, SAMPLE_RATE, WINDOW_LEN};
use crate::error::{Error, Result};
use crate::preprocess::butterworth::{design_butterworth, FilterCoefficients};

pub const FILTER_ORDER: usize = 10;
pub const CUTOFF_HZ: f64 = 50.0;
/// Below this standard deviation a segment standardizes to all zeros.
pub const DEGENERATE_STD: f64 = 1e-8;

/// Start indices of every full window: `0, stride, 2*stride, ...` with
/// `stride = window - overlap`. The trailing partial window is dropped.
pub fn segment_starts(len: usize, window: usize, overlap: usize) -> Result<Vec<usize>> {
    if window == 0 || overlap >= window {
        return Err(Error::InvalidConfig(format!("window {window} with overlap {overlap}")));
    }
    if len < window {
        return Err(Error::SignalTooShort { len, window });
    }
    let stride = window - overlap;
    let count = (len - window) / stride + 1;
    Ok((0..count).map(|k| k * stride).collect())
}

pub fn segment(channel: &[f64], window: usize, overlap: usize) -> Result<Vec<&[f64]>> {
    Ok(segment_starts(channel.len(), window, overlap)?
        .into_iter()
        .map(|s| &channel[s..s + window])
        .collect())
}

fn check_len(segment: &[f64]) -> Result<()> {
    if segment.len() != WINDOW_LEN {
        return Err(Error::shape("segment", WINDOW_LEN, segment.len()));
    }
    Ok(())
}

pub fn lowpass(segment: &[f64], coeffs: &FilterCoefficients) -> Result<Vec<f64>> {
    check_len(segment)?;
    Ok(coeffs.filter(segment))
}

/// Subtracts the least-squares line through `(t, x[t])`, `t = 0..n`.
pub fn detrend(segment: &[f64]) -> Result<Vec<f64>> {
    let n = segment.len();
    if n < 2 {
        return Err(Error::shape("detrend", ">= 2 samples", n));
    }
    let nf = n as f64;
    let t_mean = (nf - 1.0) / 2.0;
    let x_mean = segment.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &x) in segment.iter().enumerate() {
        let dt = i as f64 - t_mean;
        sxy += dt * (x - x_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    Ok(segment
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - x_mean) - slope * (i as f64 - t_mean))
        .collect())
}

/// Standardized window ready for a network.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessedSegment {
    pub samples: Vec<f64>,
    pub channel: Option<ChannelId>,
    pub origin: Option<WindowOrigin>,
}

impl PreprocessedSegment {
    /// Wraps already-standardized samples.
    pub fn from_samples(samples: Vec<f64>) -> Self {
        Self {
            samples,
            channel: None,
            origin: None,
        }
    }
}

/// Zero mean, unit population variance; all zeros when degenerate.
pub fn standardize_values(segment: &[f64]) -> Vec<f64> {
    let n = segment.len() as f64;
    let mean = segment.iter().sum::<f64>() / n;
    let var = segment.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std >= DEGENERATE_STD) {
        return vec![0.0; segment.len()];
    }
    segment.iter().map(|x| (x - mean) / std).collect()
}

pub fn standardize(segment: &[f64]) -> Result<PreprocessedSegment> {
    check_len(segment)?;
    Ok(PreprocessedSegment::from_samples(standardize_values(segment)))
}

/// Low-pass, detrend, standardize, in that order.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    coeffs: FilterCoefficients,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self::new().expect("default filter parameters are valid")
    }
}

/// Every intermediate of one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct StageDump {
    pub raw: Vec<f64>,
    pub filtered: Vec<f64>,
    pub detrended: Vec<f64>,
    pub standardized: Vec<f64>,
}

impl StageDump {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("raw,filtered,detrended,standardized\n");
        for i in 0..self.raw.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.raw[i], self.filtered[i], self.detrended[i], self.standardized[i]
            );
        }
        out
    }
}

impl Preprocessor {
    pub fn new() -> Result<Self> {
        Ok(Self {
            coeffs: design_butterworth(FILTER_ORDER, CUTOFF_HZ, f64::from(SAMPLE_RATE))?,
        })
    }

    pub fn coefficients(&self) -> &FilterCoefficients {
        &self.coeffs
    }

    pub fn run(&self, raw: &[f64]) -> Result<PreprocessedSegment> {
        let filtered = lowpass(raw, &self.coeffs)?;
        let detrended = detrend(&filtered)?;
        standardize(&detrended)
    }

    pub fn run_with_stages(&self, raw: &[f64]) -> Result<StageDump> {
        let filtered = lowpass(raw, &self.coeffs)?;
        let detrended = detrend(&filtered)?;
        let standardized = standardize(&detrended)?.samples;
        Ok(StageDump {
            raw: raw.to_vec(),
            filtered,
            detrended,
            standardized,
        })
    }
}

/// One-shot pipeline with the default filter.
pub fn preprocess_pipeline(raw: &[f64]) -> Result<PreprocessedSegment> {
    Preprocessor::new()?.run(raw)
}
