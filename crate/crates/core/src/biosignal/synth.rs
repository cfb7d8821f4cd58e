//! Synthetic ECG/EEG generator.
//!
//! ECG is a QRS-like pulse train (70 bpm at rest, 120 bpm inside seizure
//! intervals) with T waves, baseline wander and white noise. Both EEG channels
//! carry 1/f background noise; seizure intervals add 3 Hz spike-and-wave
//! bursts. The morphology is an engineering stand-in with learnable class
//! signatures, nothing more.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::biosignal::record::{Channel, ChannelId, SeizureInterval, SignalRecord, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::rng::{component_rng, Rng};

pub const REST_BPM: f64 = 70.0;
pub const ICTAL_BPM: f64 = 120.0;
pub const SPIKE_WAVE_HZ: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub duration_s: f64,
    /// Seizure intervals in seconds, `[start, end)`.
    pub seizure_intervals: Vec<(f64, f64)>,
    pub noise_level: f64,
    pub seed: u64,
    #[serde(default = "default_patient")]
    pub patient_id: String,
}

fn default_patient() -> String {
    "synth".into()
}

impl SynthConfig {
    pub fn new(duration_s: f64, seizure_intervals: Vec<(f64, f64)>, seed: u64) -> Self {
        Self {
            duration_s,
            seizure_intervals,
            noise_level: 0.05,
            seed,
            patient_id: default_patient(),
        }
    }
}

fn gauss(dt: f64, sigma: f64) -> f64 {
    (-0.5 * (dt / sigma).powi(2)).exp()
}

fn intervals_in_samples(cfg: &SynthConfig, n: usize) -> Result<Vec<SeizureInterval>> {
    let rate = f64::from(SAMPLE_RATE);
    let mut out: Vec<SeizureInterval> = Vec::with_capacity(cfg.seizure_intervals.len());
    let mut sorted = cfg.seizure_intervals.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for &(s, e) in &sorted {
        if !(s.is_finite() && e.is_finite()) || s < 0.0 || e > cfg.duration_s || s >= e {
            return Err(Error::InvalidConfig(format!(
                "seizure interval [{s}, {e}) s outside a {} s record",
                cfg.duration_s
            )));
        }
        let start = (s * rate).round() as usize;
        let end = ((e * rate).round() as usize).min(n);
        let iv = SeizureInterval::new(start, end)?;
        if out.last().is_some_and(|p| p.end_sample > start) {
            return Err(Error::InvalidConfig(format!("seizure intervals overlap at {s} s")));
        }
        out.push(iv);
    }
    Ok(out)
}

fn in_seizure(intervals: &[SeizureInterval], i: usize) -> bool {
    intervals.iter().any(|iv| iv.start_sample <= i && i < iv.end_sample)
}

fn synth_ecg(n: usize, intervals: &[SeizureInterval], noise: f64, rng: &mut Rng) -> Vec<f64> {
    let dt = 1.0 / f64::from(SAMPLE_RATE);
    let hrv_phase = rng.random::<f64>() * 2.0 * PI;
    let wander_phase = rng.random::<f64>() * 2.0 * PI;
    let mut beats = Vec::new();
    let mut phase = rng.random::<f64>();
    for i in 0..n {
        let t = i as f64 * dt;
        let base = if in_seizure(intervals, i) { ICTAL_BPM } else { REST_BPM };
        let bpm = base + 3.0 * (2.0 * PI * 0.1 * t + hrv_phase).sin();
        phase += bpm / 60.0 * dt;
        if phase >= 1.0 {
            phase -= 1.0;
            beats.push((t, 0.9 + 0.2 * rng.random::<f64>()));
        }
    }
    let mut x = vec![0.0; n];
    for (i, v) in x.iter_mut().enumerate() {
        let t = i as f64 * dt;
        *v = 0.1 * (2.0 * PI * 0.3 * t + wander_phase).sin();
    }
    for &(tb, amp) in &beats {
        let lo = ((tb - 0.2) / dt).floor().max(0.0) as usize;
        let hi = (((tb + 0.5) / dt).ceil() as usize).min(n);
        for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
            let d = i as f64 * dt - tb;
            *v += amp * (gauss(d, 0.010) - 0.15 * gauss(d + 0.025, 0.008) - 0.2 * gauss(d - 0.025, 0.008))
                + 0.25 * amp * gauss(d - 0.25, 0.04);
        }
    }
    for v in &mut x {
        let e: f64 = StandardNormal.sample(rng);
        *v += noise * e;
    }
    x
}

/// Pink (1/f) noise via Kellet's economy filter over white noise.
fn pink_noise(n: usize, rng: &mut Rng) -> Vec<f64> {
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    (0..n)
        .map(|_| {
            let w: f64 = StandardNormal.sample(rng);
            b0 = 0.99765 * b0 + w * 0.0990460;
            b1 = 0.96300 * b1 + w * 0.2965164;
            b2 = 0.57000 * b2 + w * 1.0526913;
            (b0 + b1 + b2 + w * 0.1848) * 0.25
        })
        .collect()
}

fn synth_eeg(n: usize, intervals: &[SeizureInterval], noise: f64, gain: f64, rng: &mut Rng) -> Vec<f64> {
    let dt = 1.0 / f64::from(SAMPLE_RATE);
    let mut x = pink_noise(n, rng);
    let period = 1.0 / SPIKE_WAVE_HZ;
    for iv in intervals {
        let t0 = iv.start_sample as f64 * dt;
        for (i, v) in x.iter_mut().enumerate().take(iv.end_sample).skip(iv.start_sample) {
            let tau = (i as f64 * dt - t0) % period;
            *v += gain * (3.0 * gauss(tau - 0.03, 0.012) - 1.5 * gauss(tau - 0.17, 0.05));
        }
    }
    for v in &mut x {
        let e: f64 = StandardNormal.sample(rng);
        *v += noise * e;
    }
    x
}

/// Generates one synchronized three-channel record. Deterministic per seed.
pub fn synth_record(cfg: &SynthConfig) -> Result<SignalRecord> {
    if !(cfg.duration_s.is_finite() && cfg.duration_s > 0.0) {
        return Err(Error::InvalidConfig(format!("duration {} s must be positive", cfg.duration_s)));
    }
    if !(cfg.noise_level.is_finite() && cfg.noise_level >= 0.0) {
        return Err(Error::InvalidConfig("noise level must be finite and non-negative".into()));
    }
    let n = (cfg.duration_s * f64::from(SAMPLE_RATE)).round() as usize;
    let intervals = intervals_in_samples(cfg, n)?;
    let ecg = synth_ecg(n, &intervals, cfg.noise_level, &mut component_rng(cfg.seed, "synth-ecg"));
    let eeg1 = synth_eeg(n, &intervals, cfg.noise_level, 1.0, &mut component_rng(cfg.seed, "synth-eeg1"));
    let eeg2 = synth_eeg(n, &intervals, cfg.noise_level, 0.8, &mut component_rng(cfg.seed, "synth-eeg2"));
    SignalRecord::new(
        cfg.patient_id.clone(),
        SAMPLE_RATE,
        vec![
            Channel::new(ChannelId::Ecg.name(), ecg),
            Channel::new(ChannelId::Eeg1.name(), eeg1),
            Channel::new(ChannelId::Eeg2.name(), eeg2),
        ],
        intervals,
    )
}

/// A population of synthetic records, each with at most one seizure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortConfig {
    pub records: usize,
    pub duration_s: f64,
    /// Fraction of each record covered by its seizure.
    pub seizure_fraction: f64,
    pub noise_level: f64,
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            records: 120,
            duration_s: 60.0,
            seizure_fraction: 0.5,
            noise_level: 0.05,
            seed: 1,
        }
    }
}

pub fn synth_cohort(cfg: &CohortConfig) -> Result<Vec<SignalRecord>> {
    if !(0.0..1.0).contains(&cfg.seizure_fraction) {
        return Err(Error::InvalidConfig("seizure fraction must lie in [0, 1)".into()));
    }
    let mut layout = component_rng(cfg.seed, "cohort-layout");
    (0..cfg.records)
        .map(|k| {
            let len = cfg.duration_s * cfg.seizure_fraction;
            let intervals = if len > 0.0 {
                let start = layout.random::<f64>() * (cfg.duration_s - len);
                vec![(start, start + len)]
            } else {
                Vec::new()
            };
            let record_seed = crate::rng::derive_seed(cfg.seed, &format!("cohort-record-{k}"));
            synth_record(&SynthConfig {
                duration_s: cfg.duration_s,
                seizure_intervals: intervals,
                noise_level: cfg.noise_level,
                seed: record_seed,
                patient_id: format!("synth-{k:04}"),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_seconds_no_seizure() {
        let rec = synth_record(&SynthConfig::new(3.0, vec![], 7)).unwrap();
        assert_eq!(rec.len(), 768);
        assert!(rec.annotations.is_empty());
        assert_eq!(rec.channels.len(), 3);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SynthConfig::new(3.0, vec![], 7);
        let a = synth_record(&cfg).unwrap();
        let b = synth_record(&cfg).unwrap();
        for (x, y) in a.channels.iter().zip(&b.channels) {
            let xb: Vec<u64> = x.samples.iter().map(|v| v.to_bits()).collect();
            let yb: Vec<u64> = y.samples.iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
        }
        let c = synth_record(&SynthConfig::new(3.0, vec![], 8)).unwrap();
        assert_ne!(a.channels[0].samples, c.channels[0].samples);
    }

    #[test]
    fn ten_second_seizure_spans_2560_samples() {
        let rec = synth_record(&SynthConfig::new(60.0, vec![(20.0, 30.0)], 1)).unwrap();
        assert_eq!(rec.len(), 60 * 256);
        assert_eq!(rec.annotations.len(), 1);
        assert_eq!(rec.annotations[0].len(), 2560);
        assert_eq!(rec.annotations[0].start_sample, 20 * 256);
    }

    #[test]
    fn interval_past_duration_is_error() {
        assert!(synth_record(&SynthConfig::new(10.0, vec![(5.0, 12.0)], 1)).is_err());
        assert!(synth_record(&SynthConfig::new(0.0, vec![], 1)).is_err());
    }

    #[test]
    fn seizure_raises_heart_rate() {
        // Count R peaks (local maxima above 0.6) in rest vs. ictal halves.
        let mut cfg = SynthConfig::new(60.0, vec![(30.0, 60.0)], 3);
        cfg.noise_level = 0.0;
        let rec = synth_record(&cfg).unwrap();
        let ecg = rec.channel(ChannelId::Ecg).unwrap();
        let peaks = |lo: usize, hi: usize| {
            (lo + 1..hi - 1)
                .filter(|&i| ecg[i] > 0.6 && ecg[i] >= ecg[i - 1] && ecg[i] > ecg[i + 1])
                .count()
        };
        let rest = peaks(0, 30 * 256);
        let ictal = peaks(30 * 256, 60 * 256);
        assert!((30..=40).contains(&rest), "rest beats {rest}");
        assert!((55..=65).contains(&ictal), "ictal beats {ictal}");
    }
}
