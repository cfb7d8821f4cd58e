use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::distill::PreparedWindow;
use crate::error::{Error, Result};
use crate::quant::QuantizedModel;
use crate::res1dcnn::{StudentModel, TeacherModel};

/// Anything that turns one prepared window into class probabilities.
pub trait InferenceModel {
    fn model_name(&self) -> &str;
    fn infer(&self, window: &PreparedWindow) -> Result<Vec<f64>>;
}

impl InferenceModel for StudentModel {
    fn model_name(&self) -> &str {
        "student"
    }

    fn infer(&self, window: &PreparedWindow) -> Result<Vec<f64>> {
        self.forward(&window.ecg)
    }
}

impl InferenceModel for TeacherModel {
    fn model_name(&self) -> &str {
        "teacher"
    }

    fn infer(&self, window: &PreparedWindow) -> Result<Vec<f64>> {
        let (a, b, c) = window.all_channels()?;
        self.forward(a, b, c)
    }
}

impl InferenceModel for QuantizedModel {
    fn model_name(&self) -> &str {
        "quantized-student"
    }

    fn infer(&self, window: &PreparedWindow) -> Result<Vec<f64>> {
        Ok(self.forward(&window.ecg)?.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub model: String,
    pub repetitions: usize,
    pub segments: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    /// Median over repetitions of the per-repetition mean.
    pub median_of_means_ms: f64,
    pub repetition_means_ms: Vec<f64>,
}

impl TimingReport {
    /// Whether the mean latency fits within `period_s`.
    pub fn is_real_time(&self, period_s: f64) -> bool {
        self.mean_ms / 1000.0 <= period_s
    }
}

/// Wall-clock latency per segment. One untimed pass over the segments
/// warms caches first.
pub fn time_inference<M: InferenceModel + ?Sized>(
    model: &M,
    segments: &[PreparedWindow],
    repetitions: usize,
) -> Result<TimingReport> {
    if segments.is_empty() {
        return Err(Error::Empty("timing segments"));
    }
    if repetitions == 0 {
        return Err(Error::InvalidConfig("at least one repetition is required".into()));
    }
    for w in segments {
        std::hint::black_box(model.infer(w)?);
    }
    let mut samples = Vec::with_capacity(repetitions * segments.len());
    let mut means = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let first = samples.len();
        for w in segments {
            let t = Instant::now();
            std::hint::black_box(model.infer(w)?);
            samples.push(t.elapsed().as_secs_f64() * 1000.0);
        }
        let rep = &samples[first..];
        means.push(rep.iter().sum::<f64>() / rep.len() as f64);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std = (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
    let median_of_means = median(&mut means.clone());
    Ok(TimingReport {
        model: model.model_name().to_owned(),
        repetitions,
        segments: segments.len(),
        mean_ms: mean,
        std_ms: std,
        median_of_means_ms: median_of_means,
        repetition_means_ms: means,
    })
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        (xs[mid - 1] + xs[mid]) / 2.0
    }
}

/// Latency of `a` over `b`: both run back to back on each segment, and the
/// ratio is taken between the median single-inference times.
pub fn latency_ratio<A, B>(a: &A, b: &B, segments: &[PreparedWindow], repetitions: usize) -> Result<f64>
where
    A: InferenceModel + ?Sized,
    B: InferenceModel + ?Sized,
{
    if segments.is_empty() {
        return Err(Error::Empty("timing segments"));
    }
    if repetitions == 0 {
        return Err(Error::InvalidConfig("at least one repetition is required".into()));
    }
    for w in segments {
        std::hint::black_box(a.infer(w)?);
        std::hint::black_box(b.infer(w)?);
    }
    let mut ta = Vec::with_capacity(repetitions * segments.len());
    let mut tb = Vec::with_capacity(repetitions * segments.len());
    for _ in 0..repetitions {
        for w in segments {
            let t = Instant::now();
            std::hint::black_box(a.infer(w)?);
            ta.push(t.elapsed().as_secs_f64());
            let t = Instant::now();
            std::hint::black_box(b.infer(w)?);
            tb.push(t.elapsed().as_secs_f64());
        }
    }
    let (ma, mb) = (median(&mut ta), median(&mut tb));
    if mb <= 0.0 {
        return Err(Error::NonFinite("latency ratio"));
    }
    Ok(ma / mb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biosignal::{Label, WindowOrigin};
    use crate::res1dcnn::{build_res1dcnn, Res1dCnnConfig};

    fn window() -> PreparedWindow {
        PreparedWindow {
            ecg: (0..128).map(|i| (i as f64 * 0.2).sin()).collect(),
            eeg1: None,
            eeg2: None,
            label: Label::NonSeizure,
            origin: WindowOrigin {
                record: "r".into(),
                start: 0,
            },
        }
    }

    #[test]
    fn report_shape() {
        let m = build_res1dcnn(&Res1dCnnConfig::reduced(128), 1).unwrap();
        let r = time_inference(&m, &[window(), window()], 3).unwrap();
        assert_eq!((r.repetitions, r.segments, r.repetition_means_ms.len()), (3, 2, 3));
        assert!(r.std_ms >= 0.0 && r.mean_ms > 0.0);
        assert!(r.is_real_time(3.0));
        assert!(time_inference(&m, &[], 1).is_err());
        assert!(time_inference(&m, &[window()], 0).is_err());
    }

    #[test]
    fn latency_ratio_tracks_work() {
        let small = build_res1dcnn(&Res1dCnnConfig::reduced(128), 1).unwrap();
        let big = build_res1dcnn(&Res1dCnnConfig { input_len: 128, ..Res1dCnnConfig::default() }, 1).unwrap();
        let segs = vec![window(); 4];
        assert!(latency_ratio(&big, &small, &segs, 3).unwrap() > 1.0);
        assert!(latency_ratio(&big, &small, &[], 3).is_err());
        assert!(latency_ratio(&big, &small, &segs, 0).is_err());
    }

    #[test]
    fn teacher_needs_eeg() {
        let t = crate::res1dcnn::build_teacher(&Res1dCnnConfig::reduced(128), 1).unwrap();
        assert!(matches!(time_inference(&t, &[window()], 1), Err(Error::MissingChannel(_))));
    }
}
