//! Confusion matrices and the five per-segment detection metrics.

use serde::{Deserialize, Serialize};

use crate::biosignal::Label;
use crate::error::{Error, Result};

/// Counts with seizure as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub const fn new(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        Self { tp, fn_, fp, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn record(&mut self, predicted: Label, actual: Label) {
        match (actual, predicted) {
            (Label::Seizure, Label::Seizure) => self.tp += 1,
            (Label::Seizure, Label::NonSeizure) => self.fn_ += 1,
            (Label::NonSeizure, Label::Seizure) => self.fp += 1,
            (Label::NonSeizure, Label::NonSeizure) => self.tn += 1,
        }
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self::new(self.tp + other.tp, self.fn_ + other.fn_, self.fp + other.fp, self.tn + other.tn)
    }
}

pub fn confusion(predictions: &[Label], labels: &[Label]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::shape("predictions vs labels", labels.len(), predictions.len()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &a) in predictions.iter().zip(labels) {
        cm.record(p, a);
    }
    Ok(cm)
}

/// A metric value in [0, 1]. `degenerate` marks a zero denominator, in which
/// case the value is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    pub degenerate: bool,
}

impl Ratio {
    fn of(num: f64, den: f64) -> Self {
        if den == 0.0 {
            Self {
                value: 0.0,
                degenerate: true,
            }
        } else {
            Self {
                value: num / den,
                degenerate: false,
            }
        }
    }

    /// Percentage rounded half-up to two decimals.
    pub fn percent(&self) -> f64 {
        round_percent(self.value)
    }
}

pub fn round_percent(value: f64) -> f64 {
    // The offset absorbs representation error, e.g. 0.12345 * 10^4 = 1234.4999...
    (value * 10_000.0 + 0.5 + 1e-7).floor() / 100.0
}

pub fn sensitivity(cm: &ConfusionMatrix) -> Ratio {
    Ratio::of(cm.tp as f64, (cm.tp + cm.fn_) as f64)
}

pub fn specificity(cm: &ConfusionMatrix) -> Ratio {
    Ratio::of(cm.tn as f64, (cm.fp + cm.tn) as f64)
}

pub fn gmean(cm: &ConfusionMatrix) -> Ratio {
    let (sen, spe) = (sensitivity(cm), specificity(cm));
    Ratio {
        value: (sen.value * spe.value).sqrt(),
        degenerate: sen.degenerate || spe.degenerate,
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Ratio {
    Ratio::of((cm.tp + cm.tn) as f64, cm.total() as f64)
}

pub fn f1(cm: &ConfusionMatrix) -> Ratio {
    Ratio::of(2.0 * cm.tp as f64, (2 * cm.tp + cm.fp + cm.fn_) as f64)
}

/// All five metrics of one confusion matrix, as fractions in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
    pub sen: f64,
    pub spe: f64,
    pub gmean: f64,
    pub acc: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub degenerate: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl MetricsReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self> {
        if cm.total() == 0 {
            return Err(Error::Empty("confusion matrix"));
        }
        let r = [sensitivity(cm), specificity(cm), gmean(cm), accuracy(cm), f1(cm)];
        Ok(Self {
            tp: cm.tp,
            fn_: cm.fn_,
            fp: cm.fp,
            tn: cm.tn,
            sen: r[0].value,
            spe: r[1].value,
            gmean: r[2].value,
            acc: r[3].value,
            f1: r[4].value,
            degenerate: r.iter().any(|x| x.degenerate),
        })
    }

    pub fn evaluate(predictions: &[Label], labels: &[Label]) -> Result<Self> {
        Self::from_confusion(&confusion(predictions, labels)?)
    }

    pub fn confusion(&self) -> ConfusionMatrix {
        ConfusionMatrix::new(self.tp, self.fn_, self.fp, self.tn)
    }

    /// `[sen, spe, gmean, acc, f1]`.
    pub fn values(&self) -> [f64; 5] {
        [self.sen, self.spe, self.gmean, self.acc, self.f1]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

/// `other - self` for every metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricDeltas {
    pub sen: f64,
    pub spe: f64,
    pub gmean: f64,
    pub acc: f64,
    pub f1: f64,
}

impl MetricDeltas {
    pub fn between(reference: &MetricsReport, other: &MetricsReport) -> Self {
        Self {
            sen: other.sen - reference.sen,
            spe: other.spe - reference.spe,
            gmean: other.gmean - reference.gmean,
            acc: other.acc - reference.acc,
            f1: other.f1 - reference.f1,
        }
    }
}

/// The three published confusion matrices (baseline, teacher, student).
pub mod published {
    use super::ConfusionMatrix;

    pub const BASELINE: ConfusionMatrix = ConfusionMatrix::new(634, 150, 160, 624);
    pub const TEACHER: ConfusionMatrix = ConfusionMatrix::new(682, 102, 34, 750);
    pub const STUDENT: ConfusionMatrix = ConfusionMatrix::new(671, 113, 44, 740);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{NonSeizure as N, Seizure as S};

    fn labels(n_pos: usize, n_neg: usize) -> Vec<Label> {
        let mut v = vec![S; n_pos];
        v.extend(vec![N; n_neg]);
        v
    }

    #[test]
    fn all_correct_and_all_flipped() {
        let y = labels(10, 10);
        assert_eq!(confusion(&y, &y).unwrap(), ConfusionMatrix::new(10, 0, 0, 10));
        let flipped: Vec<Label> = y.iter().map(|l| if *l == S { N } else { S }).collect();
        assert_eq!(confusion(&flipped, &y).unwrap(), ConfusionMatrix::new(0, 10, 10, 0));
        assert!(confusion(&y[..3], &y).is_err());
    }

    #[test]
    fn published_matrices() {
        let t = MetricsReport::from_confusion(&published::TEACHER).unwrap();
        assert_eq!(round_percent(t.sen), 86.99);
        assert_eq!(round_percent(t.spe), 95.66);
        assert_eq!(round_percent(t.gmean), 91.22);
        assert_eq!(round_percent(t.f1), 90.93);
        let s = MetricsReport::from_confusion(&published::STUDENT).unwrap();
        assert_eq!(round_percent(s.sen), 85.59);
        assert_eq!(round_percent(s.spe), 94.39);
        let b = MetricsReport::from_confusion(&published::BASELINE).unwrap();
        assert_eq!(round_percent(b.sen), 80.87);
        assert_eq!(round_percent(b.spe), 79.59);
    }

    #[test]
    fn degenerate_and_empty() {
        let cm = ConfusionMatrix::new(0, 0, 3, 7);
        let sen = sensitivity(&cm);
        assert!(sen.degenerate && sen.value == 0.0);
        assert!(!specificity(&cm).degenerate);
        assert!(MetricsReport::from_confusion(&cm).unwrap().degenerate);
        assert!(matches!(
            MetricsReport::from_confusion(&ConfusionMatrix::default()),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_percent(0.123_45), 12.35);
        assert_eq!(round_percent(0.123_449), 12.34);
        assert_eq!(round_percent(1.0), 100.0);
    }

    #[test]
    fn json_field_names() {
        let r = MetricsReport::from_confusion(&published::TEACHER).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["tp", "fn", "fp", "tn", "sen", "spe", "gmean", "acc", "f1"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let back: MetricsReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn random_counting_oracle() {
        use rand::Rng as _;
        let mut rng = crate::rng::component_rng(11, "metrics");
        let pick = |rng: &mut crate::rng::Rng| if rng.random::<bool>() { S } else { N };
        let pred: Vec<Label> = (0..1000).map(|_| pick(&mut rng)).collect();
        let act: Vec<Label> = (0..1000).map(|_| pick(&mut rng)).collect();
        let (mut tp, mut fn_, mut fp, mut tn) = (0, 0, 0, 0);
        for i in 0..1000 {
            match (act[i].is_seizure(), pred[i].is_seizure()) {
                (true, true) => tp += 1,
                (true, false) => fn_ += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
            }
        }
        assert_eq!(confusion(&pred, &act).unwrap(), ConfusionMatrix::new(tp, fn_, fp, tn));
    }

    proptest! {
        #[test]
        fn metrics_in_unit_interval(tp in 0u64..500, fn_ in 0u64..500, fp in 0u64..500, tn in 0u64..500) {
            let cm = ConfusionMatrix::new(tp, fn_, fp, tn);
            prop_assume!(cm.total() > 0);
            let r = MetricsReport::from_confusion(&cm).unwrap();
            for v in r.values() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn equal_sen_spe_gives_same_gmean(k in 1u64..200, extra in 0u64..200) {
            // tp/(tp+fn) == tn/(fp+tn) when the two classes have identical counts
            let cm = ConfusionMatrix::new(k, extra, extra, k);
            let g = gmean(&cm).value;
            prop_assert!((g - sensitivity(&cm).value).abs() < 1e-15);
        }

        #[test]
        fn order_invariant(pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..200), rot in 0usize..200) {
            let to = |b: bool| if b { S } else { N };
            let p: Vec<Label> = pairs.iter().map(|x| to(x.0)).collect();
            let a: Vec<Label> = pairs.iter().map(|x| to(x.1)).collect();
            let r = rot % pairs.len();
            let mut p2 = p.clone();
            let mut a2 = a.clone();
            p2.rotate_left(r);
            a2.rotate_left(r);
            p2.reverse();
            a2.reverse();
            prop_assert_eq!(confusion(&p, &a).unwrap(), confusion(&p2, &a2).unwrap());
        }
    }
}
