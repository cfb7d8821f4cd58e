use crate::error::{Error, Result};
use crate::nn::{
    cross_entropy, fill_normal, softmax, softmax_cross_entropy_grad, Dense, Params, Tensor, INIT_STD,
};
use crate::preprocess::PreprocessedSegment;
use crate::res1dcnn::config::Res1dCnnConfig;
use crate::res1dcnn::extractor::{ExtractorTrace, FeatureExtractor, FeatureMap};
use crate::rng::{component_rng, Rng};

pub const NUM_CLASSES: usize = 2;

/// Dense head followed by softmax.
pub fn classify(head: &Dense, z: &FeatureMap) -> Result<Vec<f64>> {
    softmax(&head.forward(&z.0)?)
}

/// Index of the larger probability; an exact tie goes to class 0.
pub fn argmax_class(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

fn init_head(len: usize, rng: &mut Rng) -> Dense {
    let mut head = Dense::zeros(len, NUM_CLASSES);
    fill_normal(&mut head.weight, INIT_STD, rng);
    head
}

/// Linear fusion weights for the ECG, EEG1 and EEG2 branches.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    pub theta: [f64; 3],
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self { theta: [1.0 / 3.0; 3] }
    }
}

impl Params for FusionWeights {
    fn params(&self) -> Vec<&[f64]> {
        vec![&self.theta]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.theta]
    }
}

/// `theta[0]*ecg + theta[1]*eeg1 + theta[2]*eeg2`, element-wise.
pub fn fuse_features(ecg: &FeatureMap, eeg1: &FeatureMap, eeg2: &FeatureMap, fusion: &FusionWeights) -> Result<FeatureMap> {
    if eeg1.len() != ecg.len() || eeg2.len() != ecg.len() {
        return Err(Error::shape(
            "fusion inputs",
            format!("three maps of length {}", ecg.len()),
            format!("{}, {}, {}", ecg.len(), eeg1.len(), eeg2.len()),
        ));
    }
    let [a, b, c] = fusion.theta;
    Ok(FeatureMap(
        (0..ecg.len()).map(|i| a * ecg.0[i] + b * eeg1.0[i] + c * eeg2.0[i]).collect(),
    ))
}

fn check_label(label: usize) -> Result<()> {
    if label >= NUM_CLASSES {
        return Err(Error::shape("class label", "0 or 1", label));
    }
    Ok(())
}

/// Single-branch ECG model. Also used for the ECG-only baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentModel {
    pub extractor: FeatureExtractor,
    pub head: Dense,
}

/// Builds a single-branch Res1DCNN with its dense head.
pub fn build_res1dcnn(cfg: &Res1dCnnConfig, seed: u64) -> Result<StudentModel> {
    let extractor = FeatureExtractor::init(cfg, &mut component_rng(seed, "res1dcnn-extractor"))?;
    let head = init_head(cfg.feature_len(), &mut component_rng(seed, "res1dcnn-head"));
    Ok(StudentModel { extractor, head })
}

impl StudentModel {
    pub fn feature_len(&self) -> usize {
        self.extractor.feature_len()
    }

    pub fn features(&self, ecg: &[f64]) -> Result<FeatureMap> {
        self.extractor.features_of(ecg)
    }

    pub fn forward(&self, ecg: &[f64]) -> Result<Vec<f64>> {
        classify(&self.head, &self.features(ecg)?)
    }

    pub fn forward_segment(&self, segment: &PreprocessedSegment) -> Result<Vec<f64>> {
        classify(&self.head, &self.extractor.extract_features(segment)?)
    }

    pub fn predict(&self, ecg: &[f64]) -> Result<usize> {
        Ok(argmax_class(&self.forward(ecg)?))
    }

    /// Cross-entropy of one window and its gradient.
    pub fn loss_and_grad(&self, ecg: &[f64], label: usize) -> Result<(f64, StudentModel)> {
        check_label(label)?;
        let trace = self.extractor.forward(&Tensor::from_signal(ecg))?;
        let logits = self.head.forward(&trace.features.0)?;
        let probs = softmax(&logits)?;
        let loss = cross_entropy(&probs, label)?;
        let g_logits = softmax_cross_entropy_grad(&probs, label);
        let mut g_head = self.head.zeros_like();
        let g_z = self.head.backward(&trace.features.0, &g_logits, &mut g_head)?;
        let (g_ex, _) = self.extractor.backward(&trace, &g_z)?;
        Ok((
            loss,
            StudentModel {
                extractor: g_ex,
                head: g_head,
            },
        ))
    }
}

impl Params for StudentModel {
    fn params(&self) -> Vec<&[f64]> {
        let mut v = self.extractor.params();
        v.extend(self.head.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.extractor.params_mut();
        v.extend(self.head.params_mut());
        v
    }
}

/// Three analogous branches, linear fusion and a shared head.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherModel {
    pub ecg: FeatureExtractor,
    pub eeg1: FeatureExtractor,
    pub eeg2: FeatureExtractor,
    pub fusion: FusionWeights,
    pub head: Dense,
    /// Set once teacher training has completed.
    pub trained: bool,
}

/// Per-branch traces of one teacher forward pass.
#[derive(Debug, Clone)]
pub struct TeacherTrace {
    pub branches: [ExtractorTrace; 3],
    pub fused: FeatureMap,
    pub probs: Vec<f64>,
}

pub fn build_teacher(cfg: &Res1dCnnConfig, seed: u64) -> Result<TeacherModel> {
    let ecg = FeatureExtractor::init(cfg, &mut component_rng(seed, "teacher-ecg"))?;
    let eeg1 = FeatureExtractor::init(cfg, &mut component_rng(seed, "teacher-eeg1"))?;
    let eeg2 = FeatureExtractor::init(cfg, &mut component_rng(seed, "teacher-eeg2"))?;
    let head = init_head(cfg.feature_len(), &mut component_rng(seed, "teacher-head"));
    Ok(TeacherModel {
        ecg,
        eeg1,
        eeg2,
        fusion: FusionWeights::default(),
        head,
        trained: false,
    })
}

impl TeacherModel {
    pub fn feature_len(&self) -> usize {
        self.ecg.feature_len()
    }

    pub fn extractors(&self) -> [&FeatureExtractor; 3] {
        [&self.ecg, &self.eeg1, &self.eeg2]
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.feature_len();
        if self.eeg1.feature_len() != l || self.eeg2.feature_len() != l || self.head.in_features != l {
            return Err(Error::TopologyMismatch("teacher branches and head disagree on L".into()));
        }
        if self.head.out_features != NUM_CLASSES {
            return Err(Error::TopologyMismatch("teacher head must have 2 outputs".into()));
        }
        Ok(())
    }

    pub fn fused_features(&self, ecg: &[f64], eeg1: &[f64], eeg2: &[f64]) -> Result<FeatureMap> {
        fuse_features(
            &self.ecg.features_of(ecg)?,
            &self.eeg1.features_of(eeg1)?,
            &self.eeg2.features_of(eeg2)?,
            &self.fusion,
        )
    }

    pub fn forward(&self, ecg: &[f64], eeg1: &[f64], eeg2: &[f64]) -> Result<Vec<f64>> {
        classify(&self.head, &self.fused_features(ecg, eeg1, eeg2)?)
    }

    pub fn forward_segments(
        &self,
        ecg: &PreprocessedSegment,
        eeg1: &PreprocessedSegment,
        eeg2: &PreprocessedSegment,
    ) -> Result<Vec<f64>> {
        let z = fuse_features(
            &self.ecg.extract_features(ecg)?,
            &self.eeg1.extract_features(eeg1)?,
            &self.eeg2.extract_features(eeg2)?,
            &self.fusion,
        )?;
        classify(&self.head, &z)
    }

    pub fn trace(&self, ecg: &[f64], eeg1: &[f64], eeg2: &[f64]) -> Result<TeacherTrace> {
        let branches = [
            self.ecg.forward(&Tensor::from_signal(ecg))?,
            self.eeg1.forward(&Tensor::from_signal(eeg1))?,
            self.eeg2.forward(&Tensor::from_signal(eeg2))?,
        ];
        let fused = fuse_features(&branches[0].features, &branches[1].features, &branches[2].features, &self.fusion)?;
        let probs = classify(&self.head, &fused)?;
        Ok(TeacherTrace { branches, fused, probs })
    }

    /// Cross-entropy of one synchronized window triple and its gradient.
    pub fn loss_and_grad(&self, ecg: &[f64], eeg1: &[f64], eeg2: &[f64], label: usize) -> Result<(f64, TeacherModel)> {
        check_label(label)?;
        let tr = self.trace(ecg, eeg1, eeg2)?;
        let loss = cross_entropy(&tr.probs, label)?;
        let g_logits = softmax_cross_entropy_grad(&tr.probs, label);
        let mut g_head = self.head.zeros_like();
        let g_z = self.head.backward(&tr.fused.0, &g_logits, &mut g_head)?;
        let mut g_theta = [0.0; 3];
        let mut branch_grads = Vec::with_capacity(3);
        for (b, (ex, trace)) in self.extractors().into_iter().zip(&tr.branches).enumerate() {
            g_theta[b] = g_z.iter().zip(&trace.features.0).map(|(g, z)| g * z).sum();
            let g_branch: Vec<f64> = g_z.iter().map(|g| g * self.fusion.theta[b]).collect();
            branch_grads.push(ex.backward(trace, &g_branch)?.0);
        }
        let mut it = branch_grads.into_iter();
        let grad = TeacherModel {
            ecg: it.next().expect("three branches"),
            eeg1: it.next().expect("three branches"),
            eeg2: it.next().expect("three branches"),
            fusion: FusionWeights { theta: g_theta },
            head: g_head,
            trained: false,
        };
        Ok((loss, grad))
    }
}

impl Params for TeacherModel {
    fn params(&self) -> Vec<&[f64]> {
        let mut v = self.ecg.params();
        v.extend(self.eeg1.params());
        v.extend(self.eeg2.params());
        v.extend(self.fusion.params());
        v.extend(self.head.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.ecg.params_mut();
        v.extend(self.eeg1.params_mut());
        v.extend(self.eeg2.params_mut());
        v.extend(self.fusion.params_mut());
        v.extend(self.head.params_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn random_map(rng: &mut Rng, n: usize) -> FeatureMap {
        FeatureMap((0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect())
    }

    #[test]
    fn zero_head_is_uniform() {
        let head = Dense::zeros(64, 2);
        let p = classify(&head, &FeatureMap(vec![1.5; 64])).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        assert!(classify(&head, &FeatureMap(vec![0.0; 3])).is_err());
    }

    #[test]
    fn head_margin_gives_logistic_probability() {
        let mut head = Dense::zeros(4, 2);
        for m in [0.1, 1.0, 3.0, 7.5] {
            head.bias = vec![m, 0.0];
            let p = classify(&head, &FeatureMap(vec![0.3; 4])).unwrap();
            assert!((p[0] - 1.0 / (1.0 + (-m as f64).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = component_rng(3, "probs");
        let mut head = Dense::zeros(8, 2);
        head.weight.iter_mut().for_each(|w| *w = rng.random::<f64>() - 0.5);
        for _ in 0..1000 {
            let p = classify(&head, &random_map(&mut rng, 8)).unwrap();
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bias_shift_keeps_argmax() {
        let mut rng = component_rng(5, "shift");
        let mut head = Dense::zeros(8, 2);
        head.weight.iter_mut().for_each(|w| *w = rng.random::<f64>() - 0.5);
        for _ in 0..200 {
            let z = random_map(&mut rng, 8);
            let before = argmax_class(&classify(&head, &z).unwrap());
            let mut shifted = head.clone();
            let c = rng.random::<f64>() * 20.0 - 10.0;
            shifted.bias.iter_mut().for_each(|b| *b += c);
            assert_eq!(argmax_class(&classify(&shifted, &z).unwrap()), before);
        }
    }

    #[test]
    fn tie_goes_to_non_seizure() {
        assert_eq!(argmax_class(&[0.5, 0.5]), 0);
        assert_eq!(argmax_class(&[0.4, 0.6]), 1);
    }

    #[test]
    fn fusion_cases() {
        let mut rng = component_rng(6, "fuse");
        let (a, b, c) = (random_map(&mut rng, 16), random_map(&mut rng, 16), random_map(&mut rng, 16));
        let one_hot = FusionWeights { theta: [1.0, 0.0, 0.0] };
        assert_eq!(fuse_features(&a, &b, &c, &one_hot).unwrap(), a);
        let avg = fuse_features(&a, &a, &a, &FusionWeights::default()).unwrap();
        for (x, y) in avg.0.iter().zip(&a.0) {
            assert!((x - y).abs() < 1e-12);
        }
        let theta = [rng.random::<f64>(), -rng.random::<f64>(), 2.0 * rng.random::<f64>()];
        let got = fuse_features(&a, &b, &c, &FusionWeights { theta }).unwrap();
        for i in 0..16 {
            let want = theta[0] * a.0[i] + theta[1] * b.0[i] + theta[2] * c.0[i];
            assert!((got.0[i] - want).abs() < 1e-12);
        }
        let alpha = 2.5;
        let scale = |m: &FeatureMap| FeatureMap(m.0.iter().map(|v| v * alpha).collect());
        let scaled = fuse_features(&scale(&a), &scale(&b), &scale(&c), &FusionWeights { theta }).unwrap();
        for (s, g) in scaled.0.iter().zip(&got.0) {
            assert!((s - alpha * g).abs() < 1e-12);
        }
        assert!(fuse_features(&a, &b, &FeatureMap(vec![0.0; 3]), &one_hot).is_err());
    }

    #[test]
    fn teacher_parameter_ratio_is_exactly_three() {
        let cfg = Res1dCnnConfig::default();
        let teacher = build_teacher(&cfg, 1).unwrap();
        let student = build_res1dcnn(&cfg, 1).unwrap();
        let teacher_ex: usize = teacher.extractors().iter().map(|e| e.param_count()).sum();
        assert_eq!(teacher_ex, 3 * student.extractor.param_count());
        assert_eq!(teacher.param_count(), 3 * student.extractor.param_count() + 3 + student.head.param_count());
    }

    #[test]
    fn zero_teacher_is_uniform() {
        let cfg = Res1dCnnConfig::default();
        let mut t = build_teacher(&cfg, 1).unwrap();
        t.params_mut().into_iter().for_each(|p| p.fill(0.0));
        let x = vec![0.7; 768];
        assert_eq!(t.forward(&x, &x, &x).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn one_hot_teacher_equals_student() {
        let cfg = Res1dCnnConfig::reduced(128);
        let student = build_res1dcnn(&cfg, 2).unwrap();
        let mut teacher = build_teacher(&cfg, 3).unwrap();
        teacher.ecg = student.extractor.clone();
        teacher.head = student.head.clone();
        teacher.fusion.theta = [1.0, 0.0, 0.0];
        let mut rng = component_rng(8, "x");
        let x: Vec<f64> = (0..128).map(|_| rng.random::<f64>() - 0.5).collect();
        let e: Vec<f64> = (0..128).map(|_| rng.random::<f64>()).collect();
        assert_eq!(teacher.forward(&x, &e, &e).unwrap(), student.forward(&x).unwrap());
    }

    #[test]
    fn teacher_matches_manual_composition() {
        let cfg = Res1dCnnConfig::reduced(96);
        let mut teacher = build_teacher(&cfg, 4).unwrap();
        let mut rng = component_rng(4, "compose");
        for p in teacher.params_mut() {
            p.iter_mut().for_each(|v| *v = rng.random::<f64>() - 0.45);
        }
        let sig = |rng: &mut Rng| -> Vec<f64> { (0..96).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect() };
        let (a, b, c) = (sig(&mut rng), sig(&mut rng), sig(&mut rng));
        let za = teacher.ecg.features_of(&a).unwrap();
        let zb = teacher.eeg1.features_of(&b).unwrap();
        let zc = teacher.eeg2.features_of(&c).unwrap();
        let th = teacher.fusion.theta;
        let z: Vec<f64> = (0..za.len()).map(|i| th[0] * za.0[i] + th[1] * zb.0[i] + th[2] * zc.0[i]).collect();
        let l: Vec<f64> = (0..2)
            .map(|o| teacher.head.bias[o] + (0..z.len()).map(|j| teacher.head.weight[o * z.len() + j] * z[j]).sum::<f64>())
            .collect();
        let m = l[0].max(l[1]);
        let e: Vec<f64> = l.iter().map(|v| (v - m).exp()).collect();
        let want = [e[0] / (e[0] + e[1]), e[1] / (e[0] + e[1])];
        let got = teacher.forward(&a, &b, &c).unwrap();
        for i in 0..2 {
            assert!((got[i] - want[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn builds_are_seeded() {
        let cfg = Res1dCnnConfig::default();
        assert_eq!(build_res1dcnn(&cfg, 9).unwrap(), build_res1dcnn(&cfg, 9).unwrap());
        assert_ne!(build_res1dcnn(&cfg, 9).unwrap(), build_res1dcnn(&cfg, 10).unwrap());
        let mut bad = cfg.clone();
        bad.blocks.pop();
        assert!(build_res1dcnn(&bad, 9).is_err());
    }
}
