use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::biosignal::{undersample, DatasetSplit, Label};
use crate::distill::data::{require_eeg, PreparedWindow};
use crate::distill::loss::{distill_loss, distill_loss_grad};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::nn::{adam_step, AdamConfig, AdamState, Params, Tensor};
use crate::res1dcnn::{
    argmax_class, build_res1dcnn, build_teacher, FeatureExtractor, FeatureMap, Res1dCnnConfig, StudentModel,
    TeacherModel,
};
use crate::rng::component_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_iterations: usize,
    /// Validation is run every this many iterations.
    pub eval_every: usize,
    /// Evaluations without a strictly better validation Gmean before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Alternate seizure and non-seizure windows inside every mini-batch
    /// instead of drawing from one shuffled pool.
    pub balanced_batches: bool,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            max_iterations: 10_000,
            eval_every: 50,
            patience: 20,
            seed: 0,
            balanced_batches: true,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_iterations == 0 || self.eval_every == 0 || self.patience == 0 {
            return Err(Error::InvalidConfig(
                "batch size, iterations, evaluation interval and patience must be positive".into(),
            ));
        }
        let a = &self.adam;
        let ok = a.lr > 0.0 && a.eps > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2);
        if !ok || !a.lr.is_finite() {
            return Err(Error::InvalidConfig("Adam settings out of range".into()));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub iteration: usize,
    /// Mean training loss since the previous evaluation.
    pub loss: f64,
    pub sen: f64,
    pub spe: f64,
    pub gmean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch loss of every iteration.
    pub losses: Vec<f64>,
    pub evaluations: Vec<EvalRecord>,
    pub best_iteration: usize,
    pub validation: MetricsReport,
    pub iterations_run: usize,
    pub stopped_early: bool,
    pub wall_clock_s: f64,
}

impl TrainReport {
    /// One JSON object per evaluation.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.evaluations {
            out.push_str(&serde_json::to_string(e).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Pool indices in reshuffled passes: one pass over the whole pool, or one
/// per class drawn alternately.
struct Sampler {
    orders: Vec<Vec<usize>>,
    cursors: Vec<usize>,
    drawn: usize,
    rng: crate::rng::Rng,
}

impl Sampler {
    fn new(labels: &[Label], balanced: bool, mut rng: crate::rng::Rng) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("training pool"));
        }
        let mut orders: Vec<Vec<usize>> = if balanced {
            let by_class = |l: Label| (0..labels.len()).filter(|&i| labels[i] == l).collect::<Vec<_>>();
            vec![by_class(Label::NonSeizure), by_class(Label::Seizure)]
        } else {
            vec![(0..labels.len()).collect()]
        };
        if balanced {
            for (order, name) in orders.iter().zip(["non-seizure", "seizure"]) {
                if order.is_empty() {
                    return Err(Error::EmptyClass(name));
                }
            }
        }
        for o in &mut orders {
            o.shuffle(&mut rng);
        }
        Ok(Self {
            cursors: vec![0; orders.len()],
            orders,
            drawn: 0,
            rng,
        })
    }

    fn next(&mut self) -> usize {
        let k = self.drawn % self.orders.len();
        self.drawn += 1;
        if self.cursors[k] == self.orders[k].len() {
            self.orders[k].shuffle(&mut self.rng);
            self.cursors[k] = 0;
        }
        self.cursors[k] += 1;
        self.orders[k][self.cursors[k] - 1]
    }
}

/// Mini-batch Adam with fixed-order gradient accumulation and best-iterate
/// selection on validation Gmean.
fn run_training<M: Params + Clone>(
    stream: &str,
    init: M,
    labels: &[Label],
    cfg: &TrainConfig,
    loss_grad: impl Fn(&M, usize) -> Result<(f64, M)>,
    validate: impl Fn(&M) -> Result<MetricsReport>,
) -> Result<(M, TrainReport)> {
    cfg.validate()?;
    let started = Instant::now();
    let mut sampler = Sampler::new(labels, cfg.balanced_batches, component_rng(cfg.seed, stream))?;

    let mut model = init;
    let mut state = AdamState::new(&model, cfg.adam);
    let mut best = (model.clone(), None::<MetricsReport>, 0usize);
    let mut losses = Vec::new();
    let mut evaluations = Vec::new();
    let mut since_best = 0;
    let mut window_loss = 0.0;
    let mut window_count = 0;
    let mut stopped_early = false;

    for iteration in 1..=cfg.max_iterations {
        let mut grad = model.zeros_like();
        let mut batch_loss = 0.0;
        for _ in 0..cfg.batch_size {
            let (loss, g) = loss_grad(&model, sampler.next())?;
            batch_loss += loss;
            grad.add_scaled(&g, 1.0);
        }
        let scale = 1.0 / cfg.batch_size as f64;
        batch_loss *= scale;
        if !batch_loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration });
        }
        grad.scale(scale);
        adam_step(&mut model, &grad, &mut state)?;
        if !model.params().iter().all(|p| p.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFiniteLoss { iteration });
        }
        losses.push(batch_loss);
        window_loss += batch_loss;
        window_count += 1;

        if iteration % cfg.eval_every == 0 || iteration == cfg.max_iterations {
            let report = validate(&model)?;
            evaluations.push(EvalRecord {
                iteration,
                loss: window_loss / window_count as f64,
                sen: report.sen,
                spe: report.spe,
                gmean: report.gmean,
            });
            window_loss = 0.0;
            window_count = 0;
            if best.1.is_none_or(|b| report.gmean > b.gmean) {
                best = (model.clone(), Some(report), iteration);
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    stopped_early = iteration < cfg.max_iterations;
                    break;
                }
            }
        }
    }
    let iterations_run = losses.len();
    let (model, validation, best_iteration) = best;
    Ok((
        model,
        TrainReport {
            losses,
            evaluations,
            best_iteration,
            validation: validation.expect("the final iteration is always evaluated"),
            iterations_run,
            stopped_early,
            wall_clock_s: started.elapsed().as_secs_f64(),
        },
    ))
}

fn label_of(class: usize) -> Label {
    if class == 1 {
        Label::Seizure
    } else {
        Label::NonSeizure
    }
}

pub fn evaluate_student(model: &StudentModel, windows: &[PreparedWindow]) -> Result<MetricsReport> {
    let mut pred = Vec::with_capacity(windows.len());
    for w in windows {
        pred.push(label_of(argmax_class(&model.forward(&w.ecg)?)));
    }
    let labels: Vec<Label> = windows.iter().map(|w| w.label).collect();
    MetricsReport::evaluate(&pred, &labels)
}

pub fn evaluate_teacher(model: &TeacherModel, windows: &[PreparedWindow]) -> Result<MetricsReport> {
    let mut pred = Vec::with_capacity(windows.len());
    for w in windows {
        let (a, b, c) = w.all_channels()?;
        pred.push(label_of(argmax_class(&model.forward(a, b, c)?)));
    }
    let labels: Vec<Label> = windows.iter().map(|w| w.label).collect();
    MetricsReport::evaluate(&pred, &labels)
}

/// End-to-end cross-entropy training of the three-branch teacher.
pub fn train_teacher(
    data: &DatasetSplit<PreparedWindow>,
    model_cfg: &Res1dCnnConfig,
    cfg: &TrainConfig,
) -> Result<(TeacherModel, TrainReport)> {
    require_eeg(&data.train)?;
    require_eeg(&data.validation)?;
    let pool = undersample(&data.train, cfg.seed)?;
    let init = build_teacher(model_cfg, cfg.seed)?;
    let (mut teacher, report) = run_training(
        "teacher-batches",
        init,
        &pool.iter().map(|w| w.label).collect::<Vec<_>>(),
        cfg,
        |m: &TeacherModel, i| {
            let w = &pool[i];
            let (a, b, c) = w.all_channels()?;
            m.loss_and_grad(a, b, c, w.label.class_index())
        },
        |m| evaluate_teacher(m, &data.validation),
    )?;
    teacher.trained = true;
    Ok((teacher, report))
}

/// Mean distillation loss of `extractor` against the teacher's fused features.
pub fn mean_distill_loss(teacher: &TeacherModel, extractor: &FeatureExtractor, windows: &[PreparedWindow]) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::Empty("distillation windows"));
    }
    let mut total = 0.0;
    for w in windows {
        let (a, b, c) = w.all_channels()?;
        total += distill_loss(&extractor.features_of(a)?, &teacher.fused_features(a, b, c)?)?;
    }
    Ok(total / windows.len() as f64)
}

/// Trains an ECG-only extractor to reproduce the teacher's fused feature map
/// and pairs it with a verbatim copy of the teacher head. The teacher is only
/// read.
pub fn train_student(
    teacher: &TeacherModel,
    data: &DatasetSplit<PreparedWindow>,
    cfg: &TrainConfig,
) -> Result<(StudentModel, TrainReport)> {
    if !teacher.trained {
        return Err(Error::UntrainedTeacher);
    }
    teacher.validate()?;
    require_eeg(&data.train)?;
    let pool = undersample(&data.train, cfg.seed)?;
    let targets: Vec<FeatureMap> = pool
        .iter()
        .map(|w| {
            let (a, b, c) = w.all_channels()?;
            teacher.fused_features(a, b, c)
        })
        .collect::<Result<_>>()?;
    let init = teacher.ecg.reinitialized(&mut component_rng(cfg.seed, "res1dcnn-extractor"));
    let head = teacher.head.clone();
    let (extractor, report) = run_training(
        "student-batches",
        init,
        &pool.iter().map(|w| w.label).collect::<Vec<_>>(),
        cfg,
        |m: &FeatureExtractor, i| {
            let trace = m.forward(&Tensor::from_signal(&pool[i].ecg))?;
            let loss = distill_loss(&trace.features, &targets[i])?;
            let g = distill_loss_grad(&trace.features, &targets[i])?;
            Ok((loss, m.backward(&trace, &g)?.0))
        },
        |m| {
            let s = StudentModel {
                extractor: m.clone(),
                head: head.clone(),
            };
            evaluate_student(&s, &data.validation)
        },
    )?;
    Ok((StudentModel { extractor, head }, report))
}

/// Single-branch cross-entropy training on ECG alone.
pub fn train_baseline_ecg(
    data: &DatasetSplit<PreparedWindow>,
    model_cfg: &Res1dCnnConfig,
    cfg: &TrainConfig,
) -> Result<(StudentModel, TrainReport)> {
    let pool = undersample(&data.train, cfg.seed)?;
    let init = build_res1dcnn(model_cfg, cfg.seed)?;
    run_training(
        "baseline-batches",
        init,
        &pool.iter().map(|w| w.label).collect::<Vec<_>>(),
        cfg,
        |m: &StudentModel, i| m.loss_and_grad(&pool[i].ecg, pool[i].label.class_index()),
        |m| evaluate_student(m, &data.validation),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let cfg = TrainConfig::default();
        assert_eq!((cfg.batch_size, cfg.max_iterations, cfg.eval_every, cfg.patience), (16, 10_000, 50, 20));
        assert_eq!(cfg.adam.lr, 1e-5);
        cfg.validate().unwrap();
        let parsed: TrainConfig = toml::from_str("seed = 4\n[adam]\nlr = 0.001\n").unwrap();
        assert_eq!(parsed.seed, 4);
        assert_eq!(parsed.adam.lr, 1e-3);
        assert_eq!(parsed.adam.beta2, 0.999);
        assert!(TrainConfig { batch_size: 0, ..cfg.clone() }.validate().is_err());
        assert!(toml::from_str::<TrainConfig>("bogus = 1").is_err());
        assert!(cfg.balanced_batches);
    }

    fn labels(pos: usize, neg: usize) -> Vec<Label> {
        let mut v = vec![Label::Seizure; pos];
        v.extend(vec![Label::NonSeizure; neg]);
        v
    }

    #[test]
    fn balanced_sampler_alternates_classes() {
        let l = labels(3, 7);
        let mut s = Sampler::new(&l, true, component_rng(1, "s")).unwrap();
        let drawn: Vec<usize> = (0..40).map(|_| s.next()).collect();
        for (k, &i) in drawn.iter().enumerate() {
            assert_eq!(l[i].is_seizure(), k % 2 == 1);
        }
        // Every seizure index appears once per pass of three draws.
        let mut first: Vec<usize> = drawn.iter().skip(1).step_by(2).take(3).copied().collect();
        first.sort();
        assert_eq!(first, vec![0, 1, 2]);
        assert!(matches!(Sampler::new(&labels(0, 4), true, component_rng(1, "s")), Err(Error::EmptyClass(_))));
        assert!(Sampler::new(&[], false, component_rng(1, "s")).is_err());
    }

    #[test]
    fn plain_sampler_covers_pool_each_pass() {
        let l = labels(2, 5);
        let mut s = Sampler::new(&l, false, component_rng(2, "s")).unwrap();
        for _ in 0..3 {
            let mut pass: Vec<usize> = (0..7).map(|_| s.next()).collect();
            pass.sort();
            assert_eq!(pass, (0..7).collect::<Vec<_>>());
        }
    }
}
