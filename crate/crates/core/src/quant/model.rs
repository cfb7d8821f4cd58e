use serde::{Deserialize, Serialize};

use crate::distill::PreparedWindow;
use crate::error::{Error, Result};
use crate::metrics::{MetricDeltas, MetricsReport};
use crate::biosignal::Label;
use crate::nn::{softmax, Conv1d, Dense, Params};
use crate::quant::fixed::{div_round, saturate_i16, saturating_add, shift_round, QFormat, Q2_13};
use crate::res1dcnn::{argmax_class, FeatureExtractor, ResBlock, Shortcut, StudentModel};

/// Saturation events of one inference call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub saturations: u64,
}

impl Diagnostics {
    fn count(&mut self, saturated: bool) {
        self.saturations += u64::from(saturated);
    }
}

/// Raw fixed-point activations shaped `(channels, len)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QTensor {
    pub channels: usize,
    pub len: usize,
    pub data: Vec<i16>,
}

impl QTensor {
    pub fn row(&self, c: usize) -> &[i16] {
        &self.data[c * self.len..(c + 1) * self.len]
    }

    fn relu(mut self) -> Self {
        self.data.iter_mut().for_each(|v| *v = (*v).max(0));
        self
    }
}

/// Requantizes a `2F`-fraction accumulator back to `F` fractional bits.
fn requantize(acc: i32, format: QFormat, diag: &mut Diagnostics) -> i16 {
    let (v, sat) = saturate_i16(shift_round(i64::from(acc), format.frac_bits));
    diag.count(sat);
    v
}

fn quantize_slice(values: &[f64], format: QFormat, saturated: &mut u64) -> Result<Vec<i16>> {
    values
        .iter()
        .map(|&x| {
            let (q, sat) = format.quantize_saturating(x)?;
            *saturated += u64::from(sat);
            Ok(q)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QConv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub weight: Vec<i16>,
    pub bias: Vec<i16>,
}

impl QConv1d {
    fn geometry(&self) -> Conv1d {
        Conv1d {
            in_channels: self.in_channels,
            out_channels: self.out_channels,
            kernel: self.kernel,
            stride: self.stride,
            weight: Vec::new(),
            bias: Vec::new(),
        }
    }

    /// Same padding and geometry as the float layer, 32-bit saturating
    /// accumulation, one requantization per output.
    pub fn forward(&self, x: &QTensor, format: QFormat, diag: &mut Diagnostics) -> Result<QTensor> {
        if x.channels != self.in_channels {
            return Err(Error::shape("quantized conv input", self.in_channels, x.channels));
        }
        let geo = self.geometry();
        let out_len = geo.output_len(x.len);
        let pad = geo.pad_left(x.len);
        let mut out = Vec::with_capacity(self.out_channels * out_len);
        let ranges: Vec<_> = (0..self.kernel).map(|k| geo.valid_range(k, x.len, pad, out_len)).collect();
        let mut acc = vec![0i32; out_len];
        for o in 0..self.out_channels {
            acc.fill(i32::from(self.bias[o]) << format.frac_bits);
            for i in 0..self.in_channels {
                let row = x.row(i);
                let w = &self.weight[(o * self.in_channels + i) * self.kernel..][..self.kernel];
                for (k, &wk) in w.iter().enumerate() {
                    let wk = i32::from(wk);
                    if wk == 0 {
                        continue;
                    }
                    let r = ranges[k].clone();
                    for t in r {
                        let xv = i32::from(row[t * self.stride + k - pad]);
                        acc[t] = acc[t].saturating_add(wk * xv);
                    }
                }
            }
            out.extend(acc.iter().map(|&a| requantize(a, format, diag)));
        }
        Ok(QTensor {
            channels: self.out_channels,
            len: out_len,
            data: out,
        })
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QDense {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: Vec<i16>,
    pub bias: Vec<i16>,
}

impl QDense {
    pub fn forward(&self, x: &[i16], format: QFormat, diag: &mut Diagnostics) -> Result<Vec<i16>> {
        if x.len() != self.in_features {
            return Err(Error::shape("quantized dense input", self.in_features, x.len()));
        }
        Ok((0..self.out_features)
            .map(|o| {
                let mut acc = i32::from(self.bias[o]) << format.frac_bits;
                for (j, &xv) in x.iter().enumerate() {
                    acc = acc.saturating_add(i32::from(self.weight[o * self.in_features + j]) * i32::from(xv));
                }
                requantize(acc, format, diag)
            })
            .collect())
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QShortcut {
    Identity,
    ZeroPad { stride: usize, out_channels: usize },
    Projection(QConv1d),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QResBlock {
    pub conv1: QConv1d,
    pub conv2: QConv1d,
    pub shortcut: QShortcut,
}

impl QResBlock {
    pub fn projection(&self) -> Option<&QConv1d> {
        match &self.shortcut {
            QShortcut::Projection(p) => Some(p),
            _ => None,
        }
    }
}

fn zero_pad(x: QTensor, stride: usize, out_channels: usize) -> Result<QTensor> {
    if out_channels < x.channels || stride == 0 {
        return Err(Error::shape("zero-pad shortcut", format!("<= {out_channels} channels"), x.channels));
    }
    let len = x.len.div_ceil(stride);
    let mut data = vec![0i16; out_channels * len];
    for c in 0..x.channels {
        let src = x.row(c);
        for (t, v) in data[c * len..(c + 1) * len].iter_mut().enumerate() {
            *v = src[t * stride];
        }
    }
    Ok(QTensor {
        channels: out_channels,
        len,
        data,
    })
}

/// Single-branch model with every parameter stored as raw 16-bit values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedModel {
    pub format: QFormat,
    pub stem: QConv1d,
    pub blocks: Vec<QResBlock>,
    pub final_conv: Option<QConv1d>,
    pub head: QDense,
}

/// Parameters that did not fit the format, per named layer.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QuantizationReport {
    pub saturated: Vec<(String, u64)>,
}

impl QuantizationReport {
    pub fn total(&self) -> u64 {
        self.saturated.iter().map(|(_, n)| n).sum()
    }

    pub fn warnings(&self) -> Vec<String> {
        self.saturated
            .iter()
            .map(|(layer, n)| format!("{layer}: {n} parameter(s) saturated"))
            .collect()
    }
}

fn quantize_conv(c: &Conv1d, name: String, format: QFormat, report: &mut QuantizationReport) -> Result<QConv1d> {
    let mut sat = 0;
    let q = QConv1d {
        in_channels: c.in_channels,
        out_channels: c.out_channels,
        kernel: c.kernel,
        stride: c.stride,
        weight: quantize_slice(&c.weight, format, &mut sat)?,
        bias: quantize_slice(&c.bias, format, &mut sat)?,
    };
    if sat > 0 {
        report.saturated.push((name, sat));
    }
    Ok(q)
}

fn quantize_dense(d: &Dense, format: QFormat, report: &mut QuantizationReport) -> Result<QDense> {
    let mut sat = 0;
    let q = QDense {
        in_features: d.in_features,
        out_features: d.out_features,
        weight: quantize_slice(&d.weight, format, &mut sat)?,
        bias: quantize_slice(&d.bias, format, &mut sat)?,
    };
    if sat > 0 {
        report.saturated.push(("head".into(), sat));
    }
    Ok(q)
}

/// Quantizes every parameter of `model` in Q2.13.
pub fn quantize_model(model: &StudentModel) -> Result<(QuantizedModel, QuantizationReport)> {
    quantize_model_with(model, Q2_13)
}

pub fn quantize_model_with(model: &StudentModel, format: QFormat) -> Result<(QuantizedModel, QuantizationReport)> {
    let mut report = QuantizationReport::default();
    let ex = &model.extractor;
    let stem = quantize_conv(&ex.stem, "stem".into(), format, &mut report)?;
    let blocks = ex
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            Ok(QResBlock {
                conv1: quantize_conv(&b.conv1, format!("block{}.conv1", i + 1), format, &mut report)?,
                conv2: quantize_conv(&b.conv2, format!("block{}.conv2", i + 1), format, &mut report)?,
                shortcut: match &b.shortcut {
                    Shortcut::Identity => QShortcut::Identity,
                    &Shortcut::ZeroPad { stride, out_channels } => QShortcut::ZeroPad { stride, out_channels },
                    Shortcut::Projection(p) => QShortcut::Projection(quantize_conv(
                        p,
                        format!("block{}.shortcut", i + 1),
                        format,
                        &mut report,
                    )?),
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let final_conv = ex
        .final_conv
        .as_ref()
        .map(|c| quantize_conv(c, "final".into(), format, &mut report))
        .transpose()?;
    let head = quantize_dense(&model.head, format, &mut report)?;
    Ok((
        QuantizedModel {
            format,
            stem,
            blocks,
            final_conv,
            head,
        },
        report,
    ))
}

fn deq_conv(q: &QConv1d, format: QFormat) -> Conv1d {
    Conv1d {
        in_channels: q.in_channels,
        out_channels: q.out_channels,
        kernel: q.kernel,
        stride: q.stride,
        weight: q.weight.iter().map(|&v| format.dequantize(v)).collect(),
        bias: q.bias.iter().map(|&v| format.dequantize(v)).collect(),
    }
}

impl QuantizedModel {
    pub fn convs(&self) -> Vec<&QConv1d> {
        let mut v = vec![&self.stem];
        for b in &self.blocks {
            v.push(&b.conv1);
            v.push(&b.conv2);
            v.extend(b.projection());
        }
        v.extend(&self.final_conv);
        v
    }

    pub fn param_count(&self) -> usize {
        self.convs().iter().map(|c| c.param_count()).sum::<usize>() + self.head.param_count()
    }

    /// Bytes of raw parameter storage: two per parameter.
    pub fn payload_bytes(&self) -> usize {
        2 * self.param_count()
    }

    /// The float model whose parameters are exactly the dequantized values.
    pub fn dequantized(&self) -> StudentModel {
        let f = self.format;
        StudentModel {
            extractor: FeatureExtractor {
                stem: deq_conv(&self.stem, f),
                blocks: self
                    .blocks
                    .iter()
                    .map(|b| ResBlock {
                        conv1: deq_conv(&b.conv1, f),
                        conv2: deq_conv(&b.conv2, f),
                        shortcut: match &b.shortcut {
                            QShortcut::Identity => Shortcut::Identity,
                            &QShortcut::ZeroPad { stride, out_channels } => Shortcut::ZeroPad { stride, out_channels },
                            QShortcut::Projection(p) => Shortcut::Projection(deq_conv(p, f)),
                        },
                    })
                    .collect(),
                final_conv: self.final_conv.as_ref().map(|c| deq_conv(c, f)),
            },
            head: Dense {
                in_features: self.head.in_features,
                out_features: self.head.out_features,
                weight: self.head.weight.iter().map(|&v| f.dequantize(v)).collect(),
                bias: self.head.bias.iter().map(|&v| f.dequantize(v)).collect(),
            },
        }
    }

    /// True when `model` has the same layer graph.
    pub fn same_topology(&self, model: &StudentModel) -> bool {
        let ex = &model.extractor;
        let same_conv = |q: &QConv1d, c: &Conv1d| {
            (q.in_channels, q.out_channels, q.kernel, q.stride) == (c.in_channels, c.out_channels, c.kernel, c.stride)
        };
        same_conv(&self.stem, &ex.stem)
            && self.blocks.len() == ex.blocks.len()
            && self.blocks.iter().zip(&ex.blocks).all(|(q, b)| {
                same_conv(&q.conv1, &b.conv1)
                    && same_conv(&q.conv2, &b.conv2)
                    && match (&q.shortcut, &b.shortcut) {
                        (QShortcut::Projection(a), Shortcut::Projection(c)) => same_conv(a, c),
                        (QShortcut::Identity, Shortcut::Identity) => true,
                        (QShortcut::ZeroPad { stride: a, out_channels: m }, Shortcut::ZeroPad { stride: c, out_channels: n }) => {
                            (a, m) == (c, n)
                        }
                        _ => false,
                    }
            })
            && match (&self.final_conv, &ex.final_conv) {
                (Some(a), Some(c)) => same_conv(a, c),
                (None, None) => true,
                _ => false,
            }
            && (self.head.in_features, self.head.out_features) == (model.head.in_features, model.head.out_features)
    }

    /// Quantizes the input, runs the integer path, then dequantizes the logits
    /// and applies a float softmax.
    pub fn forward(&self, segment: &[f64]) -> Result<(Vec<f64>, Diagnostics)> {
        let mut diag = Diagnostics::default();
        let mut sat = 0;
        let input = QTensor {
            channels: 1,
            len: segment.len(),
            data: quantize_slice(segment, self.format, &mut sat)?,
        };
        diag.saturations += sat;
        let z = self.features(&input, &mut diag)?;
        let logits = self.head.forward(&z, self.format, &mut diag)?;
        let real: Vec<f64> = logits.iter().map(|&v| self.format.dequantize(v)).collect();
        Ok((softmax(&real)?, diag))
    }

    /// Raw pooled feature map of a quantized input.
    pub fn features(&self, input: &QTensor, diag: &mut Diagnostics) -> Result<Vec<i16>> {
        let f = self.format;
        let mut h = self.stem.forward(input, f, diag)?.relu();
        for b in &self.blocks {
            let a = b.conv1.forward(&h, f, diag)?.relu();
            let mut c = b.conv2.forward(&a, f, diag)?;
            let s = match &b.shortcut {
                QShortcut::Identity => h,
                &QShortcut::ZeroPad { stride, out_channels } => zero_pad(h, stride, out_channels)?,
                QShortcut::Projection(p) => p.forward(&h, f, diag)?,
            };
            for (y, &sv) in c.data.iter_mut().zip(&s.data) {
                let (v, saturated) = saturating_add(*y, sv);
                diag.count(saturated);
                *y = v;
            }
            h = c.relu();
        }
        if let Some(fc) = &self.final_conv {
            h = fc.forward(&h, f, diag)?.relu();
        }
        Ok((0..h.channels)
            .map(|ch| {
                let sum: i64 = h.row(ch).iter().map(|&v| i64::from(v)).sum();
                let (v, saturated) = saturate_i16(div_round(sum, h.len as i64));
                diag.count(saturated);
                v
            })
            .collect())
    }

    pub fn predict(&self, segment: &[f64]) -> Result<usize> {
        Ok(argmax_class(&self.forward(segment)?.0))
    }
}

/// Single-inference entry point.
pub fn quantized_forward(model: &QuantizedModel, segment: &[f64]) -> Result<(Vec<f64>, Diagnostics)> {
    model.forward(segment)
}

pub fn evaluate_quantized(model: &QuantizedModel, windows: &[PreparedWindow]) -> Result<MetricsReport> {
    let mut pred = Vec::with_capacity(windows.len());
    for w in windows {
        pred.push(if model.predict(&w.ecg)? == 1 { Label::Seizure } else { Label::NonSeizure });
    }
    let labels: Vec<Label> = windows.iter().map(|w| w.label).collect();
    MetricsReport::evaluate(&pred, &labels)
}

/// `quantized - float` for every metric on `test`.
pub fn accuracy_drop(float: &StudentModel, qmodel: &QuantizedModel, test: &[PreparedWindow]) -> Result<MetricDeltas> {
    if !qmodel.same_topology(float) {
        return Err(Error::TopologyMismatch("quantized model was not built from this float model".into()));
    }
    let reference = crate::distill::evaluate_student(float, test)?;
    Ok(MetricDeltas::between(&reference, &evaluate_quantized(qmodel, test)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub frac_bits: u32,
    pub accuracy: f64,
    pub parameter_saturations: u64,
    pub activation_saturations: u64,
}

/// Test accuracy of the quantized model for each fractional bit-width.
pub fn frac_bit_sweep(model: &StudentModel, test: &[PreparedWindow], bits: impl IntoIterator<Item = u32>) -> Result<Vec<SweepPoint>> {
    bits.into_iter()
        .map(|b| {
            let (q, report) = quantize_model_with(model, QFormat::new(b)?)?;
            let mut activation_saturations = 0;
            let mut pred = Vec::with_capacity(test.len());
            for w in test {
                let (p, d) = q.forward(&w.ecg)?;
                activation_saturations += d.saturations;
                pred.push(if argmax_class(&p) == 1 { Label::Seizure } else { Label::NonSeizure });
            }
            let labels: Vec<Label> = test.iter().map(|w| w.label).collect();
            Ok(SweepPoint {
                frac_bits: b,
                accuracy: MetricsReport::evaluate(&pred, &labels)?.acc,
                parameter_saturations: report.total(),
                activation_saturations,
            })
        })
        .collect()
}

/// Float parameter payload in bytes (eight per parameter).
pub fn float_payload_bytes(model: &StudentModel) -> usize {
    8 * model.param_count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::res1dcnn::{build_res1dcnn, Res1dCnnConfig};
    use crate::rng::{component_rng, Rng};
    use rand::Rng as _;

    fn random_model(seed: u64, len: usize, amplitude: f64) -> StudentModel {
        let mut m = build_res1dcnn(&Res1dCnnConfig::reduced(len), seed).unwrap();
        let mut rng = component_rng(seed, "qtest");
        for p in m.params_mut() {
            p.iter_mut().for_each(|v| *v = (rng.random::<f64>() * 2.0 - 1.0) * amplitude);
        }
        m
    }

    fn signal(rng: &mut Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
    }

    #[test]
    fn payload_is_a_quarter() {
        let m = build_res1dcnn(&Res1dCnnConfig::default(), 1).unwrap();
        let (q, _) = quantize_model(&m).unwrap();
        assert_eq!(q.payload_bytes() * 4, float_payload_bytes(&m));
        assert!(q.same_topology(&m));
    }

    #[test]
    fn zero_model() {
        let mut m = build_res1dcnn(&Res1dCnnConfig::default(), 1).unwrap();
        m.params_mut().into_iter().for_each(|p| p.fill(0.0));
        let (q, report) = quantize_model(&m).unwrap();
        assert!(q.convs().iter().all(|c| c.weight.iter().all(|&v| v == 0)));
        assert_eq!(report.total(), 0);
        let mut rng = component_rng(1, "zero");
        let (p, _) = q.forward(&signal(&mut rng, 768)).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn identity_conv_passes_raw_values() {
        let conv = QConv1d {
            in_channels: 1,
            out_channels: 1,
            kernel: 1,
            stride: 1,
            weight: vec![8192],
            bias: vec![0],
        };
        let x = QTensor {
            channels: 1,
            len: 5,
            data: vec![-32768, -3, 0, 17, 32767],
        };
        let mut d = Diagnostics::default();
        assert_eq!(conv.forward(&x, Q2_13, &mut d).unwrap(), x);
        assert_eq!(d.saturations, 0);
    }

    #[test]
    fn parameter_round_trip() {
        let m = random_model(4, 64, 3.9);
        let (q, report) = quantize_model(&m).unwrap();
        assert_eq!(report.total(), 0);
        let back = q.dequantized();
        for (a, b) in m.flat_params().iter().zip(back.flat_params()) {
            assert!((a - b).abs() <= 2f64.powi(-14));
        }
    }

    #[test]
    fn saturation_is_reported_per_layer() {
        let mut m = random_model(4, 64, 0.1);
        m.extractor.blocks[2].conv2.weight[0] = 7.0;
        m.head.bias[1] = -9.0;
        let (_, report) = quantize_model(&m).unwrap();
        assert_eq!(report.saturated, vec![("block3.conv2".to_string(), 1), ("head".to_string(), 1)]);
        assert_eq!(report.warnings().len(), 2);
    }

    /// Float forward of the dequantized model on the dequantized input.
    fn float_oracle(q: &QuantizedModel, x: &[f64]) -> Vec<f64> {
        let xq: Vec<f64> = x.iter().map(|&v| q.format.dequantize(q.format.quantize(v).unwrap())).collect();
        q.dequantized().forward(&xq).unwrap()
    }

    #[test]
    fn tracks_float_path() {
        let mut rng = component_rng(12, "track");
        let m = random_model(12, 128, 0.5);
        let (q, _) = quantize_model(&m).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let x = signal(&mut rng, 128);
            let (p, d) = q.forward(&x).unwrap();
            let want = float_oracle(&q, &x);
            if d.saturations == 0 {
                worst = worst.max((p[0] - want[0]).abs());
            }
        }
        assert!(worst < 0.05, "worst {worst}");
    }

    #[test]
    fn conv_requantization_error_is_half_step() {
        // One conv layer whose outputs stay in range: integer result equals
        // the rounded exact product sum.
        let mut rng = component_rng(2, "layer");
        let f = Q2_13;
        for _ in 0..50 {
            let conv = QConv1d {
                in_channels: 2,
                out_channels: 3,
                kernel: 3,
                stride: 2,
                weight: (0..18).map(|_| rng.random_range(-3000..3000)).collect(),
                bias: (0..3).map(|_| rng.random_range(-3000..3000)).collect(),
            };
            let x = QTensor {
                channels: 2,
                len: 17,
                data: (0..34).map(|_| rng.random_range(-8000..8000)).collect(),
            };
            let mut d = Diagnostics::default();
            let got = conv.forward(&x, f, &mut d).unwrap();
            let fl = deq_conv(&conv, f)
                .forward(&crate::nn::Tensor::new(vec![2, 17], x.data.iter().map(|&v| f.dequantize(v)).collect()).unwrap())
                .unwrap();
            for (g, w) in got.data.iter().zip(fl.data()) {
                if w.abs() < 3.9 {
                    assert!((f.dequantize(*g) - w).abs() <= 2f64.powi(-14) + 1e-15);
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let m = random_model(7, 64, 0.3);
        let (q, _) = quantize_model(&m).unwrap();
        let x = signal(&mut component_rng(7, "x"), 64);
        assert_eq!(q.forward(&x).unwrap(), q.forward(&x).unwrap());
    }

    #[test]
    fn topology_mismatch() {
        let m = build_res1dcnn(&Res1dCnnConfig::default(), 1).unwrap();
        let other = build_res1dcnn(&Res1dCnnConfig::reduced(768), 1).unwrap();
        let (q, _) = quantize_model(&other).unwrap();
        assert!(matches!(accuracy_drop(&m, &q, &[]), Err(Error::TopologyMismatch(_))));
    }
}
