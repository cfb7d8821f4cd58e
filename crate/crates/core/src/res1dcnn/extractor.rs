use crate::error::{Error, Result};
use crate::nn::{fill_normal, relu, relu_backward, Conv1d, Params, Tensor, INIT_STD};
use crate::preprocess::PreprocessedSegment;
use crate::res1dcnn::config::Res1dCnnConfig;
use crate::rng::Rng;

/// Feature vector z of length L produced by an extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap(pub Vec<f64>);

impl FeatureMap {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Path that carries a block's input to its output.
#[derive(Debug, Clone, PartialEq)]
pub enum Shortcut {
    Identity,
    /// Keep every `stride`-th sample and zero-fill channels up to `out_channels`.
    ZeroPad { stride: usize, out_channels: usize },
    Projection(Conv1d),
}

/// Sample `t` of the output reads sample `t * stride` of the input, which is
/// where a 1-tap strided convolution would read.
pub fn zero_pad_shortcut(x: &Tensor, stride: usize, out_channels: usize) -> Result<Tensor> {
    if out_channels < x.channels() || stride == 0 {
        return Err(Error::shape("zero-pad shortcut", format!("<= {out_channels} channels"), x.channels()));
    }
    let len = x.length().div_ceil(stride);
    let mut out = Tensor::zeros(&[out_channels, len]);
    for c in 0..x.channels() {
        let src = x.row(c);
        for (t, v) in out.row_mut(c).iter_mut().enumerate() {
            *v = src[t * stride];
        }
    }
    Ok(out)
}

fn zero_pad_backward(x: &Tensor, stride: usize, g: &Tensor) -> Tensor {
    let mut gx = Tensor::zeros(x.shape());
    for c in 0..x.channels() {
        let src = g.row(c);
        let dst = gx.row_mut(c);
        for (t, v) in src.iter().enumerate() {
            dst[t * stride] += v;
        }
    }
    gx
}

/// `relu(conv2(relu(conv1(x))) + shortcut(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResBlock {
    pub conv1: Conv1d,
    pub conv2: Conv1d,
    pub shortcut: Shortcut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockTrace {
    pub pre1: Tensor,
    pub act1: Tensor,
    pub pre_out: Tensor,
    pub out: Tensor,
}

impl ResBlock {
    pub fn projection(&self) -> Option<&Conv1d> {
        match &self.shortcut {
            Shortcut::Projection(p) => Some(p),
            _ => None,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<BlockTrace> {
        let pre1 = self.conv1.forward(x)?;
        let act1 = relu(&pre1);
        let mut pre_out = self.conv2.forward(&act1)?;
        match &self.shortcut {
            Shortcut::Identity => pre_out.add_assign(x)?,
            Shortcut::ZeroPad { stride, out_channels } => {
                pre_out.add_assign(&zero_pad_shortcut(x, *stride, *out_channels)?)?
            }
            Shortcut::Projection(p) => pre_out.add_assign(&p.forward(x)?)?,
        }
        let out = relu(&pre_out);
        Ok(BlockTrace {
            pre1,
            act1,
            pre_out,
            out,
        })
    }

    fn backward(&self, x: &Tensor, trace: &BlockTrace, grad_out: &Tensor, grad: &mut ResBlock) -> Result<Tensor> {
        let g_pre = relu_backward(&trace.pre_out, grad_out);
        let g_act1 = self.conv2.backward(&trace.act1, &g_pre, &mut grad.conv2)?;
        let g_pre1 = relu_backward(&trace.pre1, &g_act1);
        let mut g_x = self.conv1.backward(x, &g_pre1, &mut grad.conv1)?;
        match (&self.shortcut, &mut grad.shortcut) {
            (Shortcut::Identity, Shortcut::Identity) => g_x.add_assign(&g_pre)?,
            (Shortcut::ZeroPad { stride, .. }, Shortcut::ZeroPad { .. }) => {
                g_x.add_assign(&zero_pad_backward(x, *stride, &g_pre))?
            }
            (Shortcut::Projection(p), Shortcut::Projection(gp)) => g_x.add_assign(&p.backward(x, &g_pre, gp)?)?,
            _ => return Err(Error::shape("residual gradient", "matching shortcut", "mismatched")),
        }
        Ok(g_x)
    }
}

impl Params for ResBlock {
    fn params(&self) -> Vec<&[f64]> {
        let mut v = self.conv1.params();
        v.extend(self.conv2.params());
        if let Shortcut::Projection(p) = &self.shortcut {
            v.extend(p.params());
        }
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.conv1.params_mut();
        v.extend(self.conv2.params_mut());
        if let Shortcut::Projection(p) = &mut self.shortcut {
            v.extend(p.params_mut());
        }
        v
    }
}

/// Stem convolution, residual blocks, optional closing 1x1 convolution,
/// global average pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor {
    pub stem: Conv1d,
    pub blocks: Vec<ResBlock>,
    pub final_conv: Option<Conv1d>,
}

/// Cached activations of one forward pass, consumed by `backward`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExtractorTrace {
    pub input: Option<Tensor>,
    pub stem_pre: Option<Tensor>,
    pub stem_out: Option<Tensor>,
    pub blocks: Vec<BlockTrace>,
    pub final_pre: Option<Tensor>,
    pub final_out: Option<Tensor>,
    pub features: FeatureMap,
}

impl Default for FeatureMap {
    fn default() -> Self {
        FeatureMap(Vec::new())
    }
}

impl FeatureExtractor {
    /// All-zero extractor with the layout of `cfg` (no validation).
    pub fn zeros(cfg: &Res1dCnnConfig) -> Self {
        let stem = Conv1d::zeros(cfg.input_channels, cfg.stem.out_channels, cfg.stem.kernel, cfg.stem.stride);
        let blocks = cfg
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let cin = cfg.block_in_channels(i);
                ResBlock {
                    conv1: Conv1d::zeros(cin, b.out_channels, cfg.block_kernel, b.stride),
                    conv2: Conv1d::zeros(b.out_channels, b.out_channels, cfg.block_kernel, 1),
                    shortcut: if !cfg.block_reshapes(i) {
                        Shortcut::Identity
                    } else if cfg.block_has_projection(i) {
                        Shortcut::Projection(Conv1d::zeros(cin, b.out_channels, 1, b.stride))
                    } else {
                        Shortcut::ZeroPad {
                            stride: b.stride,
                            out_channels: b.out_channels,
                        }
                    },
                }
            })
            .collect();
        let width = cfg.blocks.last().map_or(cfg.stem.out_channels, |b| b.out_channels);
        let final_conv = cfg.final_conv.map(|w| Conv1d::zeros(width, w, 1, 1));
        Self {
            stem,
            blocks,
            final_conv,
        }
    }

    /// Validated layout, weights drawn from N(0, 0.01^2), biases zero.
    pub fn init(cfg: &Res1dCnnConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        Ok(Self::zeros(cfg).reinitialized(rng))
    }

    /// Same layout, fresh weights from N(0, 0.01^2), biases zero.
    pub fn reinitialized(&self, rng: &mut Rng) -> Self {
        let mut ex = self.zeros_like();
        for conv in ex.convs_mut() {
            fill_normal(&mut conv.weight, INIT_STD, rng);
        }
        ex
    }

    pub fn convs(&self) -> Vec<&Conv1d> {
        let mut v = vec![&self.stem];
        for b in &self.blocks {
            v.push(&b.conv1);
            v.push(&b.conv2);
            if let Shortcut::Projection(p) = &b.shortcut {
                v.push(p);
            }
        }
        v.extend(&self.final_conv);
        v
    }

    fn convs_mut(&mut self) -> Vec<&mut Conv1d> {
        let mut v = vec![&mut self.stem];
        for b in &mut self.blocks {
            v.push(&mut b.conv1);
            v.push(&mut b.conv2);
            if let Shortcut::Projection(p) = &mut b.shortcut {
                v.push(p);
            }
        }
        v.extend(&mut self.final_conv);
        v
    }

    /// Number of convolutional weight layers, found by walking the graph.
    pub fn conv_layer_count(&self) -> usize {
        self.convs().len()
    }

    pub fn feature_len(&self) -> usize {
        match &self.final_conv {
            Some(f) => f.out_channels,
            None => self.blocks.last().map_or(self.stem.out_channels, |b| b.conv2.out_channels),
        }
    }

    pub fn input_channels(&self) -> usize {
        self.stem.in_channels
    }

    pub fn forward(&self, input: &Tensor) -> Result<ExtractorTrace> {
        let stem_pre = self.stem.forward(input)?;
        let stem_out = relu(&stem_pre);
        let mut blocks: Vec<BlockTrace> = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let x = blocks.last().map_or(&stem_out, |t| &t.out);
            let t = b.forward(x)?;
            blocks.push(t);
        }
        let body = blocks.last().map_or(&stem_out, |t| &t.out);
        let (final_pre, final_out) = match &self.final_conv {
            Some(f) => {
                let pre = f.forward(body)?;
                let out = relu(&pre);
                (Some(pre), Some(out))
            }
            None => (None, None),
        };
        let last = final_out.as_ref().unwrap_or(body);
        let len = last.length() as f64;
        let features = FeatureMap((0..last.channels()).map(|c| last.row(c).iter().sum::<f64>() / len).collect());
        Ok(ExtractorTrace {
            input: Some(input.clone()),
            stem_pre: Some(stem_pre),
            stem_out: Some(stem_out),
            blocks,
            final_pre,
            final_out,
            features,
        })
    }

    /// Features of a raw single-channel signal of any length.
    pub fn features_of(&self, signal: &[f64]) -> Result<FeatureMap> {
        Ok(self.forward(&Tensor::from_signal(signal))?.features)
    }

    /// Features of a standardized 768-sample window.
    pub fn extract_features(&self, segment: &PreprocessedSegment) -> Result<FeatureMap> {
        if segment.samples.len() != crate::biosignal::WINDOW_LEN {
            return Err(Error::shape("extractor input", crate::biosignal::WINDOW_LEN, segment.samples.len()));
        }
        self.features_of(&segment.samples)
    }

    /// Backpropagates `grad_z` through a trace from [`forward`](Self::forward).
    /// Returns parameter gradients and the gradient with respect to the input.
    pub fn backward(&self, trace: &ExtractorTrace, grad_z: &[f64]) -> Result<(FeatureExtractor, Tensor)> {
        let (Some(input), Some(stem_pre), Some(stem_out)) = (&trace.input, &trace.stem_pre, &trace.stem_out) else {
            return Err(Error::MissingForward);
        };
        if trace.blocks.len() != self.blocks.len() || trace.final_out.is_some() != self.final_conv.is_some() {
            return Err(Error::MissingForward);
        }
        let body = trace.blocks.last().map_or(stem_out, |t| &t.out);
        let last = trace.final_out.as_ref().unwrap_or(body);
        if grad_z.len() != last.channels() {
            return Err(Error::shape("feature gradient", last.channels(), grad_z.len()));
        }
        let mut grad = self.zeros_like();
        let len = last.length();
        let mut g = Tensor::zeros(&[last.channels(), len]);
        for (c, &gz) in grad_z.iter().enumerate() {
            g.row_mut(c).fill(gz / len as f64);
        }
        if let (Some(f), Some(pre), Some(gf)) = (&self.final_conv, &trace.final_pre, &mut grad.final_conv) {
            let g_pre = relu_backward(pre, &g);
            g = f.backward(body, &g_pre, gf)?;
        }
        for (i, b) in self.blocks.iter().enumerate().rev() {
            let x = if i == 0 { stem_out } else { &trace.blocks[i - 1].out };
            g = b.backward(x, &trace.blocks[i], &g, &mut grad.blocks[i])?;
        }
        let g_stem = relu_backward(stem_pre, &g);
        let g_in = self.stem.backward(input, &g_stem, &mut grad.stem)?;
        Ok((grad, g_in))
    }
}

impl Params for FeatureExtractor {
    fn params(&self) -> Vec<&[f64]> {
        let mut v = self.stem.params();
        for b in &self.blocks {
            v.extend(b.params());
        }
        if let Some(f) = &self.final_conv {
            v.extend(f.params());
        }
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.stem.params_mut();
        for b in &mut self.blocks {
            v.extend(b.params_mut());
        }
        if let Some(f) = &mut self.final_conv {
            v.extend(f.params_mut());
        }
        v
    }
}
