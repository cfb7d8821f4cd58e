use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::params::Params;
use crate::nn::tensor::Tensor;
use crate::rng::Rng;

/// Standard deviation of the initial weight distribution.
pub const INIT_STD: f64 = 0.01;

/// 1-D cross-correlation with zero "same" padding.
///
/// Weights are stored `[out][in][kernel]`. Output length is
/// `ceil(len / stride)`; the padding total is split with the extra sample on
/// the right.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            weight: vec![0.0; out_channels * in_channels * kernel],
            bias: vec![0.0; out_channels],
        }
    }

    pub fn output_len(&self, len: usize) -> usize {
        len.div_ceil(self.stride)
    }

    pub fn pad_left(&self, len: usize) -> usize {
        let out = self.output_len(len);
        let total = ((out.saturating_sub(1)) * self.stride + self.kernel).saturating_sub(len);
        total / 2
    }

    /// Output positions `t` for which tap `k` reads inside the input.
    pub(crate) fn valid_range(&self, k: usize, len: usize, pad: usize, out_len: usize) -> std::ops::Range<usize> {
        // need 0 <= t*s + k - pad < len
        let lo = if pad > k { (pad - k).div_ceil(self.stride) } else { 0 };
        let hi = if len + pad > k {
            ((len + pad - k - 1) / self.stride + 1).min(out_len)
        } else {
            0
        };
        lo..hi.max(lo)
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape().len() != 2 || input.channels() != self.in_channels {
            return Err(Error::shape(
                "conv1d input",
                format!("({}, L)", self.in_channels),
                format!("{:?}", input.shape()),
            ));
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let len = input.length();
        let out_len = self.output_len(len);
        let pad = self.pad_left(len);
        let s = self.stride;
        let mut out = Tensor::zeros(&[self.out_channels, out_len]);
        for o in 0..self.out_channels {
            let row = out.row_mut(o);
            row.fill(self.bias[o]);
            for i in 0..self.in_channels {
                let x = input.row(i);
                let w = &self.weight[(o * self.in_channels + i) * self.kernel..][..self.kernel];
                for (k, &wk) in w.iter().enumerate() {
                    let r = self.valid_range(k, len, pad, out_len);
                    if r.is_empty() {
                        continue;
                    }
                    let base = r.start * s + k - pad;
                    if s == 1 {
                        for (y, xv) in row[r.clone()].iter_mut().zip(&x[base..]) {
                            *y += wk * xv;
                        }
                    } else {
                        for (j, y) in row[r].iter_mut().enumerate() {
                            *y += wk * x[base + j * s];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to `input`.
    pub fn backward(&self, input: &Tensor, grad_out: &Tensor, grad: &mut Conv1d) -> Result<Tensor> {
        self.check_input(input)?;
        let len = input.length();
        let out_len = self.output_len(len);
        if grad_out.shape() != [self.out_channels, out_len] {
            return Err(Error::shape(
                "conv1d upstream gradient",
                format!("[{}, {out_len}]", self.out_channels),
                format!("{:?}", grad_out.shape()),
            ));
        }
        let pad = self.pad_left(len);
        let s = self.stride;
        let mut grad_in = Tensor::zeros(&[self.in_channels, len]);
        for o in 0..self.out_channels {
            let g = grad_out.row(o);
            grad.bias[o] += g.iter().sum::<f64>();
            for i in 0..self.in_channels {
                let x = input.row(i);
                let widx = (o * self.in_channels + i) * self.kernel;
                for k in 0..self.kernel {
                    let r = self.valid_range(k, len, pad, out_len);
                    if r.is_empty() {
                        continue;
                    }
                    let base = r.start * s + k - pad;
                    let wk = self.weight[widx + k];
                    let gi = grad_in.row_mut(i);
                    let mut acc = 0.0;
                    if s == 1 {
                        let n = r.len();
                        for ((gv, xv), dx) in g[r].iter().zip(&x[base..base + n]).zip(&mut gi[base..base + n]) {
                            acc += gv * xv;
                            *dx += wk * gv;
                        }
                    } else {
                        for (j, gv) in g[r].iter().enumerate() {
                            let idx = base + j * s;
                            acc += gv * x[idx];
                            gi[idx] += wk * gv;
                        }
                    }
                    grad.weight[widx + k] += acc;
                }
            }
        }
        Ok(grad_in)
    }

    /// Multiply-accumulates for one forward pass over `len` samples.
    pub fn macs(&self, len: usize) -> u64 {
        (self.out_channels * self.in_channels * self.kernel * self.output_len(len)) as u64
    }
}

impl Params for Conv1d {
    fn params(&self) -> Vec<&[f64]> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Affine map `W x + b`, `W` stored `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_features: usize, out_features: usize) -> Self {
        Self {
            in_features,
            out_features,
            weight: vec![0.0; in_features * out_features],
            bias: vec![0.0; out_features],
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.in_features {
            return Err(Error::shape("dense input", self.in_features, input.len()));
        }
        Ok((0..self.out_features)
            .map(|o| {
                let w = &self.weight[o * self.in_features..(o + 1) * self.in_features];
                self.bias[o] + w.iter().zip(input).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect())
    }

    pub fn backward(&self, input: &[f64], grad_out: &[f64], grad: &mut Dense) -> Result<Vec<f64>> {
        if input.len() != self.in_features || grad_out.len() != self.out_features {
            return Err(Error::shape(
                "dense backward",
                format!("({}, {})", self.in_features, self.out_features),
                format!("({}, {})", input.len(), grad_out.len()),
            ));
        }
        let mut grad_in = vec![0.0; self.in_features];
        for (o, &g) in grad_out.iter().enumerate() {
            grad.bias[o] += g;
            let row = o * self.in_features;
            for j in 0..self.in_features {
                grad.weight[row + j] += g * input[j];
                grad_in[j] += g * self.weight[row + j];
            }
        }
        Ok(grad_in)
    }

    pub fn macs(&self) -> u64 {
        (self.in_features * self.out_features) as u64
    }
}

impl Params for Dense {
    fn params(&self) -> Vec<&[f64]> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    Dense {
        in_features: usize,
        out_features: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv1d(Conv1d),
    Dense(Dense),
}

impl Params for Layer {
    fn params(&self) -> Vec<&[f64]> {
        match self {
            Layer::Conv1d(c) => c.params(),
            Layer::Dense(d) => d.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Conv1d(c) => c.params_mut(),
            Layer::Dense(d) => d.params_mut(),
        }
    }
}

pub(crate) fn fill_normal(values: &mut [f64], std: f64, rng: &mut Rng) {
    let dist = Normal::new(0.0, std).expect("finite std");
    for v in values {
        *v = dist.sample(rng);
    }
}

/// Weights from N(0, 0.01^2), biases zero.
pub fn init_params(spec: LayerSpec, rng: &mut Rng) -> Result<Layer> {
    let mut layer = match spec {
        LayerSpec::Conv1d {
            in_channels,
            out_channels,
            kernel,
            stride,
        } => {
            if in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 {
                return Err(Error::InvalidConfig(format!("degenerate conv spec {spec:?}")));
            }
            Layer::Conv1d(Conv1d::zeros(in_channels, out_channels, kernel, stride))
        }
        LayerSpec::Dense {
            in_features,
            out_features,
        } => {
            if in_features == 0 || out_features == 0 {
                return Err(Error::InvalidConfig(format!("degenerate dense spec {spec:?}")));
            }
            Layer::Dense(Dense::zeros(in_features, out_features))
        }
    };
    match &mut layer {
        Layer::Conv1d(c) => fill_normal(&mut c.weight, INIT_STD, rng),
        Layer::Dense(d) => fill_normal(&mut d.weight, INIT_STD, rng),
    }
    Ok(layer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::component_rng;
    use rand::Rng as _;

    /// Nested-loop oracle, independent of the range arithmetic above.
    fn conv_oracle(c: &Conv1d, x: &Tensor) -> Vec<f64> {
        let len = x.length();
        let out_len = len.div_ceil(c.stride);
        let total = ((out_len - 1) * c.stride + c.kernel).saturating_sub(len);
        let pad = (total / 2) as isize;
        let mut out = vec![0.0; c.out_channels * out_len];
        for o in 0..c.out_channels {
            for t in 0..out_len {
                let mut acc = c.bias[o];
                for i in 0..c.in_channels {
                    for k in 0..c.kernel {
                        let idx = (t * c.stride + k) as isize - pad;
                        if idx >= 0 && (idx as usize) < len {
                            acc += c.weight[(o * c.in_channels + i) * c.kernel + k] * x.row(i)[idx as usize];
                        }
                    }
                }
                out[o * out_len + t] = acc;
            }
        }
        out
    }

    fn random_conv(rng: &mut Rng, cin: usize, cout: usize, k: usize, s: usize) -> Conv1d {
        let mut c = Conv1d::zeros(cin, cout, k, s);
        c.weight.iter_mut().for_each(|w| *w = rng.random::<f64>() - 0.5);
        c.bias.iter_mut().for_each(|w| *w = rng.random::<f64>() - 0.5);
        c
    }

    #[test]
    fn identity_kernel() {
        let mut c = Conv1d::zeros(1, 1, 1, 1);
        c.weight[0] = 1.0;
        let x = Tensor::from_signal(&[1.0, -2.0, 3.5, 0.25]);
        assert_eq!(c.forward(&x).unwrap(), x);
    }

    #[test]
    fn stride_two_halves_length() {
        let c = Conv1d::zeros(1, 4, 3, 2);
        assert_eq!(c.forward(&Tensor::zeros(&[1, 768])).unwrap().shape(), &[4, 384]);
    }

    #[test]
    fn matches_nested_loop_oracle() {
        let mut rng = component_rng(1, "conv-test");
        for &(cin, cout, k, s, len) in &[(2, 3, 3, 1, 17), (2, 2, 3, 2, 16), (3, 1, 7, 2, 25), (1, 2, 1, 2, 9), (2, 2, 4, 1, 5)] {
            let c = random_conv(&mut rng, cin, cout, k, s);
            let x = Tensor::new(vec![cin, len], (0..cin * len).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap();
            let got = c.forward(&x).unwrap();
            let want = conv_oracle(&c, &x);
            for (a, b) in got.data().iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn same_padding_preserves_length() {
        for k in [1, 3, 4, 7] {
            let c = Conv1d::zeros(1, 1, k, 1);
            for len in 1..=1000 {
                let mut expected = 0;
                for _ in 0..len {
                    expected += 1;
                }
                assert_eq!(c.forward(&Tensor::zeros(&[1, len])).unwrap().length(), expected);
            }
        }
    }

    #[test]
    fn conv_backward_is_adjoint() {
        // <conv(x) - b, g> == <x, grad_in> + <w, grad_w> / 2 split: check grad_in via
        // linearity of conv in x: sum_t g * (conv(x) - bias) == sum x * grad_in.
        let mut rng = component_rng(2, "conv-adjoint");
        let c = random_conv(&mut rng, 2, 3, 3, 2);
        let x = Tensor::new(vec![2, 11], (0..22).map(|_| rng.random::<f64>()).collect()).unwrap();
        let y = c.forward(&x).unwrap();
        let g = Tensor::new(y.shape().to_vec(), (0..y.data().len()).map(|_| rng.random::<f64>()).collect()).unwrap();
        let mut grad = c.zeros_like();
        let gx = c.backward(&x, &g, &mut grad).unwrap();
        let lhs: f64 = (0..3)
            .flat_map(|o| (0..y.length()).map(move |t| (o, t)))
            .map(|(o, t)| g.row(o)[t] * (y.row(o)[t] - c.bias[o]))
            .sum();
        let rhs: f64 = x.data().iter().zip(gx.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
        let rhs_w: f64 = c.weight.iter().zip(&grad.weight).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs_w).abs() < 1e-12);
    }

    #[test]
    fn conv_shape_mismatch() {
        let c = Conv1d::zeros(2, 1, 3, 1);
        assert!(c.forward(&Tensor::zeros(&[1, 10])).is_err());
    }

    #[test]
    fn dense_cases() {
        let mut d = Dense::zeros(3, 3);
        for i in 0..3 {
            d.weight[i * 3 + i] = 1.0;
        }
        assert_eq!(d.forward(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let mut z = Dense::zeros(3, 2);
        z.bias = vec![0.5, -1.5];
        assert_eq!(z.forward(&[9.0, 9.0, 9.0]).unwrap(), vec![0.5, -1.5]);
        assert!(z.forward(&[1.0]).is_err());

        let mut rng = component_rng(3, "dense");
        let mut r = Dense::zeros(4, 2);
        r.weight.iter_mut().for_each(|w| *w = rng.random::<f64>() - 0.5);
        r.bias.iter_mut().for_each(|w| *w = rng.random::<f64>() - 0.5);
        let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let y = r.forward(&x).unwrap();
        for o in 0..2 {
            let mut dot = r.bias[o];
            for j in 0..4 {
                dot += r.weight[o * 4 + j] * x[j];
            }
            assert!((y[o] - dot).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_gradient_is_outer_product() {
        // loss = sum(outputs): dL/dW[o][j] = x[j], dL/db = 1, dL/dx[j] = sum_o W[o][j]
        let mut d = Dense::zeros(3, 2);
        d.weight = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let x = [0.5, -1.0, 2.0];
        let mut g = d.zeros_like();
        let gx = d.backward(&x, &[1.0, 1.0], &mut g).unwrap();
        assert_eq!(g.weight, vec![0.5, -1.0, 2.0, 0.5, -1.0, 2.0]);
        assert_eq!(g.bias, vec![1.0, 1.0]);
        assert_eq!(gx, vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn init_statistics() {
        let mut rng = component_rng(42, "init");
        let layer = init_params(
            LayerSpec::Dense {
                in_features: 1000,
                out_features: 100,
            },
            &mut rng,
        )
        .unwrap();
        let Layer::Dense(d) = &layer else { unreachable!() };
        assert!(d.bias.iter().all(|&b| b == 0.0));
        let n = d.weight.len() as f64;
        let mean = d.weight.iter().sum::<f64>() / n;
        let std = (d.weight.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((0.0095..=0.0105).contains(&std), "std {std}");
        let again = init_params(
            LayerSpec::Dense {
                in_features: 1000,
                out_features: 100,
            },
            &mut component_rng(42, "init"),
        )
        .unwrap();
        assert_eq!(layer, again);
    }
}
