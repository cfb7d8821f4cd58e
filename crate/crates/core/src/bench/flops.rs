use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::nn::{Conv1d, Dense};
use crate::quant::{QConv1d, QuantizedModel};
use crate::res1dcnn::{FeatureExtractor, StudentModel, TeacherModel};

/// Multiply-accumulate operations of one forward pass, by layer kind.
/// Pooling counts one accumulate per pooled value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MacCount {
    pub conv: u64,
    pub pooling: u64,
    pub fusion: u64,
    pub dense: u64,
}

impl MacCount {
    pub fn total(&self) -> u64 {
        self.conv + self.pooling + self.fusion + self.dense
    }
}

impl Add for MacCount {
    type Output = MacCount;

    fn add(self, o: MacCount) -> MacCount {
        MacCount {
            conv: self.conv + o.conv,
            pooling: self.pooling + o.pooling,
            fusion: self.fusion + o.fusion,
            dense: self.dense + o.dense,
        }
    }
}

/// Geometry of one conv layer: `(in, out, kernel, stride)`.
type ConvShape = (usize, usize, usize, usize);

fn conv_macs((cin, cout, k, s): ConvShape, len: usize) -> (u64, usize) {
    let out = len.div_ceil(s);
    ((cin * cout * k * out) as u64, out)
}

/// Stem, per block `(conv1, conv2, projection)`, then the closing conv.
/// Parameter-free shortcuts cost nothing.
fn count_extractor(
    stem: ConvShape,
    blocks: &[(ConvShape, ConvShape, Option<ConvShape>)],
    last: Option<ConvShape>,
    len: usize,
) -> MacCount {
    let (mut conv, mut l) = conv_macs(stem, len);
    let mut channels = stem.1;
    for &(c1, c2, sc) in blocks {
        let (m1, l1) = conv_macs(c1, l);
        let (m2, _) = conv_macs(c2, l1);
        let m3 = sc.map_or(0, |p| conv_macs(p, l).0);
        conv += m1 + m2 + m3;
        l = l1;
        channels = c2.1;
    }
    if let Some(f) = last {
        conv += conv_macs(f, l).0;
        channels = f.1;
    }
    MacCount {
        conv,
        pooling: (channels * l) as u64,
        ..MacCount::default()
    }
}

fn shape(c: &Conv1d) -> ConvShape {
    (c.in_channels, c.out_channels, c.kernel, c.stride)
}

fn qshape(c: &QConv1d) -> ConvShape {
    (c.in_channels, c.out_channels, c.kernel, c.stride)
}

pub fn extractor_macs(ex: &FeatureExtractor, len: usize) -> MacCount {
    let blocks: Vec<_> = ex
        .blocks
        .iter()
        .map(|b| (shape(&b.conv1), shape(&b.conv2), b.projection().map(shape)))
        .collect();
    count_extractor(shape(&ex.stem), &blocks, ex.final_conv.as_ref().map(shape), len)
}

pub fn dense_macs(d: &Dense) -> MacCount {
    MacCount {
        dense: (d.in_features * d.out_features) as u64,
        ..MacCount::default()
    }
}

/// MAC count of a model on `len`-sample inputs.
pub trait FlopCount {
    fn flop_count(&self, len: usize) -> MacCount;
}

impl FlopCount for StudentModel {
    fn flop_count(&self, len: usize) -> MacCount {
        extractor_macs(&self.extractor, len) + dense_macs(&self.head)
    }
}

impl FlopCount for TeacherModel {
    fn flop_count(&self, len: usize) -> MacCount {
        let branches = self
            .extractors()
            .iter()
            .map(|e| extractor_macs(e, len))
            .fold(MacCount::default(), Add::add);
        let fusion = MacCount {
            fusion: 3 * self.feature_len() as u64,
            ..MacCount::default()
        };
        branches + fusion + dense_macs(&self.head)
    }
}

impl FlopCount for QuantizedModel {
    fn flop_count(&self, len: usize) -> MacCount {
        let blocks: Vec<_> = self
            .blocks
            .iter()
            .map(|b| (qshape(&b.conv1), qshape(&b.conv2), b.projection().map(qshape)))
            .collect();
        count_extractor(qshape(&self.stem), &blocks, self.final_conv.as_ref().map(qshape), len)
            + MacCount {
                dense: (self.head.in_features * self.head.out_features) as u64,
                ..MacCount::default()
            }
    }
}

pub fn flop_count<M: FlopCount + ?Sized>(model: &M, len: usize) -> MacCount {
    model.flop_count(len)
}
