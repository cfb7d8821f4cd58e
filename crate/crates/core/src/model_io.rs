//! `R1DC` binary model format.
//!
//! ```text
//! magic        52 31 44 43 ("R1DC")
//! u16          version (1)
//! u8           precision (0 = float64, 1 = fixed point)
//! u8           fractional bits (0 for float64, 13 for Q2.13)
//! u8           kind (0 = single-branch student, 1 = three-branch teacher)
//! u8           flags (bit 0: teacher trained)
//! u32          layer count
//! per layer:   u8 tag, tag-specific attributes, u8 rank, rank x u32 dims,
//!              row-major payload (f64 or i16), then the bias payload
//! ```
//!
//! Layer tags, in stream order:
//!
//! | tag | layer       | attributes                          | dims              | payload                 |
//! |-----|-------------|-------------------------------------|-------------------|-------------------------|
//! | 1   | conv        | u32 stride                          | out, in, kernel   | weights, `out` biases   |
//! | 2   | dense head  |                                     | out, in           | weights, `out` biases   |
//! | 3   | fusion      |                                     | 3                 | theta                   |
//! | 4   | block       | u8 shortcut, u32 stride, u32 width  | (rank 0)          | none                    |
//! | 5   | branch      |                                     | (rank 0)          | none                    |
//! | 6   | closing conv| u32 stride                          | out, in, kernel   | weights, `out` biases   |
//!
//! A branch is a stem conv followed by blocks (each a block record, two convs
//! and, for projection shortcuts, a third conv) and an optional closing conv.
//! A student is one branch and a head; a teacher is three branches, a fusion
//! record and a head. All integers and floats are little-endian.

use std::path::Path;

use crate::codec::Reader;
use crate::error::{Error, Result};
use crate::nn::{Conv1d, Dense};
use crate::quant::{QConv1d, QDense, QFormat, QResBlock, QShortcut, QuantizedModel};
use crate::res1dcnn::{FeatureExtractor, FusionWeights, ResBlock, Shortcut, StudentModel, TeacherModel, NUM_CLASSES};

pub const MAGIC: [u8; 4] = *b"R1DC";
pub const VERSION: u16 = 1;

const FORMAT: &str = "R1DC";

const TAG_CONV: u8 = 1;
const TAG_DENSE: u8 = 2;
const TAG_FUSION: u8 = 3;
const TAG_BLOCK: u8 = 4;
const TAG_BRANCH: u8 = 5;
const TAG_FINAL: u8 = 6;

const KIND_STUDENT: u8 = 0;
const KIND_TEACHER: u8 = 1;

const FLAG_TRAINED: u8 = 1;

/// Largest accepted dimension; far above any real layer.
const MAX_DIM: u32 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Student(StudentModel),
    Teacher(TeacherModel),
    Quantized(QuantizedModel),
}

impl SavedModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            SavedModel::Student(_) => "student",
            SavedModel::Teacher(_) => "teacher",
            SavedModel::Quantized(_) => "quantized-student",
        }
    }
}

fn malformed(reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        format: FORMAT,
        reason: reason.into(),
    }
}

trait Scalar: Copy {
    const SIZE: u64;
    fn put(self, out: &mut Vec<u8>);
    fn get(r: &mut Reader) -> Result<Self>;
}

impl Scalar for f64 {
    const SIZE: u64 = 8;

    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn get(r: &mut Reader) -> Result<Self> {
        let v = r.f64()?;
        if !v.is_finite() {
            return Err(Error::NonFinite("R1DC parameter"));
        }
        Ok(v)
    }
}

impl Scalar for i16 {
    const SIZE: u64 = 2;

    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn get(r: &mut Reader) -> Result<Self> {
        r.i16()
    }
}

struct Writer {
    out: Vec<u8>,
    layers: u32,
}

impl Writer {
    fn new(precision: u8, frac_bits: u8, kind: u8, flags: u8) -> Self {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&[precision, frac_bits, kind, flags]);
        out.extend_from_slice(&0u32.to_le_bytes());
        Self { out, layers: 0 }
    }

    fn dims(&mut self, dims: &[usize]) {
        self.out.push(dims.len() as u8);
        for &d in dims {
            self.out.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }

    fn values<T: Scalar>(&mut self, values: &[T]) {
        for &v in values {
            v.put(&mut self.out);
        }
    }

    fn conv<T: Scalar>(&mut self, tag: u8, stride: usize, shape: [usize; 3], weight: &[T], bias: &[T]) {
        self.layers += 1;
        self.out.push(tag);
        self.out.extend_from_slice(&(stride as u32).to_le_bytes());
        self.dims(&shape);
        self.values(weight);
        self.values(bias);
    }

    fn dense<T: Scalar>(&mut self, shape: [usize; 2], weight: &[T], bias: &[T]) {
        self.layers += 1;
        self.out.push(TAG_DENSE);
        self.dims(&shape);
        self.values(weight);
        self.values(bias);
    }

    fn block(&mut self, shortcut: u8, stride: usize, width: usize) {
        self.layers += 1;
        self.out.push(TAG_BLOCK);
        self.out.push(shortcut);
        self.out.extend_from_slice(&(stride as u32).to_le_bytes());
        self.out.extend_from_slice(&(width as u32).to_le_bytes());
        self.dims(&[]);
    }

    fn branch(&mut self) {
        self.layers += 1;
        self.out.push(TAG_BRANCH);
        self.dims(&[]);
    }

    fn finish(mut self) -> Vec<u8> {
        self.out[10..14].copy_from_slice(&self.layers.to_le_bytes());
        self.out
    }
}

fn put_conv(w: &mut Writer, tag: u8, c: &Conv1d) {
    w.conv(tag, c.stride, [c.out_channels, c.in_channels, c.kernel], &c.weight, &c.bias);
}

fn put_qconv(w: &mut Writer, tag: u8, c: &QConv1d) {
    w.conv(tag, c.stride, [c.out_channels, c.in_channels, c.kernel], &c.weight, &c.bias);
}

fn put_extractor(w: &mut Writer, ex: &FeatureExtractor) {
    w.branch();
    put_conv(w, TAG_CONV, &ex.stem);
    for b in &ex.blocks {
        match &b.shortcut {
            Shortcut::Identity => w.block(0, b.conv1.stride, b.conv2.out_channels),
            &Shortcut::ZeroPad { stride, out_channels } => w.block(1, stride, out_channels),
            Shortcut::Projection(p) => w.block(2, p.stride, p.out_channels),
        }
        put_conv(w, TAG_CONV, &b.conv1);
        put_conv(w, TAG_CONV, &b.conv2);
        if let Some(p) = b.projection() {
            put_conv(w, TAG_CONV, p);
        }
    }
    if let Some(f) = &ex.final_conv {
        put_conv(w, TAG_FINAL, f);
    }
}

pub fn encode_student(model: &StudentModel) -> Vec<u8> {
    let mut w = Writer::new(0, 0, KIND_STUDENT, 0);
    put_extractor(&mut w, &model.extractor);
    w.dense([model.head.out_features, model.head.in_features], &model.head.weight, &model.head.bias);
    w.finish()
}

pub fn encode_teacher(model: &TeacherModel) -> Vec<u8> {
    let flags = if model.trained { FLAG_TRAINED } else { 0 };
    let mut w = Writer::new(0, 0, KIND_TEACHER, flags);
    for ex in model.extractors() {
        put_extractor(&mut w, ex);
    }
    w.layers += 1;
    w.out.push(TAG_FUSION);
    w.dims(&[3]);
    w.values(&model.fusion.theta);
    w.dense([model.head.out_features, model.head.in_features], &model.head.weight, &model.head.bias);
    w.finish()
}

pub fn encode_quantized(model: &QuantizedModel) -> Vec<u8> {
    let mut w = Writer::new(1, model.format.frac_bits as u8, KIND_STUDENT, 0);
    w.branch();
    put_qconv(&mut w, TAG_CONV, &model.stem);
    for b in &model.blocks {
        match &b.shortcut {
            QShortcut::Identity => w.block(0, b.conv1.stride, b.conv2.out_channels),
            &QShortcut::ZeroPad { stride, out_channels } => w.block(1, stride, out_channels),
            QShortcut::Projection(p) => w.block(2, p.stride, p.out_channels),
        }
        put_qconv(&mut w, TAG_CONV, &b.conv1);
        put_qconv(&mut w, TAG_CONV, &b.conv2);
        if let Some(p) = b.projection() {
            put_qconv(&mut w, TAG_CONV, p);
        }
    }
    if let Some(f) = &model.final_conv {
        put_qconv(&mut w, TAG_FINAL, f);
    }
    w.dense([model.head.out_features, model.head.in_features], &model.head.weight, &model.head.bias);
    w.finish()
}

pub fn encode(model: &SavedModel) -> Vec<u8> {
    match model {
        SavedModel::Student(m) => encode_student(m),
        SavedModel::Teacher(m) => encode_teacher(m),
        SavedModel::Quantized(m) => encode_quantized(m),
    }
}

/// Raw layer record before structural checks.
enum Record<T> {
    Conv { final_conv: bool, stride: usize, shape: [usize; 3], weight: Vec<T>, bias: Vec<T> },
    Dense { shape: [usize; 2], weight: Vec<T>, bias: Vec<T> },
    Fusion(Vec<f64>),
    Block { shortcut: u8, stride: usize, width: usize },
    Branch,
}

fn read_dims<const N: usize>(r: &mut Reader, what: &str) -> Result<[usize; N]> {
    let rank = r.u8()? as usize;
    if rank != N {
        return Err(malformed(format!("{what} has rank {rank}, expected {N}")));
    }
    let mut dims = [0usize; N];
    for d in &mut dims {
        let v = r.u32()?;
        if v == 0 || v > MAX_DIM {
            return Err(malformed(format!("{what} dimension {v} out of range")));
        }
        *d = v as usize;
    }
    Ok(dims)
}

fn read_values<T: Scalar>(r: &mut Reader, count: u64) -> Result<Vec<T>> {
    let n = r.ensure(count, T::SIZE)?;
    (0..n).map(|_| T::get(r)).collect()
}

fn read_stride(r: &mut Reader) -> Result<usize> {
    match r.u32()? {
        0 => Err(malformed("zero stride")),
        s if s > MAX_DIM => Err(malformed(format!("stride {s} out of range"))),
        s => Ok(s as usize),
    }
}

fn read_record<T: Scalar>(r: &mut Reader) -> Result<Record<T>> {
    let tag = r.u8()?;
    match tag {
        TAG_CONV | TAG_FINAL => {
            let stride = read_stride(r)?;
            let shape = read_dims::<3>(r, "conv")?;
            let count = shape.iter().map(|&d| d as u64).product();
            let weight = read_values(r, count)?;
            let bias = read_values(r, shape[0] as u64)?;
            Ok(Record::Conv {
                final_conv: tag == TAG_FINAL,
                stride,
                shape,
                weight,
                bias,
            })
        }
        TAG_DENSE => {
            let shape = read_dims::<2>(r, "dense")?;
            let weight = read_values(r, shape[0] as u64 * shape[1] as u64)?;
            let bias = read_values(r, shape[0] as u64)?;
            Ok(Record::Dense { shape, weight, bias })
        }
        TAG_FUSION => {
            let [n] = read_dims::<1>(r, "fusion")?;
            if n != 3 {
                return Err(malformed(format!("fusion has {n} weights, expected 3")));
            }
            Ok(Record::Fusion(read_values(r, 3)?))
        }
        TAG_BLOCK => {
            let shortcut = r.u8()?;
            if shortcut > 2 {
                return Err(malformed(format!("unknown shortcut kind {shortcut}")));
            }
            let stride = read_stride(r)?;
            let width = r.u32()?;
            if width == 0 || width > MAX_DIM {
                return Err(malformed(format!("block width {width} out of range")));
            }
            read_dims::<0>(r, "block")?;
            Ok(Record::Block {
                shortcut,
                stride,
                width: width as usize,
            })
        }
        TAG_BRANCH => {
            read_dims::<0>(r, "branch")?;
            Ok(Record::Branch)
        }
        other => Err(malformed(format!("unknown layer tag {other}"))),
    }
}

/// Conv parameters in stream form, independent of precision.
struct ConvParts<T> {
    stride: usize,
    shape: [usize; 3],
    weight: Vec<T>,
    bias: Vec<T>,
}

struct BlockParts<T> {
    shortcut: u8,
    stride: usize,
    width: usize,
    conv1: ConvParts<T>,
    conv2: ConvParts<T>,
    projection: Option<ConvParts<T>>,
}

struct BranchParts<T> {
    stem: ConvParts<T>,
    blocks: Vec<BlockParts<T>>,
    final_conv: Option<ConvParts<T>>,
}

struct Cursor<T> {
    records: std::vec::IntoIter<Record<T>>,
    peeked: Option<Record<T>>,
}

impl<T> Cursor<T> {
    fn next(&mut self) -> Option<Record<T>> {
        self.peeked.take().or_else(|| self.records.next())
    }

    fn peek_is_block(&mut self) -> bool {
        if self.peeked.is_none() {
            self.peeked = self.records.next();
        }
        matches!(self.peeked, Some(Record::Block { .. }))
    }

    fn peek_is_final(&mut self) -> bool {
        if self.peeked.is_none() {
            self.peeked = self.records.next();
        }
        matches!(self.peeked, Some(Record::Conv { final_conv: true, .. }))
    }

    fn conv(&mut self, what: &str) -> Result<ConvParts<T>> {
        match self.next() {
            Some(Record::Conv {
                final_conv: false,
                stride,
                shape,
                weight,
                bias,
            }) => Ok(ConvParts {
                stride,
                shape,
                weight,
                bias,
            }),
            _ => Err(malformed(format!("expected {what} conv"))),
        }
    }

    fn branch(&mut self) -> Result<BranchParts<T>> {
        if !matches!(self.next(), Some(Record::Branch)) {
            return Err(malformed("expected branch record"));
        }
        let stem = self.conv("stem")?;
        let mut channels = stem.shape[0];
        let mut blocks = Vec::new();
        while self.peek_is_block() {
            let Some(Record::Block { shortcut, stride, width }) = self.next() else {
                unreachable!("peeked a block record");
            };
            let conv1 = self.conv("block")?;
            let conv2 = self.conv("block")?;
            let projection = if shortcut == 2 { Some(self.conv("projection")?) } else { None };
            let chained = conv1.shape[1] == channels
                && conv1.shape[0] == width
                && conv1.stride == stride
                && conv2.shape[..2] == [width, width]
                && conv2.stride == 1;
            if !chained {
                return Err(Error::TopologyMismatch(format!("block {} convolutions do not chain", blocks.len() + 1)));
            }
            let shortcut_fits = match (&projection, shortcut) {
                (Some(p), _) => p.shape == [width, channels, 1] && p.stride == stride,
                (None, 0) => stride == 1 && width == channels,
                (None, _) => width >= channels,
            };
            if !shortcut_fits {
                return Err(Error::TopologyMismatch(format!("block {} shortcut does not fit", blocks.len() + 1)));
            }
            channels = width;
            blocks.push(BlockParts {
                shortcut,
                stride,
                width,
                conv1,
                conv2,
                projection,
            });
        }
        let final_conv = if self.peek_is_final() {
            let Some(Record::Conv {
                stride,
                shape,
                weight,
                bias,
                ..
            }) = self.next()
            else {
                unreachable!("peeked a conv record");
            };
            if shape[1] != channels || shape[2] != 1 || stride != 1 {
                return Err(Error::TopologyMismatch("closing conv does not fit".into()));
            }
            Some(ConvParts {
                stride,
                shape,
                weight,
                bias,
            })
        } else {
            None
        };
        Ok(BranchParts {
            stem,
            blocks,
            final_conv,
        })
    }

    fn dense(&mut self) -> Result<([usize; 2], Vec<T>, Vec<T>)> {
        match self.next() {
            Some(Record::Dense { shape, weight, bias }) => Ok((shape, weight, bias)),
            _ => Err(malformed("expected dense head")),
        }
    }
}

impl<T> BranchParts<T> {
    fn feature_len(&self) -> usize {
        self.final_conv
            .as_ref()
            .map(|c| c.shape[0])
            .or(self.blocks.last().map(|b| b.width))
            .unwrap_or(self.stem.shape[0])
    }
}

fn float_conv(p: ConvParts<f64>) -> Conv1d {
    Conv1d {
        in_channels: p.shape[1],
        out_channels: p.shape[0],
        kernel: p.shape[2],
        stride: p.stride,
        weight: p.weight,
        bias: p.bias,
    }
}

fn fixed_conv(p: ConvParts<i16>) -> QConv1d {
    QConv1d {
        in_channels: p.shape[1],
        out_channels: p.shape[0],
        kernel: p.shape[2],
        stride: p.stride,
        weight: p.weight,
        bias: p.bias,
    }
}

fn float_extractor(b: BranchParts<f64>) -> FeatureExtractor {
    FeatureExtractor {
        stem: float_conv(b.stem),
        blocks: b
            .blocks
            .into_iter()
            .map(|p| ResBlock {
                conv1: float_conv(p.conv1),
                conv2: float_conv(p.conv2),
                shortcut: match (p.shortcut, p.projection) {
                    (_, Some(c)) => Shortcut::Projection(float_conv(c)),
                    (0, None) => Shortcut::Identity,
                    _ => Shortcut::ZeroPad {
                        stride: p.stride,
                        out_channels: p.width,
                    },
                },
            })
            .collect(),
        final_conv: b.final_conv.map(float_conv),
    }
}

fn head_fits(shape: [usize; 2], features: usize) -> Result<()> {
    if shape != [NUM_CLASSES, features] {
        return Err(Error::TopologyMismatch(format!(
            "head is {}x{}, expected {NUM_CLASSES}x{features}",
            shape[0], shape[1]
        )));
    }
    Ok(())
}

fn read_all<T: Scalar>(r: &mut Reader, count: u32) -> Result<Cursor<T>> {
    // Every record is at least two bytes, which bounds the allocation.
    let count = r.ensure(u64::from(count), 2)?;
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        records.push(read_record(r)?);
    }
    r.finish()?;
    Ok(Cursor {
        records: records.into_iter(),
        peeked: None,
    })
}

fn ensure_consumed<T>(c: &mut Cursor<T>) -> Result<()> {
    if c.next().is_some() {
        return Err(malformed("unexpected records after the head"));
    }
    Ok(())
}

pub fn decode(bytes: &[u8]) -> Result<SavedModel> {
    let mut r = Reader::new(bytes, FORMAT);
    let magic = r.bytes(4).map_err(|_| malformed("missing magic"))?;
    if magic != MAGIC {
        return Err(malformed(format!("bad magic {magic:02x?}")));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            format: FORMAT,
            version,
        });
    }
    let precision = r.u8()?;
    let frac_bits = r.u8()?;
    let kind = r.u8()?;
    let flags = r.u8()?;
    let count = r.u32()?;
    if flags & !FLAG_TRAINED != 0 {
        return Err(malformed(format!("unknown flags {flags:#04x}")));
    }
    match (precision, kind) {
        (0, _) if frac_bits != 0 => Err(malformed("float64 model with fractional bits")),
        (0, KIND_STUDENT) => {
            let mut c = read_all::<f64>(&mut r, count)?;
            let branch = c.branch()?;
            let features = branch.feature_len();
            let (shape, weight, bias) = c.dense()?;
            ensure_consumed(&mut c)?;
            head_fits(shape, features)?;
            Ok(SavedModel::Student(StudentModel {
                extractor: float_extractor(branch),
                head: Dense {
                    in_features: shape[1],
                    out_features: shape[0],
                    weight,
                    bias,
                },
            }))
        }
        (0, KIND_TEACHER) => {
            let mut c = read_all::<f64>(&mut r, count)?;
            let branches = [c.branch()?, c.branch()?, c.branch()?];
            let features = branches[0].feature_len();
            if branches.iter().any(|b| b.feature_len() != features) {
                return Err(Error::TopologyMismatch("teacher branches differ in feature length".into()));
            }
            let theta = match c.next() {
                Some(Record::Fusion(v)) => [v[0], v[1], v[2]],
                _ => return Err(malformed("expected fusion record")),
            };
            let (shape, weight, bias) = c.dense()?;
            ensure_consumed(&mut c)?;
            head_fits(shape, features)?;
            let [ecg, eeg1, eeg2] = branches.map(float_extractor);
            Ok(SavedModel::Teacher(TeacherModel {
                ecg,
                eeg1,
                eeg2,
                fusion: FusionWeights { theta },
                head: Dense {
                    in_features: shape[1],
                    out_features: shape[0],
                    weight,
                    bias,
                },
                trained: flags & FLAG_TRAINED != 0,
            }))
        }
        (1, KIND_STUDENT) => {
            let format = QFormat::new(u32::from(frac_bits))?;
            if flags != 0 {
                return Err(malformed("quantized model with flags set"));
            }
            let mut c = read_all::<i16>(&mut r, count)?;
            let branch = c.branch()?;
            let features = branch.feature_len();
            let (shape, weight, bias) = c.dense()?;
            ensure_consumed(&mut c)?;
            head_fits(shape, features)?;
            Ok(SavedModel::Quantized(QuantizedModel {
                format,
                stem: fixed_conv(branch.stem),
                blocks: branch
                    .blocks
                    .into_iter()
                    .map(|p| QResBlock {
                        conv1: fixed_conv(p.conv1),
                        conv2: fixed_conv(p.conv2),
                        shortcut: match (p.shortcut, p.projection) {
                            (_, Some(c)) => QShortcut::Projection(fixed_conv(c)),
                            (0, None) => QShortcut::Identity,
                            _ => QShortcut::ZeroPad {
                                stride: p.stride,
                                out_channels: p.width,
                            },
                        },
                    })
                    .collect(),
                final_conv: branch.final_conv.map(fixed_conv),
                head: QDense {
                    in_features: shape[1],
                    out_features: shape[0],
                    weight,
                    bias,
                },
            }))
        }
        (0 | 1, k) => Err(malformed(format!("unsupported model kind {k} for precision {precision}"))),
        (p, _) => Err(malformed(format!("unknown precision tag {p}"))),
    }
}

pub fn save_model(path: &Path, model: &SavedModel) -> Result<()> {
    std::fs::write(path, encode(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Params;
    use crate::quant::quantize_model;
    use crate::res1dcnn::{build_res1dcnn, build_teacher, Res1dCnnConfig};

    #[test]
    fn student_round_trip() {
        for cfg in [Res1dCnnConfig::default(), Res1dCnnConfig::reduced_projection(64)] {
            let m = build_res1dcnn(&cfg, 3).unwrap();
            let bytes = encode_student(&m);
            assert_eq!(&bytes[..4], b"R1DC");
            assert_eq!(decode(&bytes).unwrap(), SavedModel::Student(m));
        }
    }

    #[test]
    fn teacher_round_trip_keeps_flag() {
        let mut t = build_teacher(&Res1dCnnConfig::reduced(64), 5).unwrap();
        t.fusion.theta = [0.2, -1.5, 3.0];
        for trained in [false, true] {
            t.trained = trained;
            assert_eq!(decode(&encode_teacher(&t)).unwrap(), SavedModel::Teacher(t.clone()));
        }
    }

    #[test]
    fn quantized_round_trip_and_payload() {
        let m = build_res1dcnn(&Res1dCnnConfig::default(), 3).unwrap();
        let (q, _) = quantize_model(&m).unwrap();
        let qb = encode_quantized(&q);
        assert_eq!(qb[6], 1);
        assert_eq!(qb[7], 13);
        assert_eq!(decode(&qb).unwrap(), SavedModel::Quantized(q.clone()));
        // Same layer stream; parameter bytes shrink from 8 to 2 each.
        let fb = encode_student(&m);
        assert_eq!(fb.len() - qb.len(), 6 * m.flat_params().len());
    }

    #[test]
    fn rejects_corruption() {
        let m = build_res1dcnn(&Res1dCnnConfig::reduced(64), 1).unwrap();
        let bytes = encode_student(&m);
        assert!(matches!(decode(&bytes[..3]), Err(Error::MalformedHeader { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::MalformedHeader { .. })));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(decode(&bad), Err(Error::UnsupportedVersion { version: 9, .. })));
        for cut in [10, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(decode(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
        let mut huge = bytes.clone();
        huge[10..14].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode(&huge).is_err());
    }

    #[test]
    fn rejects_non_finite_and_bad_head() {
        let mut m = build_res1dcnn(&Res1dCnnConfig::reduced(64), 1).unwrap();
        m.head.bias[0] = f64::NAN;
        assert!(matches!(decode(&encode_student(&m)), Err(Error::NonFinite(_))));
        let mut m = build_res1dcnn(&Res1dCnnConfig::reduced(64), 1).unwrap();
        m.head = Dense::zeros(m.head.in_features, 3);
        assert!(matches!(decode(&encode_student(&m)), Err(Error::TopologyMismatch(_))));
    }

    #[test]
    fn rejects_broken_chain() {
        let mut m = build_res1dcnn(&Res1dCnnConfig::reduced(64), 1).unwrap();
        m.extractor.blocks[1].conv2 = Conv1d::zeros(5, 5, 3, 1);
        assert!(matches!(decode(&encode_student(&m)), Err(Error::TopologyMismatch(_))));
    }
}
