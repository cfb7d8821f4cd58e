use crate::error::{Error, Result};

/// Dense row-major array of `f64`, shaped `(channels, length)` or `(features,)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape("tensor", format!("{expected} values for {shape:?}"), data.len()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    /// A single-channel `(1, len)` tensor.
    pub fn from_signal(samples: &[f64]) -> Self {
        Self {
            shape: vec![1, samples.len()],
            data: samples.to_vec(),
        }
    }

    pub fn vector(values: Vec<f64>) -> Self {
        Self {
            shape: vec![values.len()],
            data: values,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn channels(&self) -> usize {
        self.shape[0]
    }

    /// Temporal length of a `(channels, length)` tensor.
    pub fn length(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn row(&self, c: usize) -> &[f64] {
        let l = self.length();
        &self.data[c * l..(c + 1) * l]
    }

    pub fn row_mut(&mut self, c: usize) -> &mut [f64] {
        let l = self.length();
        &mut self.data[c * l..(c + 1) * l]
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape("tensor add", format!("{:?}", self.shape), format!("{:?}", other.shape)));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
