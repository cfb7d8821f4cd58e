//! Seizure detection from ECG, distilled from a multi-modal ECG+EEG teacher.
//!
//! The crate covers the whole path from raw biosignals to an edge deployment
//! estimate: synthetic data and record formats ([`biosignal`]), per-window
//! preprocessing ([`preprocess`]), a small differentiable engine ([`nn`]),
//! the residual 1-D CNN family ([`res1dcnn`]), teacher training and feature
//! distillation ([`distill`]), Q2.13 fixed-point inference ([`quant`]),
//! detection metrics ([`metrics`]) and latency/energy modeling ([`bench`]).

pub mod bench;
pub mod biosignal;
mod codec;
pub mod dataset_io;
pub mod distill;
pub mod error;
pub mod experiment;
pub mod preprocess;
pub mod quant;
pub mod metrics;
pub mod model_io;
pub mod nn;
pub mod reproduce;
pub mod res1dcnn;
pub mod rng;

pub use error::{Error, ErrorClass, Result};
