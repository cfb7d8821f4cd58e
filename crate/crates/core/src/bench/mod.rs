//! Latency measurement, multiply-accumulate counting and the duty-cycled
//! battery model.

mod energy;
mod flops;
mod timing;

pub use energy::{battery_life, compare_energy, EnergyReport, PlatformProfile, SEGMENT_PERIOD_S};
pub use flops::{dense_macs, extractor_macs, flop_count, FlopCount, MacCount};
pub use timing::{latency_ratio, time_inference, InferenceModel, TimingReport};
