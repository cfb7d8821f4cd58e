//! Per-window preprocessing: 10th-order Butterworth low-pass at 50 Hz,
//! linear detrend, then standardization.

pub mod butterworth;
mod stages;

pub use butterworth::{design_butterworth, Biquad, FilterCoefficients};
pub use stages::{
    detrend, lowpass, preprocess_pipeline, segment, segment_starts, standardize, standardize_values,
    PreprocessedSegment, Preprocessor, StageDump, CUTOFF_HZ, DEGENERATE_STD, FILTER_ORDER,
};
