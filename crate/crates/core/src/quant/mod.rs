//! 16-bit fixed-point parameters and a saturating integer inference path.

mod fixed;
mod model;

pub use fixed::{
    dequantize, div_round, quantize, saturate_i16, saturating_add, shift_round, FixedPointValue, QFormat, Q2_13,
};
pub use model::{
    accuracy_drop, evaluate_quantized, float_payload_bytes, frac_bit_sweep, quantize_model, quantize_model_with,
    quantized_forward, Diagnostics, QConv1d, QDense, QResBlock, QShortcut, QTensor, QuantizationReport, QuantizedModel,
    SweepPoint,
};
