use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signed 16-bit fixed point with `frac_bits` fractional bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QFormat {
    pub frac_bits: u32,
}

/// Two integer bits (sign included), thirteen fractional bits.
pub const Q2_13: QFormat = QFormat { frac_bits: 13 };

impl Default for QFormat {
    fn default() -> Self {
        Q2_13
    }
}

impl QFormat {
    pub fn new(frac_bits: u32) -> Result<Self> {
        if !(1..=15).contains(&frac_bits) {
            return Err(Error::InvalidConfig(format!("{frac_bits} fractional bits do not fit in 16 bits")));
        }
        Ok(Self { frac_bits })
    }

    pub fn scale(self) -> f64 {
        f64::from(1u32 << self.frac_bits)
    }

    /// Smallest representable step.
    pub fn resolution(self) -> f64 {
        1.0 / self.scale()
    }

    pub fn min_value(self) -> f64 {
        f64::from(i16::MIN) / self.scale()
    }

    pub fn max_value(self) -> f64 {
        f64::from(i16::MAX) / self.scale()
    }

    /// Rounds half away from zero and clamps; the flag reports clamping.
    pub fn quantize_saturating(self, x: f64) -> Result<(i16, bool)> {
        if !x.is_finite() {
            return Err(Error::NonFinite("value to quantize"));
        }
        let r = (x * self.scale()).round();
        if r > f64::from(i16::MAX) {
            Ok((i16::MAX, true))
        } else if r < f64::from(i16::MIN) {
            Ok((i16::MIN, true))
        } else {
            Ok((r as i16, false))
        }
    }

    pub fn quantize(self, x: f64) -> Result<i16> {
        Ok(self.quantize_saturating(x)?.0)
    }

    pub fn dequantize(self, raw: i16) -> f64 {
        f64::from(raw) / self.scale()
    }
}

/// One Q2.13 number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FixedPointValue(pub i16);

impl FixedPointValue {
    pub fn from_f64(x: f64) -> Result<Self> {
        Q2_13.quantize(x).map(Self)
    }

    pub fn to_f64(self) -> f64 {
        Q2_13.dequantize(self.0)
    }

    pub fn raw(self) -> i16 {
        self.0
    }
}

pub fn quantize(x: f64) -> Result<FixedPointValue> {
    FixedPointValue::from_f64(x)
}

pub fn dequantize(q: FixedPointValue) -> f64 {
    q.to_f64()
}

/// Clamps to the i16 range; the flag reports clamping.
pub fn saturate_i16(v: i64) -> (i16, bool) {
    if v > i64::from(i16::MAX) {
        (i16::MAX, true)
    } else if v < i64::from(i16::MIN) {
        (i16::MIN, true)
    } else {
        (v as i16, false)
    }
}

pub fn saturating_add(a: i16, b: i16) -> (i16, bool) {
    saturate_i16(i64::from(a) + i64::from(b))
}

/// Divides by `2^shift`, rounding half away from zero.
pub fn shift_round(v: i64, shift: u32) -> i64 {
    if shift == 0 {
        return v;
    }
    let half = 1i64 << (shift - 1);
    if v >= 0 {
        (v + half) >> shift
    } else {
        -((-v + half) >> shift)
    }
}

/// Integer division rounding half away from zero; `d > 0`.
pub fn div_round(n: i64, d: i64) -> i64 {
    if n >= 0 {
        (n + d / 2) / d
    } else {
        -((-n + d / 2) / d)
    }
}
