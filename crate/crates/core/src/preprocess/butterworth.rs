//! Butterworth low-pass design as a cascade of second-order sections.
//!
//! Analog prototype poles sit on a circle of radius `wc` at angles
//! `pi * (2k + N + 1) / (2N)`; conjugate pairs become biquads through the
//! bilinear transform with the cutoff prewarped, so the digital response is
//! exactly -3 dB at `fc`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// `(re, im)` of the section response at normalized angle `w` (rad/sample).
    fn response(&self, w: f64) -> (f64, f64) {
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let nr = self.b0 + self.b1 * c1 + self.b2 * c2;
        let ni = self.b1 * s1 + self.b2 * s2;
        let dr = 1.0 + self.a1 * c1 + self.a2 * c2;
        let di = self.a1 * s1 + self.a2 * s2;
        let den = dr * dr + di * di;
        ((nr * dr + ni * di) / den, (ni * dr - nr * di) / den)
    }

    /// Roots of `z^2 + a1 z + a2` have modulus < 1.
    pub fn is_stable(&self) -> bool {
        // Jury conditions for a monic quadratic.
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCoefficients {
    pub sections: Vec<Biquad>,
    pub sample_rate: f64,
}

impl FilterCoefficients {
    /// Complex response of the cascade at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> (f64, f64) {
        let w = 2.0 * PI * freq_hz / self.sample_rate;
        self.sections.iter().fold((1.0, 0.0), |(ar, ai), s| {
            let (br, bi) = s.response(w);
            (ar * br - ai * bi, ar * bi + ai * br)
        })
    }

    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        let (re, im) = self.response(freq_hz);
        re.hypot(im)
    }

    pub fn dc_gain(&self) -> f64 {
        self.sections
            .iter()
            .map(|s| (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2))
            .product()
    }

    /// Causal single pass through the cascade (transposed direct form II,
    /// zero initial state). Works for any length.
    pub fn filter(&self, input: &[f64]) -> Vec<f64> {
        let mut out = input.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in out.iter_mut() {
                let x = *v;
                let y = s.b0 * x + z1;
                z1 = s.b1 * x - s.a1 * y + z2;
                z2 = s.b2 * x - s.a2 * y;
                *v = y;
            }
        }
        out
    }
}

/// Designs an order-`order` Butterworth low-pass at `fc` Hz for sampling rate `fs`.
pub fn design_butterworth(order: usize, fc: f64, fs: f64) -> Result<FilterCoefficients> {
    if order == 0 {
        return Err(Error::InvalidConfig("filter order must be positive".into()));
    }
    if !(fs.is_finite() && fs > 0.0 && fc.is_finite() && fc > 0.0 && fc < fs / 2.0) {
        return Err(Error::InvalidConfig(format!(
            "cutoff {fc} Hz must lie strictly between 0 and Nyquist ({} Hz)",
            fs / 2.0
        )));
    }
    let k = 2.0 * fs;
    let wc = k * (PI * fc / fs).tan();
    let n = order as f64;
    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for i in 0..order / 2 {
        let theta = PI * (2.0 * i as f64 + n + 1.0) / (2.0 * n);
        // H(s) = wc^2 / (s^2 + b s + wc^2), b = -2 Re(p)
        let b = -2.0 * wc * theta.cos();
        let c = wc * wc;
        let a0 = k * k + b * k + c;
        sections.push(Biquad {
            b0: c / a0,
            b1: 2.0 * c / a0,
            b2: c / a0,
            a1: (2.0 * c - 2.0 * k * k) / a0,
            a2: (k * k - b * k + c) / a0,
        });
    }
    if order % 2 == 1 {
        // Real pole at -wc: H(s) = wc / (s + wc)
        let a0 = k + wc;
        sections.push(Biquad {
            b0: wc / a0,
            b1: wc / a0,
            b2: 0.0,
            a1: (wc - k) / a0,
            a2: 0.0,
        });
    }
    Ok(FilterCoefficients {
        sections,
        sample_rate: fs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_filter() -> FilterCoefficients {
        design_butterworth(10, 50.0, 256.0).unwrap()
    }

    #[test]
    fn five_stable_sections_with_unit_dc_gain() {
        let f = default_filter();
        assert_eq!(f.sections.len(), 5);
        assert!(f.sections.iter().all(Biquad::is_stable));
        assert!((f.dc_gain() - 1.0).abs() < 1e-9);
        assert!((f.magnitude(0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_power_at_cutoff() {
        assert!((default_filter().magnitude(50.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn stopband_one_octave_up() {
        // Analog prototype at 2 wc: 1/sqrt(1 + 2^20) ~ -60.2 dB; prewarping only
        // steepens the digital response above fc.
        let analog_db = -10.0 * (1.0 + 2f64.powi(20)).log10();
        assert!(analog_db < -60.0);
        let db = 20.0 * default_filter().magnitude(100.0).log10();
        assert!(db <= analog_db, "{db} dB");
    }

    #[test]
    fn magnitude_is_monotone() {
        let f = default_filter();
        let mut prev = f.magnitude(0.0);
        for i in 1..=1280 {
            let m = f.magnitude(i as f64 * 0.1);
            assert!(m <= prev + 1e-12, "rise at {} Hz", i as f64 * 0.1);
            prev = m;
        }
    }

    #[test]
    fn rejects_cutoff_at_nyquist() {
        assert!(design_butterworth(10, 128.0, 256.0).is_err());
        assert!(design_butterworth(10, 0.0, 256.0).is_err());
    }

    #[test]
    fn odd_order_is_still_butterworth() {
        let f = design_butterworth(5, 30.0, 256.0).unwrap();
        assert_eq!(f.sections.len(), 3);
        assert!((f.magnitude(30.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((f.dc_gain() - 1.0).abs() < 1e-12);
    }
}
