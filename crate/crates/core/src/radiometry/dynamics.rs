//! Second-order PIR sensor dynamics `V(s) = A s / (B s^2 + C s + 1)`,
//! discretized with the bilinear transform.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DynamicsConstants {
    /// Gain `A`.
    pub a: f64,
    /// `B`, s^2.
    pub b: f64,
    /// `C`, s.
    pub c: f64,
    pub sample_rate: f64,
}

impl Default for DynamicsConstants {
    fn default() -> Self {
        Self { a: 1.0, b: 0.01, c: 0.15, sample_rate: 60.0 }
    }
}

impl DynamicsConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0 && self.c > 0.0) {
            return Err(invalid("dynamics constants A, B, C must be positive"));
        }
        if !(self.sample_rate > 0.0) {
            return Err(invalid("sample rate must be positive"));
        }
        Ok(())
    }

    /// Discrete biquad coefficients `(b, a)` with `a[0] = 1`.
    pub fn biquad(&self) -> Biquad {
        let k = 2.0 * self.sample_rate;
        let bk2 = self.b * k * k;
        let ck = self.c * k;
        let a0 = bk2 + ck + 1.0;
        let g = self.a * k / a0;
        Biquad {
            b: [g, 0.0, -g],
            a: [1.0, (2.0 - 2.0 * bk2) / a0, (bk2 - ck + 1.0) / a0],
        }
    }
}

/// Normalized second-order section `H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    /// Runs the section from zero initial state (transposed direct form II).
    pub fn filter(&self, input: &[f64]) -> Vec<f64> {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        input
            .iter()
            .map(|&x| {
                let y = b0 * x + s1;
                s1 = b1 * x - a1 * y + s2;
                s2 = b2 * x - a2 * y;
                y
            })
            .collect()
    }

    /// Evaluates `|H(e^{jw})|` at a digital angular frequency `w` (rad/sample).
    pub fn magnitude(&self, w: f64) -> f64 {
        use crate::math::{cos, sin, sqrt};
        let eval = |c: &[f64; 3]| {
            let re = c[0] + c[1] * cos(w) + c[2] * cos(2.0 * w);
            let im = -(c[1] * sin(w) + c[2] * sin(2.0 * w));
            sqrt(re * re + im * im)
        };
        eval(&self.b) / eval(&self.a)
    }
}

/// Sensor voltage produced by a uniformly sampled DHF series.
pub fn sensor_dynamics(dhf: &[f64], constants: &DynamicsConstants) -> Result<Vec<f64>> {
    constants.validate()?;
    if dhf.is_empty() {
        return Err(Error::Empty("dhf series"));
    }
    if dhf.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("dhf series"));
    }
    Ok(constants.biquad().filter(dhf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{sin, sqrt};
    use alloc::vec;

    #[test]
    fn dc_gain_is_exactly_zero() {
        let q = DynamicsConstants::default().biquad();
        assert_eq!(q.b[0] + q.b[1] + q.b[2], 0.0);
    }

    #[test]
    fn constant_input_decays() {
        let k = DynamicsConstants::default();
        let n = (6.0 * k.sample_rate) as usize;
        let y = sensor_dynamics(&vec![1.0; n], &k).unwrap();
        let settle = (4.0 * k.sample_rate) as usize;
        assert!(y[settle..].iter().all(|v| v.abs() < 1e-6), "max tail {:e}", y[settle..].iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }

    #[test]
    fn resonance_gain_is_a_over_c() {
        let k = DynamicsConstants::default();
        let w = 1.0 / sqrt(k.b);
        let n = 60 * 40;
        let x: Vec<f64> = (0..n).map(|i| sin(w * i as f64 / k.sample_rate)).collect();
        let y = sensor_dynamics(&x, &k).unwrap();
        let tail = &y[n / 2..];
        let amp = tail.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let want = k.a / k.c;
        assert!((amp - want).abs() / want < 0.02, "amp {amp} want {want}");
    }

    /// Impulse response by power-series division of the transfer function,
    /// then direct convolution.
    #[test]
    fn matches_impulse_response_convolution() {
        let k = DynamicsConstants { a: 1.3, b: 0.02, c: 0.11, sample_rate: 60.0 };
        let q = k.biquad();
        let n = 150;
        let mut h = vec![0.0; n];
        for i in 0..n {
            let mut v = if i < 3 { q.b[i] } else { 0.0 };
            if i >= 1 {
                v -= q.a[1] * h[i - 1];
            }
            if i >= 2 {
                v -= q.a[2] * h[i - 2];
            }
            h[i] = v;
        }
        let x: Vec<f64> = (0..n).map(|i| sin(0.37 * i as f64) + 0.2 * sin(0.05 * (i * i) as f64)).collect();
        let y = sensor_dynamics(&x, &k).unwrap();
        for t in 0..n {
            let conv: f64 = (0..=t).map(|j| h[j] * x[t - j]).sum();
            assert!((conv - y[t]).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn rejects_non_finite() {
        let k = DynamicsConstants::default();
        assert_eq!(sensor_dynamics(&[1.0, f64::NAN], &k), Err(Error::NonFinite("dhf series")));
        assert!(sensor_dynamics(&[], &k).is_err());
    }
}
