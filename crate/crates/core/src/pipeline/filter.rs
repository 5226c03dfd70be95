//! Regularized inverse of the sensor dynamics.
//!
//! The discrete sensor model has zeros at `z = 1` and `z = -1`, so its exact
//! inverse has poles there. A first-order bilinear low-pass contributes a
//! zero at `z = -1` that cancels the Nyquist pole; the pole at `z = 1`
//! (an integrator restoring the DC level lost by the sensor) remains, which is
//! why windows are mean-removed after filtering. The low-pass is run a second
//! time backwards over the series so the estimate carries no phase lag.

use alloc::vec::Vec;

use super::PipelineConfig;
use crate::error::{invalid, Error, Result};
use crate::math::tan;
use crate::nn::Tensor;
use crate::radiometry::{Biquad, DynamicsConstants, Recording};
use core::f64::consts::PI;

/// The inverse sensor section cascaded with the regularizing low-pass, folded
/// into one biquad, followed by a time-reversed pass of the same low-pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseFilter {
    pub section: Biquad,
    pub smoother: Biquad,
}

fn low_pass_section(cutoff: f64, sample_rate: f64) -> Biquad {
    let (gain, pole) = low_pass_coefficients(cutoff, sample_rate);
    Biquad { b: [gain, gain, 0.0], a: [1.0, pole, 0.0] }
}

fn backwards(section: &Biquad, series: &[f64]) -> Vec<f64> {
    let rev: Vec<f64> = series.iter().rev().copied().collect();
    let mut y = section.filter(&rev);
    y.reverse();
    y
}

/// First-order bilinear low-pass coefficients `(gain, pole)`:
/// `H(z) = gain (1 + z^-1) / (1 + pole z^-1)`.
fn low_pass_coefficients(cutoff: f64, sample_rate: f64) -> (f64, f64) {
    let k = 2.0 * sample_rate;
    let omega = k * tan(PI * cutoff / sample_rate);
    (omega / (omega + k), (omega - k) / (omega + k))
}

impl InverseFilter {
    pub fn new(constants: &DynamicsConstants, cutoff: f64) -> Result<Self> {
        constants.validate()?;
        if !(cutoff > 0.0 && cutoff < constants.sample_rate / 2.0) {
            return Err(invalid("regularizer cutoff must lie below the Nyquist frequency"));
        }
        let fwd = constants.biquad();
        let g = fwd.b[0];
        let (alpha, beta) = low_pass_coefficients(cutoff, constants.sample_rate);
        let s = alpha / g;
        Ok(Self {
            section: Biquad {
                b: [s * fwd.a[0], s * fwd.a[1], s * fwd.a[2]],
                a: [1.0, beta - 1.0, -beta],
            },
            smoother: low_pass_section(cutoff, constants.sample_rate),
        })
    }

    pub fn apply(&self, series: &[f64]) -> Vec<f64> {
        backwards(&self.smoother, &self.section.filter(series))
    }

    /// Gain at `w` radians per sample.
    pub fn magnitude(&self, w: f64) -> f64 {
        self.section.magnitude(w) * self.smoother.magnitude(w)
    }
}

/// Zero-phase (forward then backward) first-order bilinear low-pass; the
/// reference the inverse filter recovers.
pub fn low_pass(series: &[f64], cutoff: f64, sample_rate: f64) -> Vec<f64> {
    let lp = low_pass_section(cutoff, sample_rate);
    backwards(&lp, &lp.filter(series))
}

/// Applies the regularized inverse filter to every sensor row.
pub fn inverse_filter(voltages: &Tensor, constants: &DynamicsConstants, cfg: &PipelineConfig) -> Result<Tensor> {
    if !voltages.all_finite() {
        return Err(Error::NonFinite("voltage block"));
    }
    let f = InverseFilter::new(constants, cfg.regularizer_cutoff)?;
    let mut out = Tensor::zeros(voltages.shape());
    for r in 0..voltages.rows() {
        let y = f.apply(voltages.row(r));
        out.row_mut(r).copy_from_slice(&y);
    }
    Ok(out)
}

/// Fills `dhf_estimate` from the full-length voltage series of a recording.
pub fn estimate_dhf(rec: &Recording, constants: &DynamicsConstants, cfg: &PipelineConfig) -> Result<Recording> {
    let mut out = rec.clone();
    out.dhf_estimate = Some(inverse_filter(&rec.voltages, constants, cfg)?);
    Ok(out)
}
