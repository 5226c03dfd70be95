//! Window preprocessing (inverse filter, normalization, segmentation) and
//! physics-motivated data augmentation.

mod augment;
mod filter;

pub use augment::{
    augment_recordings, detect_extrema, reshape_extrema, reshape_recording, select_reshapes, time_warp,
    warp_series, Extremum, ExtremumKind, Reshape,
};
pub use filter::{estimate_dhf, inverse_filter, low_pass, InverseFilter};

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::geometry::Point2;
use crate::math::{mean, std_dev};
use crate::nn::Tensor;
use crate::radiometry::DynamicsConstants;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// One multi-sensor block of samples with its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalWindow {
    /// Sensor voltages, sensors x samples.
    pub voltages: Tensor,
    /// DHF estimate (already inverse filtered), when the window comes from augmentation.
    pub dhf: Option<Tensor>,
    pub count: usize,
    /// Per person, per segment ground-truth position.
    pub positions: Vec<Vec<Point2>>,
    /// Noise-free per-person DHF, one sensors x samples block per person (may be empty).
    pub person_dhf: Vec<Tensor>,
    pub scene_id: u64,
    /// Seconds from the start of the recording.
    pub start_time: f64,
}

/// The label-free part of a window that inference is allowed to see.
#[derive(Debug, Clone, Copy)]
pub struct SignalInput<'a> {
    pub voltages: &'a Tensor,
    pub dhf: Option<&'a Tensor>,
}

impl SignalWindow {
    pub fn input(&self) -> SignalInput<'_> {
        SignalInput { voltages: &self.voltages, dhf: self.dhf.as_ref() }
    }

    pub fn validate(&self, segments: usize) -> Result<()> {
        if self.positions.len() != self.count {
            return Err(invalid("positions must be present for exactly `count` persons"));
        }
        if self.positions.iter().any(|p| p.len() != segments) {
            return Err(invalid("every person needs one position per segment"));
        }
        if let Some(d) = &self.dhf {
            if d.shape() != self.voltages.shape() {
                return Err(Error::ShapeMismatch("dhf and voltage blocks differ".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PipelineConfig {
    /// Corner frequency of the low-pass that regularizes the inverse filter, Hz.
    pub regularizer_cutoff: f64,
    pub segments: usize,
    pub warp_factors: Vec<f64>,
    /// Fraction of interior extrema reshaped per augmented series.
    pub reshape_fraction: f64,
    pub reshape_w_range: (f64, f64),
    /// Extrema with a swing below this fraction of the series range are ignored.
    pub extremum_floor: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            regularizer_cutoff: 10.0,
            segments: 5,
            warp_factors: alloc::vec![0.8, 1.2],
            reshape_fraction: 0.10,
            reshape_w_range: (0.5, 1.5),
            extremum_floor: 0.05,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.regularizer_cutoff > 0.0) {
            return Err(invalid("regularizer cutoff must be positive"));
        }
        if self.segments == 0 {
            return Err(invalid("segment count must be positive"));
        }
        if self.warp_factors.iter().any(|a| !(*a > 0.0)) {
            return Err(invalid("warp factors must be positive"));
        }
        if !(0.0..=1.0).contains(&self.reshape_fraction) {
            return Err(invalid("reshape fraction must lie in [0, 1]"));
        }
        let (lo, hi) = self.reshape_w_range;
        if !(lo > 0.0 && lo <= hi) {
            return Err(invalid("reshape weight range must be positive and ordered"));
        }
        Ok(())
    }
}

/// How a window is turned into network input.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum InputMode {
    /// Inverse filter, per-row mean removal, then normalization by the summed row deviations.
    Preprocessed,
    /// Raw voltages multiplied by a fixed scale (no preprocessing).
    Raw { scale: f64 },
}

/// Subtracts each row's mean.
pub fn remove_mean(x: &mut Tensor) {
    for r in 0..x.rows() {
        let row = x.row_mut(r);
        let m = mean(row);
        row.iter_mut().for_each(|v| *v -= m);
    }
}

/// Divides the block by the sum of its per-row standard deviations.
pub fn normalize(dhf: &Tensor) -> Result<Tensor> {
    if !dhf.all_finite() {
        return Err(Error::NonFinite("dhf block"));
    }
    let total: f64 = (0..dhf.rows()).map(|r| std_dev(dhf.row(r))).sum();
    if !(total > 0.0) {
        return Err(Error::SilentWindow);
    }
    let mut out = dhf.clone();
    out.scale(1.0 / total);
    Ok(out)
}

/// Splits the sample axis into `k` equal consecutive blocks.
pub fn segment(x: &Tensor, k: usize) -> Result<Vec<Tensor>> {
    let d = x.cols();
    if k == 0 || d % k != 0 {
        return Err(invalid("segment count must divide the window length"));
    }
    let t = d / k;
    Ok((0..k).map(|i| x.columns(i * t, (i + 1) * t)).collect())
}

/// Network input for one window.
pub fn preprocess(
    input: SignalInput<'_>,
    constants: &DynamicsConstants,
    cfg: &PipelineConfig,
    mode: InputMode,
) -> Result<Tensor> {
    match mode {
        InputMode::Raw { scale } => {
            if !input.voltages.all_finite() {
                return Err(Error::NonFinite("voltage block"));
            }
            let mut x = input.voltages.clone();
            x.scale(scale);
            Ok(x)
        }
        InputMode::Preprocessed => {
            let mut s = match input.dhf {
                Some(d) => d.clone(),
                None => inverse_filter(input.voltages, constants, cfg)?,
            };
            remove_mean(&mut s);
            normalize(&s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn block() -> Tensor {
        Tensor::from_vec(&[3, 6], vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 0.1, -0.4, 0.9, 0.3, -0.2, 0.6])
            .unwrap()
    }

    fn sum_std(x: &Tensor) -> f64 {
        (0..x.rows()).map(|r| std_dev(x.row(r))).sum()
    }

    #[test]
    fn normalized_block_has_unit_summed_deviation() {
        let y = normalize(&block()).unwrap();
        assert!((sum_std(&y) - 1.0).abs() < 1e-12);
        let z = normalize(&y).unwrap();
        for (a, b) in y.data().iter().zip(z.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn normalization_is_scale_invariant() {
        let x = block();
        let mut y = x.clone();
        y.scale(37.5);
        let (a, b) = (normalize(&x).unwrap(), normalize(&y).unwrap());
        for (p, q) in a.data().iter().zip(b.data()) {
            assert!((p - q).abs() < 1e-15);
        }
    }

    #[test]
    fn single_active_row() {
        let mut x = Tensor::zeros(&[4, 4]);
        x.row_mut(2).copy_from_slice(&[2.0, -2.0, 2.0, -2.0]);
        let y = normalize(&x).unwrap();
        assert_eq!(std_dev(y.row(2)), 1.0);
        assert_eq!(normalize(&Tensor::zeros(&[4, 4])), Err(Error::SilentWindow));
    }

    #[test]
    fn segments_concatenate_back() {
        let x = Tensor::from_vec(&[4, 150], (0..600).map(|i| (i as f64).sin()).collect()).unwrap();
        let parts = segment(&x, 5).unwrap();
        assert_eq!(parts.len(), 5);
        assert!(parts.iter().all(|p| p.shape() == [4, 30]));
        assert_eq!(Tensor::hstack(&parts).unwrap(), x);
        assert_eq!(segment(&x, 1).unwrap()[0], x);
        assert!(segment(&x, 7).is_err());
    }
}
