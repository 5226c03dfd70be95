//! PIRNet: the person-counting network, the per-`M` localization networks,
//! their permutation-invariant losses, and the inference policy chaining them.

mod net;

pub use net::{Forward, Head, NetShape, Preset, TwoStageNet};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::geometry::Point2;
use crate::math::for_each_permutation;
use crate::nn::{ModelParams, Tensor, Trainable};
use crate::pipeline::{preprocess, InputMode, PipelineConfig, SignalInput};
use crate::radiometry::DynamicsConstants;

/// Minimum over all placements of `count` ones among the components of
/// `sum_p |c_hat_p - c_p|`; returns the loss and the winning labeling (the
/// first one in enumeration order on ties).
pub fn counting_loss(c_hat: &[f64], count: usize) -> Result<(f64, Vec<f64>)> {
    let p = c_hat.len();
    if count > p {
        return Err(invalid("count exceeds the number of components"));
    }
    let mut best = (f64::INFINITY, vec![0.0; p]);
    for mask in 0u32..(1 << p) {
        if mask.count_ones() as usize != count {
            continue;
        }
        let labels: Vec<f64> = (0..p).map(|i| f64::from((mask >> i) & 1)).collect();
        let loss: f64 = c_hat.iter().zip(&labels).map(|(a, b)| (a - b).abs()).sum();
        if loss < best.0 {
            best = (loss, labels);
        }
    }
    Ok(best)
}

/// Subgradient of the counting loss for a fixed labeling (zero at the kink).
pub fn counting_loss_grad(c_hat: &[f64], labels: &[f64]) -> Vec<f64> {
    c_hat
        .iter()
        .zip(labels)
        .map(|(a, b)| if a > b { 1.0 } else if a < b { -1.0 } else { 0.0 })
        .collect()
}

/// Number of components whose probability exceeds one half.
pub fn predict_count(c_hat: &[f64]) -> usize {
    c_hat.iter().filter(|&&c| c > 0.5).count()
}

/// Cost matrix `cost[m][j] = sum_k |pred[m][k] - labels[j][k]|`.
fn cost_matrix(pred: &[Vec<Point2>], labels: &[Vec<Point2>]) -> Vec<Vec<f64>> {
    pred.iter()
        .map(|pm| labels.iter().map(|lj| pm.iter().zip(lj).map(|(a, b)| a.distance(*b)).sum()).collect())
        .collect()
}

/// Minimum over person permutations of the summed per-segment Euclidean
/// distances; returns the loss and `perm[m]`, the label assigned to predicted person `m`.
pub fn localization_loss(pred: &[Vec<Point2>], labels: &[Vec<Point2>]) -> Result<(f64, Vec<usize>)> {
    if pred.len() != labels.len() || pred.iter().zip(labels).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::ShapeMismatch("prediction and label shapes differ".into()));
    }
    let cost = cost_matrix(pred, labels);
    let mut best = (f64::INFINITY, (0..pred.len()).collect::<Vec<_>>());
    for_each_permutation(pred.len(), |perm| {
        let total: f64 = perm.iter().enumerate().map(|(m, &j)| cost[m][j]).sum();
        if total < best.0 {
            best = (total, perm.to_vec());
        }
    });
    Ok(best)
}

/// Gradient of the localization loss for a fixed assignment, flattened as
/// `(m * K + k) * 2 + axis`.
pub fn localization_loss_grad(pred: &[Vec<Point2>], labels: &[Vec<Point2>], perm: &[usize]) -> Vec<f64> {
    let mut g = Vec::new();
    for (m, pm) in pred.iter().enumerate() {
        for (a, b) in pm.iter().zip(&labels[perm[m]]) {
            let d = a.distance(*b);
            if d > 0.0 {
                g.push((a.x - b.x) / d);
                g.push((a.y - b.y) / d);
            } else {
                g.extend_from_slice(&[0.0, 0.0]);
            }
        }
    }
    g
}

/// A preprocessed network input with its count label.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSample {
    pub x: Tensor,
    pub count: usize,
}

/// A preprocessed network input with per-person, per-segment positions.
#[derive(Debug, Clone, PartialEq)]
pub struct LocSample {
    pub x: Tensor,
    pub positions: Vec<Vec<Point2>>,
}

/// Two-stage person-counting network.
#[derive(Debug, Clone)]
pub struct Counter {
    pub net: TwoStageNet,
}

impl Counter {
    pub fn new(shape: NetShape, seed: u64) -> Result<Self> {
        if shape.head != Head::Count {
            return Err(invalid("counting network needs a counting head"));
        }
        Ok(Self { net: TwoStageNet::new(shape, seed)? })
    }

    pub fn probabilities(&self, inputs: &[&Tensor]) -> Result<Vec<Vec<f64>>> {
        let f = self.net.forward(inputs)?;
        Ok(self.net.probabilities(&f))
    }
}

impl Trainable for Counter {
    type Sample = CountSample;

    fn params(&self) -> &ModelParams {
        &self.net.params
    }

    fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.net.params
    }

    fn batch_loss(&mut self, batch: &[&CountSample], train: bool) -> Result<f64> {
        let inputs: Vec<&Tensor> = batch.iter().map(|s| &s.x).collect();
        let f = self.net.forward(&inputs)?;
        let probs = self.net.probabilities(&f);
        let n = batch.len() as f64;
        let mut total = 0.0;
        let mut grad = Vec::with_capacity(probs.len() * self.net.shape.components);
        for (c_hat, s) in probs.iter().zip(batch) {
            let (loss, labels) = counting_loss(c_hat, s.count)?;
            total += loss;
            grad.extend(counting_loss_grad(c_hat, &labels).into_iter().map(|g| g / n));
        }
        if train {
            self.net.backward(&f, &grad)?;
        }
        Ok(total / n)
    }
}

/// Two-stage localization network for a fixed number of persons.
#[derive(Debug, Clone)]
pub struct Localizer {
    pub net: TwoStageNet,
}

impl Localizer {
    pub fn new(shape: NetShape, seed: u64) -> Result<Self> {
        if !matches!(shape.head, Head::Locate { .. }) {
            return Err(invalid("localization network needs a locating head"));
        }
        Ok(Self { net: TwoStageNet::new(shape, seed)? })
    }

    pub fn persons(&self) -> usize {
        self.net.shape.components
    }

    /// Positions `[window][person][segment]`, metres.
    pub fn locate(&self, inputs: &[&Tensor]) -> Result<Vec<Vec<Vec<Point2>>>> {
        let f = self.net.forward(inputs)?;
        Ok(self.net.points(&f))
    }
}

impl Trainable for Localizer {
    type Sample = LocSample;

    fn params(&self) -> &ModelParams {
        &self.net.params
    }

    fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.net.params
    }

    fn batch_loss(&mut self, batch: &[&LocSample], train: bool) -> Result<f64> {
        let inputs: Vec<&Tensor> = batch.iter().map(|s| &s.x).collect();
        let f = self.net.forward(&inputs)?;
        let points = self.net.points(&f);
        let n = batch.len() as f64;
        let mut total = 0.0;
        let mut grad = Vec::new();
        for (pred, s) in points.iter().zip(batch) {
            let (loss, perm) = localization_loss(pred, &s.positions)?;
            total += loss;
            grad.extend(localization_loss_grad(pred, &s.positions, &perm).into_iter().map(|g| g / n));
        }
        if train {
            self.net.backward(&f, &grad)?;
        }
        Ok(total / n)
    }
}

/// Result of running the full two-stage pipeline on one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub count: usize,
    /// `[person][segment]`, empty when no person was detected.
    pub positions: Vec<Vec<Point2>>,
    /// The window carried no signal and could not be normalized.
    pub silent: bool,
}

/// Trained counting network plus one localization network per person count.
#[derive(Debug, Clone)]
pub struct Pirnet {
    pub counter: Counter,
    /// Entry `m - 1` handles `m` persons.
    pub localizers: Vec<Localizer>,
    pub constants: DynamicsConstants,
    pub pipeline: PipelineConfig,
    pub mode: InputMode,
}

impl Pirnet {
    pub fn prepare(&self, input: SignalInput<'_>) -> Result<Tensor> {
        preprocess(input, &self.constants, &self.pipeline, self.mode)
    }

    /// Counts persons, then runs the localization network matching that count.
    pub fn infer(&self, input: SignalInput<'_>) -> Result<Inference> {
        let x = match self.prepare(input) {
            Ok(x) => x,
            Err(Error::SilentWindow) => return Ok(Inference { count: 0, positions: Vec::new(), silent: true }),
            Err(e) => return Err(e),
        };
        self.infer_prepared(&x)
    }

    pub fn infer_prepared(&self, x: &Tensor) -> Result<Inference> {
        let probs = self.counter.probabilities(&[x])?;
        let count = predict_count(&probs[0]);
        if count == 0 {
            return Ok(Inference { count, positions: Vec::new(), silent: false });
        }
        let loc = self
            .localizers
            .get(count - 1)
            .filter(|l| l.persons() == count)
            .ok_or_else(|| invalid("no localization network for the predicted count"))?;
        let positions = loc.locate(&[x])?.pop().unwrap_or_default();
        Ok(Inference { count, positions, silent: false })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_loss_examples() {
        assert_eq!(counting_loss(&[1.0, 1.0, 0.0], 2).unwrap().0, 0.0);
        assert_eq!(counting_loss(&[0.0, 1.0, 1.0], 2).unwrap().0, 0.0);
        let (l, labels) = counting_loss(&[0.5, 1.0, 0.0], 2).unwrap();
        assert_eq!(l, 0.5);
        assert_eq!(labels, vec![1.0, 1.0, 0.0]);
        assert!(counting_loss(&[0.5; 3], 4).is_err());
    }

    #[test]
    fn count_threshold() {
        assert_eq!(predict_count(&[0.9, 0.7, 0.2]), 2);
        assert_eq!(predict_count(&[0.5, 0.5, 0.5]), 0);
        assert_eq!(predict_count(&[0.51, 0.49, 0.52]), 2);
    }

    #[test]
    fn localization_loss_examples() {
        let a: Vec<Point2> = (0..5).map(|k| Point2::new(k as f64, 1.0)).collect();
        let b: Vec<Point2> = (0..5).map(|k| Point2::new(2.0, k as f64)).collect();
        let (l, perm) = localization_loss(&[a.clone(), b.clone()], &[b, a]).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(perm, vec![1, 0]);
        let zero = vec![Point2::new(0.0, 0.0); 5];
        let target = vec![Point2::new(3.0, 4.0); 5];
        assert_eq!(localization_loss(&[zero], &[target]).unwrap().0, 25.0);
    }
}
