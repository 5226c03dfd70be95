//! Minimal learning substrate: tensors, the layers PIRNet uses with
//! hand-written backward passes, Adam, and an early-stopping training loop.

pub mod layers;
mod params;
mod tensor;

pub use params::{ModelParams, ParamId, TrainConfig};
pub use tensor::{gemm, Tensor};

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{invalid, Result};
use crate::rng;

/// Early-stopping bookkeeping: stop after `patience` consecutive epochs whose
/// validation loss rose relative to the previous epoch; remember the best epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    epoch: usize,
    best_epoch: usize,
    best: f64,
    last: f64,
    rising: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    /// This epoch has the lowest validation loss so far.
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, epoch: 0, best_epoch: 0, best: f64::INFINITY, last: f64::INFINITY, rising: 0 }
    }

    pub fn observe(&mut self, val_loss: f64) -> StopDecision {
        self.epoch += 1;
        if val_loss > self.last {
            self.rising += 1;
        } else {
            self.rising = 0;
        }
        self.last = val_loss;
        let improved = val_loss < self.best;
        if improved {
            self.best = val_loss;
            self.best_epoch = self.epoch;
        }
        StopDecision { improved, stop: self.rising >= self.patience }
    }

    /// 1-based epoch with the lowest validation loss (0 before any observation).
    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

/// A network that can report a mean batch loss and accumulate its gradient.
pub trait Trainable {
    type Sample;

    fn params(&self) -> &ModelParams;

    fn params_mut(&mut self) -> &mut ModelParams;

    /// Mean loss over `batch`; when `train` is set the gradient of that mean is
    /// added to the parameter gradient buffers.
    fn batch_loss(&mut self, batch: &[&Self::Sample], train: bool) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Sample-weighted mean loss over a data set, without gradients.
pub fn mean_loss<M: Trainable>(model: &mut M, data: &[M::Sample], batch_size: usize) -> Result<f64> {
    let mut total = 0.0;
    let refs: Vec<&M::Sample> = data.iter().collect();
    for chunk in refs.chunks(batch_size.max(1)) {
        total += model.batch_loss(chunk, false)? * chunk.len() as f64;
    }
    Ok(total / data.len().max(1) as f64)
}

/// Adam training with per-epoch shuffles drawn from `cfg.seed`; returns with
/// the lowest-validation-loss parameters loaded.
pub fn train_loop<M: Trainable>(model: &mut M, train: &[M::Sample], val: &[M::Sample], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(invalid("training and validation sets must be non-empty"));
    }
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut report = TrainReport::default();
    let mut best = model.params().snapshot();
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng::stream(cfg.seed, &[0x7368_7566, epoch as u64]));
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&M::Sample> = chunk.iter().map(|&i| &train[i]).collect();
            model.params_mut().zero_grad();
            total += model.batch_loss(&batch, true)? * batch.len() as f64;
            model.params_mut().adam_step(cfg)?;
        }
        report.train_loss.push(total / train.len() as f64);
        let v = mean_loss(model, val, cfg.batch_size)?;
        report.val_loss.push(v);
        let d = stopper.observe(v);
        if d.improved {
            best = model.params().snapshot();
        }
        if d.stop {
            report.stopped_early = true;
            break;
        }
    }
    report.best_epoch = stopper.best_epoch();
    model.params_mut().load(&best)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(losses: &[f64], patience: usize) -> (usize, usize) {
        let mut s = EarlyStopping::new(patience);
        for (i, &l) in losses.iter().enumerate() {
            if s.observe(l).stop {
                return (i + 1, s.best_epoch());
            }
        }
        (losses.len(), s.best_epoch())
    }

    #[test]
    fn patience_traces() {
        assert_eq!(trace(&[3.0, 2.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 5), (8, 3));
        assert_eq!(trace(&[1.0, 2.0, 3.0, 4.0], 1), (2, 1));
        assert_eq!(trace(&[3.0, 2.0, 2.5, 2.4, 2.6, 2.7], 2), (6, 2));
    }

    /// Linear regression y = 2x - 1 fitted by one scalar weight and bias.
    struct Line {
        p: ModelParams,
    }

    impl Trainable for Line {
        type Sample = (f64, f64);
        fn params(&self) -> &ModelParams {
            &self.p
        }
        fn params_mut(&mut self) -> &mut ModelParams {
            &mut self.p
        }
        fn batch_loss(&mut self, batch: &[&(f64, f64)], train: bool) -> Result<f64> {
            let (w, b) = (self.p.values()[0].data()[0], self.p.values()[1].data()[0]);
            let n = batch.len() as f64;
            let mut loss = 0.0;
            let (mut gw, mut gb) = (0.0, 0.0);
            for (x, y) in batch {
                let e = w * x + b - y;
                loss += 0.5 * e * e / n;
                gw += e * x / n;
                gb += e / n;
            }
            if train {
                self.p.grads_mut()[0].data_mut()[0] += gw;
                self.p.grads_mut()[1].data_mut()[0] += gb;
            }
            Ok(loss)
        }
    }

    fn line() -> Line {
        let mut p = ModelParams::new();
        p.add("w", Tensor::zeros(&[1]));
        p.add("b", Tensor::zeros(&[1]));
        Line { p }
    }

    #[test]
    fn training_is_deterministic_and_learns() {
        let data: Vec<(f64, f64)> = (0..40).map(|i| (i as f64 / 20.0 - 1.0, 2.0 * (i as f64 / 20.0 - 1.0) - 1.0)).collect();
        let cfg = TrainConfig { learning_rate: 0.05, batch_size: 8, max_epochs: 60, seed: 3, ..Default::default() };
        let mut a = line();
        let ra = train_loop(&mut a, &data, &data[..10], &cfg).unwrap();
        let mut b = line();
        let rb = train_loop(&mut b, &data, &data[..10], &cfg).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a.p, b.p);
        assert!(ra.val_loss[ra.best_epoch - 1] < 0.05 * ra.val_loss[0]);
        assert!(train_loop(&mut a, &[], &data, &cfg).is_err());
    }
}
