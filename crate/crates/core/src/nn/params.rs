use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use super::Tensor;
use crate::error::{invalid, Error, Result};
use crate::math::sqrt;
use crate::rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Index of a parameter inside its [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub usize);

/// Named parameter tensors with gradient and Adam moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    names: Vec<String>,
    values: Vec<Tensor>,
    grads: Vec<Tensor>,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 40,
            patience: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(invalid("Adam betas must lie in (0, 1)"));
        }
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(invalid("patience, batch size and max epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.epsilon > 0.0) {
            return Err(invalid("learning rate and epsilon must be positive"));
        }
        Ok(())
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::new()
    }
}

impl ModelParams {
    pub fn new() -> Self {
        Self { names: Vec::new(), values: Vec::new(), grads: Vec::new(), m: Vec::new(), v: Vec::new(), step: 0 }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let shape = value.shape().to_vec();
        self.names.push(name.into());
        self.values.push(value);
        self.grads.push(Tensor::zeros(&shape));
        self.m.push(Tensor::zeros(&shape));
        self.v.push(Tensor::zeros(&shape));
        ParamId(self.values.len() - 1)
    }

    /// Matrix drawn uniformly from `+-sqrt(6 / (rows + cols))`.
    pub fn add_xavier(&mut self, name: impl Into<String>, rows: usize, cols: usize, r: &mut rng::Rng) -> ParamId {
        let bound = sqrt(6.0 / (rows + cols) as f64);
        let data = (0..rows * cols).map(|_| r.random_range(-bound..bound)).collect();
        self.add(name, Tensor::from_vec(&[rows, cols], data).expect("shape matches"))
    }

    pub fn add_constant(&mut self, name: impl Into<String>, shape: &[usize], value: f64) -> ParamId {
        let mut t = Tensor::zeros(shape);
        t.fill(value);
        self.add(name, t)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn grads(&self) -> &[Tensor] {
        &self.grads
    }

    pub fn grads_mut(&mut self) -> &mut [Tensor] {
        &mut self.grads
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| g.fill(0.0));
    }

    /// Takes the gradient buffers out so a backward pass can read values and write gradients.
    pub fn take_grads(&mut self) -> Vec<Tensor> {
        core::mem::take(&mut self.grads)
    }

    pub fn restore_grads(&mut self, grads: Vec<Tensor>) {
        debug_assert_eq!(grads.len(), self.values.len());
        self.grads = grads;
    }

    /// Fails with the first parameter whose gradient has a non-finite entry.
    pub fn check_grads(&self) -> Result<()> {
        match self.grads.iter().position(|g| !g.all_finite()) {
            Some(i) => Err(Error::NonFiniteGradient(self.names[i].clone())),
            None => Ok(()),
        }
    }

    /// One bias-corrected Adam update from the stored gradients.
    pub fn adam_step(&mut self, cfg: &TrainConfig) -> Result<()> {
        self.check_grads()?;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - libm::pow(cfg.beta1, t as f64);
        let c2 = 1.0 - libm::pow(cfg.beta2, t as f64);
        for i in 0..self.values.len() {
            let g = self.grads[i].data();
            let m = self.m[i].data_mut();
            for (mj, gj) in m.iter_mut().zip(g) {
                *mj = cfg.beta1 * *mj + (1.0 - cfg.beta1) * gj;
            }
            let v = self.v[i].data_mut();
            for (vj, gj) in v.iter_mut().zip(g) {
                *vj = cfg.beta2 * *vj + (1.0 - cfg.beta2) * gj * gj;
            }
            let (m, v) = (self.m[i].data(), self.v[i].data());
            for ((p, mj), vj) in self.values[i].data_mut().iter_mut().zip(m).zip(v) {
                *p -= cfg.learning_rate * (mj / c1) / (sqrt(vj / c2) + cfg.epsilon);
            }
        }
        Ok(())
    }

    /// Copies of all parameter values (a checkpoint).
    pub fn snapshot(&self) -> Vec<Tensor> {
        self.values.clone()
    }

    /// Restores values from a snapshot with identical shapes.
    pub fn load(&mut self, values: &[Tensor]) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::ShapeMismatch("snapshot parameter count differs".into()));
        }
        for (i, (dst, src)) in self.values.iter_mut().zip(values).enumerate() {
            if dst.shape() != src.shape() {
                return Err(Error::ShapeMismatch(alloc::format!(
                    "parameter `{}` has shape {:?}, snapshot has {:?}",
                    self.names[i],
                    dst.shape(),
                    src.shape()
                )));
            }
            dst.clone_from(src);
        }
        Ok(())
    }
}
