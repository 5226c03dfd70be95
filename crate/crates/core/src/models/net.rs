//! The shared two-stage architecture behind both task networks.
//!
//! Stage 1 projects every segment with a gated projection, runs two BiLSTM
//! layers over the segment sequence, and splits the result into `P`
//! components with a fully connected layer. Stage 2 runs each component
//! sequence through one shared projection and two BiLSTM layers, then a
//! task head: a sigmoid detector over the concatenated steps (counting) or
//! a per-step 2-D regressor (localization).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::nn::layers::{Activation, BiLstm, BiLstmCache, Dense, DenseCache, Gated, GatedCache};
use crate::error::{invalid, Error, Result};
use crate::geometry::Point2;
use crate::nn::{ModelParams, Tensor};
use crate::rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum Head {
    /// One sigmoid probability per component.
    Count,
    /// One point per component and segment: `center + scale * raw`.
    Locate { center: Point2, scale: f64 },
}

/// Layer sizes of a two-stage network.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct NetShape {
    pub sensors: usize,
    pub seg_len: usize,
    pub segments: usize,
    /// Gated projection channels `C`.
    pub channels: usize,
    pub stage1_width: usize,
    /// Separated components `P` (persons handled).
    pub components: usize,
    pub component_width: usize,
    pub stage2_input: usize,
    pub stage2_width: usize,
    pub head: Head,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Preset {
    Desk,
    Paper,
}

impl NetShape {
    /// Person-counting network: `P = 3` components of width 4.
    pub fn counting(sensors: usize) -> Self {
        Self {
            sensors,
            seg_len: 30,
            segments: 5,
            channels: 8,
            stage1_width: 64,
            components: 3,
            component_width: 4,
            stage2_input: 16,
            stage2_width: 16,
            head: Head::Count,
        }
    }

    /// Localization network for `m` persons in an arena centred at `center`.
    pub fn localization(sensors: usize, m: usize, preset: Preset, center: Point2, scale: f64) -> Self {
        Self {
            sensors,
            seg_len: 30,
            segments: 5,
            channels: 32,
            stage1_width: match preset {
                Preset::Desk => 128,
                Preset::Paper => 512,
            },
            components: m,
            component_width: 32,
            stage2_input: 64,
            stage2_width: 64,
            head: Head::Locate { center, scale },
        }
    }

    pub fn window_len(&self) -> usize {
        self.seg_len * self.segments
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.sensors,
            self.seg_len,
            self.segments,
            self.channels,
            self.stage1_width,
            self.components,
            self.component_width,
            self.stage2_input,
            self.stage2_width,
        ];
        if dims.contains(&0) {
            return Err(invalid("all network dimensions must be positive"));
        }
        Ok(())
    }
}

/// Parameters and layers of one two-stage network.
#[derive(Debug, Clone)]
pub struct TwoStageNet {
    pub shape: NetShape,
    pub params: ModelParams,
    gated: Gated,
    i1: Dense,
    l1a: BiLstm,
    l1b: BiLstm,
    sep: Dense,
    i2: Dense,
    l2a: BiLstm,
    l2b: BiLstm,
    out: Dense,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    batch: usize,
    x: Vec<f64>,
    gated: GatedCache,
    i1: DenseCache,
    l1a: BiLstmCache,
    l1b: BiLstmCache,
    sep: DenseCache,
    u2: Vec<f64>,
    i2: DenseCache,
    l2a: BiLstmCache,
    l2b: BiLstmCache,
    head_in: Vec<f64>,
    out: DenseCache,
}

impl Forward {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Raw head output. Counting: `batch x P` probabilities. Localization:
    /// `batch x P x K x 2` coordinates before the output affine map.
    pub fn raw(&self) -> Vec<f64> {
        self.out.output().to_vec()
    }
}

impl TwoStageNet {
    pub fn new(shape: NetShape, seed: u64) -> Result<Self> {
        shape.validate()?;
        let s = shape;
        let mut r = rng::stream(seed, &[0x6e65_7477]);
        let mut p = ModelParams::new();
        let gated = Gated::new(&mut p, "gated", s.sensors, s.seg_len, s.channels, &mut r);
        let i1 = Dense::new(&mut p, "i1", s.sensors * s.channels, s.stage1_width, false, Activation::Linear, &mut r);
        let l1a = BiLstm::new(&mut p, "bilstm1", s.stage1_width, s.stage1_width, &mut r);
        let l1b = BiLstm::new(&mut p, "bilstm2", s.stage1_width, s.stage1_width, &mut r);
        let sep = Dense::new(
            &mut p,
            "fc1",
            s.stage1_width,
            s.components * s.component_width,
            true,
            Activation::ReluThenBias,
            &mut r,
        );
        let i2 = Dense::new(&mut p, "i2", s.component_width, s.stage2_input, false, Activation::Linear, &mut r);
        let l2a = BiLstm::new(&mut p, "bilstm3", s.stage2_input, s.stage2_width, &mut r);
        let l2b = BiLstm::new(&mut p, "bilstm4", s.stage2_width, s.stage2_width, &mut r);
        let out = match s.head {
            Head::Count => Dense::new(&mut p, "fc2", s.segments * s.stage2_width, 1, true, Activation::Sigmoid, &mut r),
            Head::Locate { .. } => Dense::new(&mut p, "fc2", s.stage2_width, 2, true, Activation::Linear, &mut r),
        };
        Ok(Self { shape, params: p, gated, i1, l1a, l1b, sep, i2, l2a, l2b, out })
    }

    pub fn param_names(&self) -> Vec<String> {
        self.params.names().to_vec()
    }

    /// Forward pass over preprocessed `sensors x (segments * seg_len)` inputs.
    pub fn forward(&self, inputs: &[&Tensor]) -> Result<Forward> {
        let s = &self.shape;
        let (n, t, k) = (s.sensors, s.seg_len, s.segments);
        let b = inputs.len();
        if b == 0 {
            return Err(Error::Empty("batch"));
        }
        for x in inputs {
            if x.shape() != [n, t * k] {
                return Err(Error::ShapeMismatch(alloc::format!(
                    "network expects {}x{} input, got {:?}",
                    n,
                    t * k,
                    x.shape()
                )));
            }
        }
        let p = &self.params;
        // Rows ordered (segment, window, sensor).
        let mut x = vec![0.0; k * b * n * t];
        for kk in 0..k {
            for (bi, w) in inputs.iter().enumerate() {
                for nn in 0..n {
                    let row = (kk * b + bi) * n + nn;
                    x[row * t..(row + 1) * t].copy_from_slice(&w.row(nn)[kk * t..(kk + 1) * t]);
                }
            }
        }
        let gated = self.gated.forward(p, &x, k * b * n);
        let i1 = self.i1.forward(p, gated.output(), k * b);
        let l1a = self.l1a.forward(p, i1.output(), k, b);
        let l1b = self.l1b.forward(p, l1a.output(), k, b);
        let sep = self.sep.forward(p, l1b.output(), k * b);
        let (pc, cw) = (s.components, s.component_width);
        let pb = pc * b;
        let mut u2 = vec![0.0; k * pb * cw];
        for kk in 0..k {
            for bi in 0..b {
                let src = &sep.output()[(kk * b + bi) * pc * cw..(kk * b + bi + 1) * pc * cw];
                for c in 0..pc {
                    let row = kk * pb + c * b + bi;
                    u2[row * cw..(row + 1) * cw].copy_from_slice(&src[c * cw..(c + 1) * cw]);
                }
            }
        }
        let i2 = self.i2.forward(p, &u2, k * pb);
        let l2a = self.l2a.forward(p, i2.output(), k, pb);
        let l2b = self.l2b.forward(p, l2a.output(), k, pb);
        let h2 = s.stage2_width;
        let (head_in, out) = match s.head {
            Head::Count => {
                let mut f = vec![0.0; pb * k * h2];
                for kk in 0..k {
                    for j in 0..pb {
                        f[(j * k + kk) * h2..(j * k + kk + 1) * h2]
                            .copy_from_slice(&l2b.output()[(kk * pb + j) * h2..(kk * pb + j + 1) * h2]);
                    }
                }
                let out = self.out.forward(p, &f, pb);
                (f, out)
            }
            Head::Locate { .. } => (Vec::new(), self.out.forward(p, l2b.output(), k * pb)),
        };
        Ok(Forward { batch: b, x, gated, i1, l1a, l1b, sep, u2, i2, l2a, l2b, head_in, out })
    }

    /// Counting output, `[window][component]`.
    pub fn probabilities(&self, f: &Forward) -> Vec<Vec<f64>> {
        let (pc, b) = (self.shape.components, f.batch);
        let o = f.out.output();
        (0..b).map(|bi| (0..pc).map(|c| o[c * b + bi]).collect()).collect()
    }

    /// Localization output, `[window][person][segment]`, in metres.
    pub fn points(&self, f: &Forward) -> Vec<Vec<Vec<Point2>>> {
        let Head::Locate { center, scale } = self.shape.head else {
            return Vec::new();
        };
        let (pc, k, b) = (self.shape.components, self.shape.segments, f.batch);
        let o = f.out.output();
        (0..b)
            .map(|bi| {
                (0..pc)
                    .map(|c| {
                        (0..k)
                            .map(|kk| {
                                let row = kk * pc * b + c * b + bi;
                                Point2::new(center.x + scale * o[2 * row], center.y + scale * o[2 * row + 1])
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Accumulates parameter gradients given the loss gradient with respect to the
    /// task output, flattened as `window * P + component` for counting and
    /// `((window * P + person) * K + segment) * 2 + axis` (metres) for localization.
    pub fn backward(&mut self, f: &Forward, d_output: &[f64]) -> Result<()> {
        let s = self.shape;
        let (n, k, b) = (s.sensors, s.segments, f.batch);
        let (pc, cw, h2) = (s.components, s.component_width, s.stage2_width);
        let pb = pc * b;
        let want = match s.head {
            Head::Count => pb,
            Head::Locate { .. } => pb * k * 2,
        };
        if d_output.len() != want {
            return Err(Error::ShapeMismatch(alloc::format!("output gradient needs {want} values, got {}", d_output.len())));
        }
        let mut grads = self.params.take_grads();
        let p = &self.params;
        let d_l2b = match s.head {
            Head::Count => {
                let mut dout = vec![0.0; pb];
                for bi in 0..b {
                    for c in 0..pc {
                        dout[c * b + bi] = d_output[bi * pc + c];
                    }
                }
                let df = self.out.backward(p, &mut grads, &f.head_in, pb, &f.out, &dout, true).unwrap();
                let mut dz = vec![0.0; k * pb * h2];
                for kk in 0..k {
                    for j in 0..pb {
                        dz[(kk * pb + j) * h2..(kk * pb + j + 1) * h2]
                            .copy_from_slice(&df[(j * k + kk) * h2..(j * k + kk + 1) * h2]);
                    }
                }
                dz
            }
            Head::Locate { scale, .. } => {
                let mut dout = vec![0.0; k * pb * 2];
                for bi in 0..b {
                    for c in 0..pc {
                        for kk in 0..k {
                            let row = kk * pb + c * b + bi;
                            let src = ((bi * pc + c) * k + kk) * 2;
                            dout[2 * row] = scale * d_output[src];
                            dout[2 * row + 1] = scale * d_output[src + 1];
                        }
                    }
                }
                self.out.backward(p, &mut grads, f.l2b.output(), k * pb, &f.out, &dout, true).unwrap()
            }
        };
        let d = self.l2b.backward(p, &mut grads, f.l2a.output(), k, pb, &f.l2b, &d_l2b);
        let d = self.l2a.backward(p, &mut grads, f.i2.output(), k, pb, &f.l2a, &d);
        let du2 = self.i2.backward(p, &mut grads, &f.u2, k * pb, &f.i2, &d, true).unwrap();
        let mut dsep = vec![0.0; k * b * pc * cw];
        for kk in 0..k {
            for bi in 0..b {
                for c in 0..pc {
                    let row = kk * pb + c * b + bi;
                    let dst = (kk * b + bi) * pc * cw + c * cw;
                    dsep[dst..dst + cw].copy_from_slice(&du2[row * cw..(row + 1) * cw]);
                }
            }
        }
        let d = self.sep.backward(p, &mut grads, f.l1b.output(), k * b, &f.sep, &dsep, true).unwrap();
        let d = self.l1b.backward(p, &mut grads, f.l1a.output(), k, b, &f.l1b, &d);
        let d = self.l1a.backward(p, &mut grads, f.i1.output(), k, b, &f.l1a, &d);
        let dg = self.i1.backward(p, &mut grads, f.gated.output(), k * b, &f.i1, &d, true).unwrap();
        self.gated.backward(&mut grads, &f.x, k * b * n, &f.gated, &dg);
        self.params.restore_grads(grads);
        Ok(())
    }

    /// Re-routes stage-1 component slots: slot `c` of the output is fed to stage 2 as
    /// component `perm[c]`. Used to verify that stage 2 treats components symmetrically.
    pub fn permute_components(&mut self, perm: &[usize]) -> Result<()> {
        let s = self.shape;
        if perm.len() != s.components {
            return Err(invalid("permutation length must equal the component count"));
        }
        let cw = s.component_width;
        let w = self.params.value(self.sep.w).clone();
        let bias = self.params.value(self.sep.b.expect("separation layer has a bias")).clone();
        let mut nw = w.clone();
        let mut nb = bias.clone();
        for (c, &to) in perm.iter().enumerate() {
            for j in 0..cw {
                for i in 0..w.rows() {
                    nw.set(i, to * cw + j, w.get(i, c * cw + j));
                }
                nb.data_mut()[to * cw + j] = bias.data()[c * cw + j];
            }
        }
        *self.params.value_mut(self.sep.w) = nw;
        *self.params.value_mut(self.sep.b.unwrap()) = nb;
        Ok(())
    }
}
