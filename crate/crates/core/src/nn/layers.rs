//! The layers PIRNet needs, each with an explicit forward cache and backward pass.
//!
//! Batched activations are flat row-major buffers. Sequence layers use a
//! step-major layout: row `k * batch + b` holds step `k` of sequence `b`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{gemm, ModelParams, ParamId, Tensor};
use crate::math::{sigmoid, sqrt};
use crate::rng;

/// Smallest variance used by the layer normalization denominator.
pub const LN_VAR_FLOOR: f64 = 1e-6;

fn add_colsum(dst: &mut Tensor, src: &[f64], cols: usize) {
    let d = dst.data_mut();
    for row in src.chunks_exact(cols) {
        for (a, b) in d.iter_mut().zip(row) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// `x W + b`
    Linear,
    /// `sigmoid(x W + b)`
    Sigmoid,
    /// `ReLU(x W) + b`
    ReluThenBias,
}

/// Fully connected layer.
#[derive(Debug, Clone)]
pub struct Dense {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub act: Activation,
    pub input: usize,
    pub output: usize,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    pre: Vec<f64>,
    out: Vec<f64>,
}

impl DenseCache {
    pub fn output(&self) -> &[f64] {
        &self.out
    }
}

impl Dense {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: &mut ModelParams,
        name: &str,
        input: usize,
        output: usize,
        bias: bool,
        act: Activation,
        r: &mut rng::Rng,
    ) -> Self {
        let w = params.add_xavier(format!("{name}.w"), input, output, r);
        let b = bias.then(|| params.add_constant(format!("{name}.b"), &[output], 0.0));
        Self { w, b, act, input, output }
    }

    pub fn forward(&self, p: &ModelParams, x: &[f64], rows: usize) -> DenseCache {
        let mut pre = vec![0.0; rows * self.output];
        gemm(rows, self.input, self.output, 1.0, x, false, p.value(self.w).data(), false, 0.0, &mut pre);
        let bias = self.b.map(|b| p.value(b).data());
        let mut out = pre.clone();
        for row in out.chunks_exact_mut(self.output) {
            for (j, v) in row.iter_mut().enumerate() {
                let b = bias.map_or(0.0, |b| b[j]);
                *v = match self.act {
                    Activation::Linear => *v + b,
                    Activation::Sigmoid => sigmoid(*v + b),
                    Activation::ReluThenBias => v.max(0.0) + b,
                };
            }
        }
        DenseCache { pre, out }
    }

    /// Accumulates parameter gradients; returns the input gradient when asked.
    pub fn backward(
        &self,
        p: &ModelParams,
        grads: &mut [Tensor],
        x: &[f64],
        rows: usize,
        cache: &DenseCache,
        dy: &[f64],
        need_dx: bool,
    ) -> Option<Vec<f64>> {
        let dpre: Vec<f64> = match self.act {
            Activation::Linear => dy.to_vec(),
            Activation::Sigmoid => dy.iter().zip(&cache.out).map(|(d, y)| d * y * (1.0 - y)).collect(),
            Activation::ReluThenBias => dy.iter().zip(&cache.pre).map(|(d, z)| if *z > 0.0 { *d } else { 0.0 }).collect(),
        };
        if let Some(b) = self.b {
            let src = if self.act == Activation::ReluThenBias { dy } else { &dpre };
            add_colsum(&mut grads[b.0], src, self.output);
        }
        gemm(self.input, rows, self.output, 1.0, x, true, &dpre, false, 1.0, grads[self.w.0].data_mut());
        need_dx.then(|| {
            let mut dx = vec![0.0; rows * self.input];
            gemm(rows, self.output, self.input, 1.0, &dpre, false, p.value(self.w).data(), true, 0.0, &mut dx);
            dx
        })
    }
}

/// Gated projection of an `N x T` segment: `ReLU(x u) * sigmoid(x v) + b`.
#[derive(Debug, Clone)]
pub struct Gated {
    pub u: ParamId,
    pub v: ParamId,
    pub b: ParamId,
    pub sensors: usize,
    pub seg_len: usize,
    pub channels: usize,
}

#[derive(Debug, Clone)]
pub struct GatedCache {
    pre_u: Vec<f64>,
    gate: Vec<f64>,
    out: Vec<f64>,
}

impl GatedCache {
    pub fn output(&self) -> &[f64] {
        &self.out
    }
}

impl Gated {
    pub fn new(params: &mut ModelParams, name: &str, sensors: usize, seg_len: usize, channels: usize, r: &mut rng::Rng) -> Self {
        let u = params.add_xavier(format!("{name}.u"), seg_len, channels, r);
        let v = params.add_xavier(format!("{name}.v"), seg_len, channels, r);
        let b = params.add_constant(format!("{name}.b"), &[sensors, channels], 0.0);
        Self { u, v, b, sensors, seg_len, channels }
    }

    /// `x` holds `rows` sensor rows of length `seg_len`; row `i` belongs to sensor `i % sensors`.
    pub fn forward(&self, p: &ModelParams, x: &[f64], rows: usize) -> GatedCache {
        let (t, c) = (self.seg_len, self.channels);
        let mut pre_u = vec![0.0; rows * c];
        let mut gate = vec![0.0; rows * c];
        gemm(rows, t, c, 1.0, x, false, p.value(self.u).data(), false, 0.0, &mut pre_u);
        gemm(rows, t, c, 1.0, x, false, p.value(self.v).data(), false, 0.0, &mut gate);
        gate.iter_mut().for_each(|g| *g = sigmoid(*g));
        let bias = p.value(self.b).data();
        let mut out = vec![0.0; rows * c];
        for r in 0..rows {
            let n = r % self.sensors;
            for j in 0..c {
                let i = r * c + j;
                out[i] = pre_u[i].max(0.0) * gate[i] + bias[n * c + j];
            }
        }
        GatedCache { pre_u, gate, out }
    }

    pub fn backward(&self, grads: &mut [Tensor], x: &[f64], rows: usize, cache: &GatedCache, dy: &[f64]) {
        let (t, c) = (self.seg_len, self.channels);
        let mut du = vec![0.0; rows * c];
        let mut dv = vec![0.0; rows * c];
        {
            let gb = grads[self.b.0].data_mut();
            for r in 0..rows {
                let n = r % self.sensors;
                for j in 0..c {
                    let i = r * c + j;
                    gb[n * c + j] += dy[i];
                    let relu = cache.pre_u[i].max(0.0);
                    let s = cache.gate[i];
                    if cache.pre_u[i] > 0.0 {
                        du[i] = dy[i] * s;
                    }
                    dv[i] = dy[i] * relu * s * (1.0 - s);
                }
            }
        }
        gemm(t, rows, c, 1.0, x, true, &du, false, 1.0, grads[self.u.0].data_mut());
        gemm(t, rows, c, 1.0, x, true, &dv, false, 1.0, grads[self.v.0].data_mut());
    }
}

/// One direction of a layer-normalized LSTM.
///
/// Gates are laid out `[input | forget | output | candidate]`; the three
/// gates use sigmoid, the candidate and the cell output use ReLU:
/// `c = f * c_prev + i * g`, `h = o * ReLU(gamma * LN(c) + beta)`.
#[derive(Debug, Clone)]
pub struct LstmDir {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub input: usize,
    pub hidden: usize,
    pub reverse: bool,
}

#[derive(Debug, Clone)]
pub struct DirCache {
    gates: Vec<f64>,
    c: Vec<f64>,
    nhat: Vec<f64>,
    inv_std: Vec<f64>,
    floored: Vec<bool>,
    y: Vec<f64>,
    h: Vec<f64>,
}

impl DirCache {
    /// Hidden states, step-major.
    pub fn hidden(&self) -> &[f64] {
        &self.h
    }
}

impl LstmDir {
    pub fn new(params: &mut ModelParams, name: &str, input: usize, hidden: usize, reverse: bool, r: &mut rng::Rng) -> Self {
        let wx = params.add_xavier(format!("{name}.wx"), input, 4 * hidden, r);
        let wh = params.add_xavier(format!("{name}.wh"), hidden, 4 * hidden, r);
        let mut bias = Tensor::zeros(&[4 * hidden]);
        bias.data_mut()[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        let b = params.add(format!("{name}.b"), bias);
        let gamma = params.add_constant(format!("{name}.gamma"), &[hidden], 1.0);
        let beta = params.add_constant(format!("{name}.beta"), &[hidden], 0.0);
        Self { wx, wh, b, gamma, beta, input, hidden, reverse }
    }

    fn pos(&self, t: usize, steps: usize) -> usize {
        if self.reverse {
            steps - 1 - t
        } else {
            t
        }
    }

    pub fn forward(&self, p: &ModelParams, x: &[f64], steps: usize, batch: usize) -> DirCache {
        let h = self.hidden;
        let g4 = 4 * h;
        let rows = steps * batch;
        let mut gates = vec![0.0; rows * g4];
        gemm(rows, self.input, g4, 1.0, x, false, p.value(self.wx).data(), false, 0.0, &mut gates);
        let bias = p.value(self.b).data();
        for row in gates.chunks_exact_mut(g4) {
            row.iter_mut().zip(bias).for_each(|(v, b)| *v += b);
        }
        let wh = p.value(self.wh).data();
        let gamma = p.value(self.gamma).data();
        let beta = p.value(self.beta).data();
        let mut c = vec![0.0; rows * h];
        let mut nhat = vec![0.0; rows * h];
        let mut y = vec![0.0; rows * h];
        let mut hs = vec![0.0; rows * h];
        let mut inv_std = vec![0.0; rows];
        let mut floored = vec![false; rows];
        for t in 0..steps {
            let blk = self.pos(t, steps) * batch;
            let prev = (t > 0).then(|| self.pos(t - 1, steps) * batch);
            if let Some(prev) = prev {
                gemm(batch, h, g4, 1.0, &hs[prev * h..(prev + batch) * h], false, wh, false, 1.0, &mut gates[blk * g4..(blk + batch) * g4]);
            }
            for bi in 0..batch {
                let r = blk + bi;
                let gr = &mut gates[r * g4..(r + 1) * g4];
                gr[..3 * h].iter_mut().for_each(|v| *v = sigmoid(*v));
                gr[3 * h..].iter_mut().for_each(|v| *v = v.max(0.0));
                for u in 0..h {
                    let c_prev = prev.map_or(0.0, |p| c[(p + bi) * h + u]);
                    c[r * h + u] = gr[h + u] * c_prev + gr[u] * gr[3 * h + u];
                }
                let cr = &c[r * h..(r + 1) * h];
                let mean = cr.iter().sum::<f64>() / h as f64;
                let var = cr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / h as f64;
                floored[r] = var < LN_VAR_FLOOR;
                let is = 1.0 / sqrt(var.max(LN_VAR_FLOOR));
                inv_std[r] = is;
                for u in 0..h {
                    let n = (cr[u] - mean) * is;
                    nhat[r * h + u] = n;
                    let yv = gamma[u] * n + beta[u];
                    y[r * h + u] = yv;
                    hs[r * h + u] = gr[2 * h + u] * yv.max(0.0);
                }
            }
        }
        DirCache { gates, c, nhat, inv_std, floored, y, h: hs }
    }

    /// Back-propagates `dh` (gradient of the hidden states, step-major) and returns the input gradient.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        p: &ModelParams,
        grads: &mut [Tensor],
        x: &[f64],
        steps: usize,
        batch: usize,
        cache: &DirCache,
        dh: &[f64],
    ) -> Vec<f64> {
        let h = self.hidden;
        let g4 = 4 * h;
        let rows = steps * batch;
        let wh = p.value(self.wh).data();
        let gamma = p.value(self.gamma).data();
        let mut da = vec![0.0; rows * g4];
        let mut dh_rec = vec![0.0; batch * h];
        let mut dc_next = vec![0.0; batch * h];
        let mut dgamma = vec![0.0; h];
        let mut dbeta = vec![0.0; h];
        let mut dn = vec![0.0; h];
        let mut d_out = vec![0.0; h];
        for t in (0..steps).rev() {
            let blk = self.pos(t, steps) * batch;
            let prev = (t > 0).then(|| self.pos(t - 1, steps) * batch);
            for bi in 0..batch {
                let r = blk + bi;
                let gr = &cache.gates[r * g4..(r + 1) * g4];
                for u in 0..h {
                    let dhu = dh[r * h + u] + dh_rec[bi * h + u];
                    let yv = cache.y[r * h + u];
                    let o = gr[2 * h + u];
                    d_out[u] = dhu * yv.max(0.0);
                    let dy = if yv > 0.0 { dhu * o } else { 0.0 };
                    dgamma[u] += dy * cache.nhat[r * h + u];
                    dbeta[u] += dy;
                    dn[u] = dy * gamma[u];
                }
                let nh = &cache.nhat[r * h..(r + 1) * h];
                let mean_dn = dn.iter().sum::<f64>() / h as f64;
                let mean_dn_n = if cache.floored[r] {
                    0.0
                } else {
                    dn.iter().zip(nh).map(|(a, b)| a * b).sum::<f64>() / h as f64
                };
                let is = cache.inv_std[r];
                let dar = &mut da[r * g4..(r + 1) * g4];
                for u in 0..h {
                    let dc = is * (dn[u] - mean_dn - nh[u] * mean_dn_n) + dc_next[bi * h + u];
                    let (i, f, o, g) = (gr[u], gr[h + u], gr[2 * h + u], gr[3 * h + u]);
                    let c_prev = prev.map_or(0.0, |p| cache.c[(p + bi) * h + u]);
                    dar[u] = dc * g * i * (1.0 - i);
                    dar[h + u] = dc * c_prev * f * (1.0 - f);
                    dar[2 * h + u] = d_out[u] * o * (1.0 - o);
                    dar[3 * h + u] = if g > 0.0 { dc * i } else { 0.0 };
                    dc_next[bi * h + u] = dc * f;
                }
            }
            gemm(batch, g4, h, 1.0, &da[blk * g4..(blk + batch) * g4], false, wh, true, 0.0, &mut dh_rec);
        }
        let mut h_prev = vec![0.0; rows * h];
        for t in 1..steps {
            let blk = self.pos(t, steps) * batch;
            let prev = self.pos(t - 1, steps) * batch;
            h_prev[blk * h..(blk + batch) * h].copy_from_slice(&cache.h[prev * h..(prev + batch) * h]);
        }
        gemm(self.input, rows, g4, 1.0, x, true, &da, false, 1.0, grads[self.wx.0].data_mut());
        gemm(h, rows, g4, 1.0, &h_prev, true, &da, false, 1.0, grads[self.wh.0].data_mut());
        add_colsum(&mut grads[self.b.0], &da, g4);
        grads[self.gamma.0].data_mut().iter_mut().zip(&dgamma).for_each(|(a, b)| *a += b);
        grads[self.beta.0].data_mut().iter_mut().zip(&dbeta).for_each(|(a, b)| *a += b);
        let mut dx = vec![0.0; rows * self.input];
        gemm(rows, g4, self.input, 1.0, &da, false, p.value(self.wx).data(), true, 0.0, &mut dx);
        dx
    }
}

/// Bidirectional LSTM whose two directions are summed position by position.
#[derive(Debug, Clone)]
pub struct BiLstm {
    pub fwd: LstmDir,
    pub bwd: LstmDir,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    fwd: DirCache,
    bwd: DirCache,
    out: Vec<f64>,
}

impl BiLstmCache {
    pub fn output(&self) -> &[f64] {
        &self.out
    }
}

impl BiLstm {
    pub fn new(params: &mut ModelParams, name: &str, input: usize, hidden: usize, r: &mut rng::Rng) -> Self {
        Self {
            fwd: LstmDir::new(params, &format!("{name}.fwd"), input, hidden, false, r),
            bwd: LstmDir::new(params, &format!("{name}.bwd"), input, hidden, true, r),
        }
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden
    }

    pub fn forward(&self, p: &ModelParams, x: &[f64], steps: usize, batch: usize) -> BiLstmCache {
        let fwd = self.fwd.forward(p, x, steps, batch);
        let bwd = self.bwd.forward(p, x, steps, batch);
        let out = fwd.h.iter().zip(&bwd.h).map(|(a, b)| a + b).collect();
        BiLstmCache { fwd, bwd, out }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        p: &ModelParams,
        grads: &mut [Tensor],
        x: &[f64],
        steps: usize,
        batch: usize,
        cache: &BiLstmCache,
        dy: &[f64],
    ) -> Vec<f64> {
        let mut dx = self.fwd.backward(p, grads, x, steps, batch, &cache.fwd, dy);
        let db = self.bwd.backward(p, grads, x, steps, batch, &cache.bwd, dy);
        dx.iter_mut().zip(&db).for_each(|(a, b)| *a += b);
        dx
    }
}
