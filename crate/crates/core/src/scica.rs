//! Single-channel ICA baseline: delay embedding, whitening, symmetric
//! FastICA, spectral grouping of components, and source reconstruction.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::math::{cos, for_each_permutation, mean, pearson, sin, sqrt, std_dev, tanh};
use crate::nn::Tensor;
use crate::rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Hankel matrix of lagged samples: entry `(i, j)` is `x[j + lags - 1 - i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayEmbedding {
    pub lags: usize,
    pub matrix: Tensor,
}

pub fn delay_embed(series: &[f64], lags: usize) -> Result<DelayEmbedding> {
    if lags == 0 || lags >= series.len() + 1 {
        return Err(invalid("lag count must lie in [1, series length]"));
    }
    let cols = series.len() - lags + 1;
    let mut m = Tensor::zeros(&[lags, cols]);
    for i in 0..lags {
        for j in 0..cols {
            m.set(i, j, series[j + lags - 1 - i]);
        }
    }
    Ok(DelayEmbedding { lags, matrix: m })
}

/// Averages the anti-diagonals of a Hankel-structured matrix back into a series.
pub fn hankel_average(m: &Tensor) -> Vec<f64> {
    let (l, c) = (m.rows(), m.cols());
    let n = l + c - 1;
    let mut sum = vec![0.0; n];
    let mut cnt = vec![0usize; n];
    for i in 0..l {
        for j in 0..c {
            let t = j + l - 1 - i;
            sum[t] += m.get(i, j);
            cnt[t] += 1;
        }
    }
    sum.iter().zip(&cnt).map(|(s, c)| s / *c as f64).collect()
}

/// Whitened observations `z = transform * (x - mean)` with identity sample covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Whitened {
    pub z: Tensor,
    /// `r x L`
    pub transform: Tensor,
    /// `L x r`, the pseudo-inverse of `transform` on the retained subspace.
    pub dewhiten: Tensor,
    pub mean: Vec<f64>,
}

/// PCA whitening. Eigenvalues below `1e-10 * max` are discarded; at most
/// `max_rank` leading directions are kept.
pub fn whiten(x: &Tensor, max_rank: usize) -> Result<Whitened> {
    let (l, m) = (x.rows(), x.cols());
    if l == 0 || m < 2 {
        return Err(invalid("whitening needs at least one row and two columns"));
    }
    let means: Vec<f64> = (0..l).map(|i| mean(x.row(i))).collect();
    let mut xc = x.clone();
    for (i, mu) in means.iter().enumerate() {
        xc.row_mut(i).iter_mut().for_each(|v| *v -= mu);
    }
    let mut cov = vec![0.0; l * l];
    crate::nn::gemm(l, m, l, 1.0 / m as f64, xc.data(), false, xc.data(), true, 0.0, &mut cov);
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(l, l, &cov));
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]];
    if !(top > 0.0) {
        return Err(invalid("observations have zero variance"));
    }
    let keep: Vec<usize> = order.into_iter().filter(|&i| eig.eigenvalues[i] > 1e-10 * top).take(max_rank.max(1)).collect();
    let r = keep.len();
    let mut transform = Tensor::zeros(&[r, l]);
    let mut dewhiten = Tensor::zeros(&[l, r]);
    for (k, &i) in keep.iter().enumerate() {
        let lam = eig.eigenvalues[i];
        // Fix the eigenvector sign so results do not depend on solver conventions.
        let col = eig.eigenvectors.column(i);
        let pivot = (0..l).max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()).then(b.cmp(&a))).unwrap();
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..l {
            transform.set(k, j, sign * col[j] / sqrt(lam));
            dewhiten.set(j, k, sign * col[j] * sqrt(lam));
        }
    }
    let mut z = Tensor::zeros(&[r, m]);
    crate::nn::gemm(r, l, m, 1.0, transform.data(), false, xc.data(), false, 0.0, z.data_mut());
    Ok(Whitened { z, transform, dewhiten, mean: means })
}

/// `(W W^T)^{-1/2} W` for a square matrix.
fn symmetric_decorrelate(w: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(w * w.transpose());
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| 1.0 / sqrt(v.max(1e-300))));
    &e.eigenvectors * d * e.eigenvectors.transpose() * w
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct IcaConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for IcaConfig {
    fn default() -> Self {
        Self { tolerance: 1e-6, max_iterations: 500, seed: 0 }
    }
}

/// Symmetric fixed-point FastICA with the `tanh` contrast on whitened data.
/// Returns the `n x r` unmixing matrix (orthonormal rows).
pub fn fast_ica(z: &Tensor, n_components: usize, cfg: &IcaConfig) -> Result<Tensor> {
    let (r, m) = (z.rows(), z.cols());
    if n_components == 0 || n_components > r {
        return Err(invalid("component count must lie in [1, whitened rank]"));
    }
    let n = n_components;
    let zm = DMatrix::from_row_slice(r, m, z.data());
    let zn = zm.rows(0, n).into_owned();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut g = rng::stream(cfg.seed, &[0x6963_61]);
    let mut w = symmetric_decorrelate(&DMatrix::from_fn(n, n, |_, _| normal.sample(&mut g)));
    for it in 1..=cfg.max_iterations {
        let y = &w * &zn;
        let gy = y.map(tanh);
        let dg = gy.map(|t| 1.0 - t * t);
        let mut next = &gy * zn.transpose() / m as f64;
        for i in 0..n {
            let mean_dg = dg.row(i).sum() / m as f64;
            for j in 0..n {
                next[(i, j)] -= mean_dg * w[(i, j)];
            }
        }
        let next = symmetric_decorrelate(&next);
        let change = (0..n)
            .map(|i| (1.0 - next.row(i).dot(&w.row(i)).abs()).abs())
            .fold(0.0f64, f64::max);
        w = next;
        if change < cfg.tolerance {
            let mut out = Tensor::zeros(&[n, r]);
            for i in 0..n {
                for j in 0..n {
                    out.set(i, j, w[(i, j)]);
                }
            }
            return Ok(out);
        }
        if it == cfg.max_iterations {
            break;
        }
    }
    Err(Error::NotConverged { iterations: cfg.max_iterations })
}

fn magnitude_spectrum(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|f| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let a = 2.0 * core::f64::consts::PI * (f * t) as f64 / n as f64;
                re += v * cos(a);
                im -= v * sin(a);
            }
            sqrt(re * re + im * im)
        })
        .collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / sqrt(na * nb)
    }
}

/// Average-linkage agglomerative grouping of component rows by cosine
/// similarity of their magnitude spectra, stopped at `n_sources` groups.
/// Returns the group of every component; groups are numbered by first member.
pub fn group_components(components: &Tensor, n_sources: usize) -> Result<Vec<usize>> {
    let n = components.rows();
    if n_sources == 0 {
        return Err(invalid("at least one source is required"));
    }
    let spectra: Vec<Vec<f64>> = (0..n).map(|i| magnitude_spectrum(components.row(i))).collect();
    let sim: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| cosine(&spectra[i], &spectra[j])).collect()).collect();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    while clusters.len() > n_sources {
        let mut best = (f64::NEG_INFINITY, 0, 1);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut s = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        s += sim[i][j];
                    }
                }
                s /= (clusters[a].len() * clusters[b].len()) as f64;
                if s > best.0 {
                    best = (s, a, b);
                }
            }
        }
        let merged = clusters.remove(best.2);
        clusters[best.1].extend(merged);
    }
    let mut groups = vec![0; n];
    let mut firsts: Vec<(usize, usize)> = clusters.iter().enumerate().map(|(g, c)| (*c.iter().min().unwrap(), g)).collect();
    firsts.sort_unstable();
    for (label, &(_, g)) in firsts.iter().enumerate() {
        for &i in &clusters[g] {
            groups[i] = label;
        }
    }
    Ok(groups)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ScicaConfig {
    pub lags: usize,
    pub components: usize,
    pub ica: IcaConfig,
}

impl Default for ScicaConfig {
    fn default() -> Self {
        Self { lags: 60, components: 12, ica: IcaConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationResult {
    /// Independent components, one row each.
    pub components: Tensor,
    pub grouping: Vec<usize>,
    /// Mean-free reconstructed series, one per source.
    pub sources: Vec<Vec<f64>>,
    /// RMS of `series - mean - sum(sources)`.
    pub residual_rms: f64,
}

/// Projects the chosen components back to the lag space and averages the
/// Hankel anti-diagonals into a series.
pub fn reconstruct(w: &Whitened, unmix: &Tensor, components: &Tensor, members: &[usize]) -> Vec<f64> {
    let (l, r) = (w.dewhiten.rows(), w.dewhiten.cols());
    let cols = components.cols();
    if members.is_empty() {
        return vec![0.0; l + cols - 1];
    }
    // mixing in whitened space = unmix^T (rows of unmix are orthonormal)
    let mut a = Tensor::zeros(&[l, members.len()]);
    for (c, &i) in members.iter().enumerate() {
        for row in 0..l {
            let mut s = 0.0;
            for k in 0..r.min(unmix.cols()) {
                s += w.dewhiten.get(row, k) * unmix.get(i, k);
            }
            a.set(row, c, s);
        }
    }
    let mut sel = Tensor::zeros(&[members.len(), cols]);
    for (c, &i) in members.iter().enumerate() {
        sel.row_mut(c).copy_from_slice(components.row(i));
    }
    let mut xhat = Tensor::zeros(&[l, cols]);
    crate::nn::gemm(l, members.len(), cols, 1.0, a.data(), false, sel.data(), false, 0.0, xhat.data_mut());
    hankel_average(&xhat)
}

/// Separates one channel into `n_sources` series.
pub fn scica_separate(series: &[f64], n_sources: usize, cfg: &ScicaConfig) -> Result<SeparationResult> {
    let emb = delay_embed(series, cfg.lags)?;
    let w = whiten(&emb.matrix, cfg.components)?;
    let n = cfg.components.min(w.z.rows());
    let unmix = fast_ica(&w.z, n, &cfg.ica)?;
    let mut comps = Tensor::zeros(&[n, w.z.cols()]);
    crate::nn::gemm(n, n, w.z.cols(), 1.0, unmix.columns(0, n).data(), false, w.z.data(), false, 0.0, comps.data_mut());
    let grouping = group_components(&comps, n_sources.min(n))?;
    let mut sources: Vec<Vec<f64>> = (0..n_sources)
        .map(|g| {
            let members: Vec<usize> = (0..n).filter(|&i| grouping[i] == g).collect();
            reconstruct(&w, &unmix, &comps, &members)
        })
        .collect();
    sources.iter_mut().for_each(|s| s.truncate(series.len()));
    let mut means = Tensor::zeros(&[cfg.lags, w.z.cols()]);
    for (i, mu) in w.mean.iter().enumerate() {
        means.row_mut(i).fill(*mu);
    }
    let offset = hankel_average(&means);
    let resid: Vec<f64> = (0..series.len())
        .map(|t| series[t] - offset[t] - sources.iter().map(|s| s[t]).sum::<f64>())
        .collect();
    let residual_rms = sqrt(resid.iter().map(|v| v * v).sum::<f64>() / resid.len() as f64);
    Ok(SeparationResult { components: comps, grouping, sources, residual_rms })
}

/// Mean correlation between estimated and true sources under the best
/// assignment; true sources left unmatched contribute 0. Zero-variance
/// true sources are skipped; `None` when none remain.
pub fn matched_correlation(estimates: &[Vec<f64>], truth: &[Vec<f64>]) -> Option<f64> {
    let truth: Vec<&Vec<f64>> = truth.iter().filter(|t| std_dev(t) > 0.0).collect();
    if truth.is_empty() {
        return None;
    }
    let n = estimates.len().max(truth.len());
    let corr = |e: usize, t: usize| -> f64 {
        match (estimates.get(e), truth.get(t)) {
            (Some(a), Some(b)) => pearson(a, b).unwrap_or(0.0),
            _ => 0.0,
        }
    };
    let mut best = f64::NEG_INFINITY;
    for_each_permutation(n, |perm| {
        let s: f64 = (0..truth.len()).map(|t| corr(perm[t], t)).sum();
        best = best.max(s);
    });
    Some(best / truth.len() as f64)
}
