#![allow(dead_code)]

use pirdfl_core::nn::{ModelParams, Tensor};
use pirdfl_core::rng;
use rand::Rng;

/// Random block with the scale of a normalized window (summed row deviation near 1).
pub fn random_window(sensors: usize, len: usize, seed: u64) -> Tensor {
    let mut r = rng::stream(seed, &[0x77]);
    let data = (0..sensors * len).map(|_| r.random_range(-0.6..0.6) / sensors as f64).collect();
    Tensor::from_vec(&[sensors, len], data).unwrap()
}

pub struct GradReport {
    pub checked: usize,
    /// Entries skipped because the loss has a kink within one step of the
    /// probe (left and right slopes disagree).
    pub kinks: usize,
    pub worst: f64,
    pub worst_name: String,
}

/// Moves every parameter by a small random amount so no ReLU sits exactly on
/// its kink (zero biases and constant cell states do at initialization).
pub fn jitter(params: &mut ModelParams, amount: f64, seed: u64) {
    let mut r = rng::stream(seed, &[0x6a]);
    for t in 0..params.len() {
        let id = pirdfl_core::nn::ParamId(t);
        for v in params.value_mut(id).data_mut() {
            *v += r.random_range(-amount..amount);
        }
    }
}

/// Compares `analytic` against central differences of `loss` on up to
/// `per_tensor` entries of every parameter tensor (every entry for small ones).
/// Relative error is `|a - n| / max(|a|, |n|, 1e-5)`. Each entry is probed with
/// h = 1e-5 first; when that misses the tolerance the step shrinks to 1e-6 and
/// 1e-7, since with thousands of ReLUs downstream a slope change of a few
/// per mille inside the step is common. An entry whose left and right slopes
/// disagree at every step is counted as a kink instead of a failure.
pub fn check_gradients(
    params: &mut ModelParams,
    analytic: &[Tensor],
    per_tensor: usize,
    seed: u64,
    mut loss: impl FnMut(&ModelParams) -> f64,
) -> GradReport {
    let tol = 1e-4;
    let scale = |a: f64, b: f64| a.abs().max(b.abs()).max(1e-5);
    let f0 = loss(params);
    let mut r = rng::stream(seed, &[0x6763]);
    let mut report = GradReport { checked: 0, kinks: 0, worst: 0.0, worst_name: String::new() };
    for t in 0..params.len() {
        let id = pirdfl_core::nn::ParamId(t);
        let n = params.value(id).len();
        let entries: Vec<usize> =
            if n <= per_tensor { (0..n).collect() } else { (0..per_tensor).map(|_| r.random_range(0..n)).collect() };
        for i in entries {
            let ana = analytic[t].data()[i];
            let orig = params.value(id).data()[i];
            let mut best = f64::INFINITY;
            let mut best_num = 0.0;
            let mut kinked = true;
            for h in [1e-5, 1e-6, 1e-7] {
                params.value_mut(id).data_mut()[i] = orig + h;
                let up = loss(params);
                params.value_mut(id).data_mut()[i] = orig - h;
                let down = loss(params);
                params.value_mut(id).data_mut()[i] = orig;
                let (left, right) = ((f0 - down) / h, (up - f0) / h);
                let smooth = (left - right).abs() / scale(left, right) <= 1e-2;
                let num = (up - down) / (2.0 * h);
                let rel = (ana - num).abs() / scale(ana, num);
                if smooth {
                    kinked = false;
                    if rel < best {
                        best = rel;
                        best_num = num;
                    }
                }
                if smooth && rel < tol {
                    break;
                }
            }
            if kinked {
                report.kinks += 1;
                continue;
            }
            report.checked += 1;
            if best > report.worst {
                report.worst = best;
                report.worst_name = format!("{}[{i}] analytic {ana:e} numeric {best_num:e}", params.name(id));
            }
        }
    }
    report
}
