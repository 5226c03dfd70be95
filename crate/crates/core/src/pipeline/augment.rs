//! Time warping and peak/trough reshaping of scene-level DHF series.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{estimate_dhf, PipelineConfig};
use crate::error::{invalid, Error, Result};
use crate::geometry::Point2;
use crate::math::{interp, round};
use crate::nn::Tensor;
use crate::radiometry::{DynamicsConstants, Recording};
use crate::rng;

/// Resamples `s` as `s(t / a)` with linear interpolation; the output has
/// `round(len * a)` samples.
pub fn warp_series(series: &[f64], a: f64) -> Vec<f64> {
    let n = round(series.len() as f64 * a) as usize;
    (0..n).map(|i| interp(series, i as f64 / a)).collect()
}

fn warp_rows(x: &Tensor, a: f64) -> Tensor {
    let rows: Vec<Vec<f64>> = (0..x.rows()).map(|r| warp_series(x.row(r), a)).collect();
    Tensor::from_rows(&rows).expect("warped rows share one length")
}

/// Warps every series of a recording, labels included, by factor `a`
/// (`a < 1` compresses time, i.e. the persons walk faster).
pub fn time_warp(rec: &Recording, a: f64) -> Result<Recording> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid("warp factor must be positive"));
    }
    let positions = rec
        .positions
        .iter()
        .map(|series| {
            let xs: Vec<f64> = series.iter().map(|p| p.x).collect();
            let ys: Vec<f64> = series.iter().map(|p| p.y).collect();
            warp_series(&xs, a).into_iter().zip(warp_series(&ys, a)).map(|(x, y)| Point2::new(x, y)).collect()
        })
        .collect();
    Ok(Recording {
        scene_id: rec.scene_id,
        sample_rate: rec.sample_rate,
        voltages: warp_rows(&rec.voltages, a),
        dhf: warp_rows(&rec.dhf, a),
        dhf_estimate: rec.dhf_estimate.as_ref().map(|d| warp_rows(d, a)),
        person_dhf: rec.person_dhf.iter().map(|d| warp_rows(d, a)).collect(),
        positions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Peak,
    Trough,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Extremum {
    pub index: usize,
    pub kind: ExtremumKind,
}

/// Alternating peaks and troughs whose swing on both sides is at least
/// `floor` times the series range. Plateaus resolve to their first index;
/// the series end points never qualify.
pub fn detect_extrema(series: &[f64], floor: f64) -> Vec<Extremum> {
    let mut out = Vec::new();
    let n = series.len();
    if n < 3 {
        return out;
    }
    let (min, max) = series.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let h = floor * (max - min);
    if !(max > min) {
        return out;
    }
    let mut hi = (0usize, series[0]);
    let mut lo = (0usize, series[0]);
    let mut dir = 0i8;
    for (i, &v) in series.iter().enumerate().skip(1) {
        match dir {
            0 => {
                if v > hi.1 {
                    hi = (i, v);
                }
                if v < lo.1 {
                    lo = (i, v);
                }
                if hi.1 - lo.1 >= h {
                    if lo.0 < hi.0 {
                        let left_max = series[..lo.0].iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x));
                        if lo.0 > 0 && left_max - lo.1 >= h {
                            out.push(Extremum { index: lo.0, kind: ExtremumKind::Trough });
                        }
                        dir = 1;
                    } else {
                        let left_min = series[..hi.0].iter().fold(f64::INFINITY, |m, x| m.min(*x));
                        if hi.0 > 0 && hi.1 - left_min >= h {
                            out.push(Extremum { index: hi.0, kind: ExtremumKind::Peak });
                        }
                        dir = -1;
                    }
                }
            }
            1 => {
                if v > hi.1 {
                    hi = (i, v);
                } else if hi.1 - v >= h {
                    out.push(Extremum { index: hi.0, kind: ExtremumKind::Peak });
                    dir = -1;
                    lo = (i, v);
                }
            }
            _ => {
                if v < lo.1 {
                    lo = (i, v);
                } else if v - lo.1 >= h {
                    out.push(Extremum { index: lo.0, kind: ExtremumKind::Trough });
                    dir = 1;
                    hi = (i, v);
                }
            }
        }
    }
    out
}

/// One enhanced or suppressed extremum at `t2` between its neighbours `t1` and `t3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reshape {
    pub t1: usize,
    pub t2: usize,
    pub t3: usize,
    pub w: f64,
}

/// Scales the swing from `t1` to `t2` by `w`, then re-anchors `(t2, t3]` with
/// a linearly fading offset so the series stays continuous and `t3` is unchanged.
pub fn reshape_extrema(series: &[f64], selections: &[Reshape]) -> Result<Vec<f64>> {
    let mut s = series.to_vec();
    for r in selections {
        if !(r.t1 < r.t2 && r.t2 < r.t3) || r.t3 >= s.len() {
            return Err(Error::NonMonotoneExtrema { t1: r.t1, t2: r.t2, t3: r.t3 });
        }
        if r.w == 1.0 {
            continue;
        }
        let base = s[r.t1];
        let before = s[r.t2];
        for v in &mut s[r.t1..=r.t2] {
            *v = r.w * (*v - base) + base;
        }
        let delta = s[r.t2] - before;
        let span = (r.t3 - r.t2) as f64;
        for t in r.t2 + 1..=r.t3 {
            s[t] += (r.t3 - t) as f64 / span * delta;
        }
    }
    Ok(s)
}

/// Picks about `fraction` of the interior extrema (never the first or last one,
/// never two adjacent ones) and draws a weight for each.
pub fn select_reshapes(extrema: &[Extremum], cfg: &PipelineConfig, r: &mut rng::Rng) -> Vec<Reshape> {
    if extrema.len() < 3 {
        return Vec::new();
    }
    let mut candidates: Vec<usize> = (1..extrema.len() - 1).collect();
    let want = round(cfg.reshape_fraction * candidates.len() as f64) as usize;
    candidates.shuffle(r);
    let mut chosen: Vec<usize> = Vec::with_capacity(want);
    for c in candidates {
        if chosen.len() >= want {
            break;
        }
        if chosen.iter().all(|&j| j.abs_diff(c) > 1) {
            chosen.push(c);
        }
    }
    chosen.sort_unstable();
    let (lo, hi) = cfg.reshape_w_range;
    chosen
        .into_iter()
        .map(|j| Reshape {
            t1: extrema[j - 1].index,
            t2: extrema[j].index,
            t3: extrema[j + 1].index,
            w: if hi > lo { r.random_range(lo..=hi) } else { lo },
        })
        .collect()
}

/// Reshapes extrema of every sensor's DHF estimate independently.
pub fn reshape_recording(rec: &Recording, cfg: &PipelineConfig, seed: u64) -> Result<Recording> {
    let est = rec.dhf_estimate.as_ref().ok_or_else(|| invalid("reshaping needs a DHF estimate"))?;
    let mut out = est.clone();
    for s in 0..est.rows() {
        let mut r = rng::stream(seed, &[0x7265_7368, rec.scene_id, s as u64]);
        let extrema = detect_extrema(est.row(s), cfg.extremum_floor);
        let picks = select_reshapes(&extrema, cfg, &mut r);
        let y = reshape_extrema(est.row(s), &picks)?;
        out.row_mut(s).copy_from_slice(&y);
    }
    let mut rec = rec.clone();
    rec.dhf_estimate = Some(out);
    Ok(rec)
}

/// Training recordings with DHF estimates: each original, one warped copy per
/// configured factor, and one reshaped copy.
pub fn augment_recordings(
    recordings: &[Recording],
    constants: &DynamicsConstants,
    cfg: &PipelineConfig,
    seed: u64,
    warp: bool,
    reshape: bool,
) -> Result<Vec<Recording>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for rec in recordings {
        let base = estimate_dhf(rec, constants, cfg)?;
        if warp {
            for &a in &cfg.warp_factors {
                out.push(time_warp(&base, a)?);
            }
        }
        if reshape {
            out.push(reshape_recording(&base, cfg, seed)?);
        }
        out.push(base);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::sin;
    use core::f64::consts::PI;

    #[test]
    fn unit_warp_is_identity() {
        let x: Vec<f64> = (0..97).map(|i| sin(0.2 * i as f64)).collect();
        assert_eq!(warp_series(&x, 1.0), x);
        assert_eq!(warp_series(&x, 2.0).len(), 194);
        assert_eq!(warp_series(&x, 0.8).len(), 78);
    }

    #[test]
    fn sinusoid_extrema_at_quarter_periods() {
        let p = 40usize;
        let x: Vec<f64> = (0..3 * p).map(|i| sin(2.0 * PI * i as f64 / p as f64)).collect();
        let e = detect_extrema(&x, 0.05);
        assert_eq!(e.len(), 6);
        for (j, ex) in e.iter().enumerate() {
            let want = p / 4 + j * p / 2;
            assert!(ex.index.abs_diff(want) <= 1, "extremum {j} at {} want {want}", ex.index);
            let kind = if j % 2 == 0 { ExtremumKind::Peak } else { ExtremumKind::Trough };
            assert_eq!(ex.kind, kind);
        }
    }

    #[test]
    fn monotone_and_flat_series_have_no_extrema() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.3).collect();
        assert!(detect_extrema(&x, 0.05).is_empty());
        assert!(detect_extrema(&[1.0; 20], 0.05).is_empty());
    }

    #[test]
    fn plateau_resolves_to_first_index() {
        let x = [0.0, 1.0, 3.0, 3.0, 3.0, 1.0, 0.0, 2.0, 0.0];
        let e = detect_extrema(&x, 0.05);
        assert_eq!(e[0], Extremum { index: 2, kind: ExtremumKind::Peak });
    }

    #[test]
    fn small_wiggles_are_ignored() {
        let x: Vec<f64> = (0..200).map(|i| sin(2.0 * PI * i as f64 / 100.0) + 0.02 * sin(2.0 * PI * i as f64 / 7.0)).collect();
        let e = detect_extrema(&x, 0.05);
        let kinds: Vec<ExtremumKind> = e.iter().map(|x| x.kind).collect();
        assert_eq!(kinds, [ExtremumKind::Peak, ExtremumKind::Trough, ExtremumKind::Peak, ExtremumKind::Trough]);
        assert!(e.iter().zip([25, 75, 125, 175]).all(|(x, c)| x.index.abs_diff(c) <= 4));
    }

    #[test]
    fn reshape_formula_examples() {
        let x = [0.0, 0.5, 1.0, 0.4, -0.3, 0.2];
        let same = reshape_extrema(&x, &[Reshape { t1: 0, t2: 2, t3: 4, w: 1.0 }]).unwrap();
        assert_eq!(same, x);
        let y = reshape_extrema(&x, &[Reshape { t1: 0, t2: 2, t3: 4, w: 2.0 }]).unwrap();
        assert_eq!(y[2], 2.0);
        assert_eq!(y[0], x[0]);
        assert_eq!(y[4], x[4]);
        assert_eq!(y[5], x[5]);
        // Halfway between t2 and t3 the offset has faded to half.
        assert!((y[3] - (0.4 + 0.5 * 1.0)).abs() < 1e-15);
        assert!(matches!(
            reshape_extrema(&x, &[Reshape { t1: 2, t2: 1, t3: 4, w: 1.2 }]),
            Err(Error::NonMonotoneExtrema { .. })
        ));
    }

    #[test]
    fn selections_skip_ends_and_neighbours() {
        let ex: Vec<Extremum> = (0..60)
            .map(|i| Extremum { index: 10 * i + 5, kind: if i % 2 == 0 { ExtremumKind::Peak } else { ExtremumKind::Trough } })
            .collect();
        let cfg = PipelineConfig { reshape_fraction: 0.3, ..Default::default() };
        let mut r = rng::stream(1, &[]);
        let picks = select_reshapes(&ex, &cfg, &mut r);
        assert_eq!(picks.len(), 17);
        for w in picks.windows(2) {
            assert!(w[1].t1 >= w[0].t3);
        }
        assert!(picks.iter().all(|p| p.t2 != ex[0].index && p.t2 != ex[59].index));
        assert!(picks.iter().all(|p| (0.5..=1.5).contains(&p.w)));
    }
}
