use std::f64::consts::PI;

use pirdfl_core::math::relative_rms;
use pirdfl_core::nn::Tensor;
use pirdfl_core::pipeline::{
    detect_extrema, estimate_dhf, inverse_filter, normalize, reshape_extrema, time_warp, warp_series, ExtremumKind,
    PipelineConfig, Reshape,
};
use pirdfl_core::radiometry::{
    sensor_dynamics, simulate_scene, Arena, DynamicsConstants, NoiseConfig, PersonBody, Scene, ScenePerson,
    SceneTemplate, Trajectory,
};
use pirdfl_core::{Point2, SensorModel};
use proptest::prelude::*;

/// Keeps DFT bins up to `cutoff` Hz (naive DFT; series are short).
fn band_limit(x: &[f64], cutoff: f64, fs: f64) -> Vec<f64> {
    let n = x.len();
    let kmax = (cutoff * n as f64 / fs).floor() as usize;
    let mut out = vec![0.0; n];
    for k in 0..=kmax.min(n / 2) {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in x.iter().enumerate() {
            let a = 2.0 * PI * (k * t) as f64 / n as f64;
            re += v * a.cos();
            im -= v * a.sin();
        }
        let w = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
        for (t, o) in out.iter_mut().enumerate() {
            let a = 2.0 * PI * (k * t) as f64 / n as f64;
            *o += w * (re * a.cos() - im * a.sin()) / n as f64;
        }
    }
    out
}

fn central(x: &[f64]) -> &[f64] {
    let n = x.len();
    &x[n / 10..n - n / 10]
}

#[test]
fn inverse_filter_recovers_band_limited_simulated_dhf() {
    let t = SceneTemplate { duration: 20.0, noise: NoiseConfig::NONE, occlusion: false, ..Default::default() };
    let rec = simulate_scene(&t.generate(5, 1, 21)).unwrap();
    let k = DynamicsConstants::default();
    let cfg = PipelineConfig::default();
    let mut worst: f64 = 0.0;
    for s in 0..rec.n_sensors() {
        let x = band_limit(rec.person_dhf[0].row(s), 5.0, rec.sample_rate);
        if x.iter().all(|v| v.abs() < 1e-9) {
            continue;
        }
        let v = sensor_dynamics(&x, &k).unwrap();
        let vt = Tensor::from_vec(&[1, v.len()], v).unwrap();
        let y = inverse_filter(&vt, &k, &cfg).unwrap();
        worst = worst.max(relative_rms(central(y.row(0)), central(&x)));
    }
    assert!(worst < 0.05, "round-trip error {worst}");
}

/// One walker on a fixed three-leg path at constant speed, seen by the corner sensors.
fn walker_scene(speed: f64, duration: f64) -> Scene {
    let arena = Arena::default();
    let sensors = arena.corners().iter().map(|c| SensorModel::facing(*c, arena.center())).collect();
    let waypoints = vec![Point2::new(1.0, 1.5), Point2::new(6.0, 2.5), Point2::new(5.0, 6.0), Point2::new(1.5, 4.0)];
    let trajectory = Trajectory { speeds: vec![speed; waypoints.len() - 1], waypoints, start_time: 0.0 };
    Scene {
        id: 0,
        arena,
        sensors,
        persons: vec![ScenePerson { trajectory, body: PersonBody::default() }],
        heat_sources: Vec::new(),
        noise: NoiseConfig::NONE,
        env_temp: 293.0,
        occlusion: false,
        duration,
        rng_seed: 0,
    }
}

/// Compressing a slow walk in time should look like the same walk taken faster.
/// Returns the relative RMS difference of the raw and the inverse-filtered DHF.
fn warp_cross_check(a: f64) -> (f64, f64) {
    let v = 0.8;
    let slow = simulate_scene(&walker_scene(v, 20.0)).unwrap();
    let fast = simulate_scene(&walker_scene(v / a, 20.0 * a)).unwrap();
    let k = DynamicsConstants::default();
    let cfg = PipelineConfig::default();
    let warped = time_warp(&estimate_dhf(&slow, &k, &cfg).unwrap(), a).unwrap();
    let fast = estimate_dhf(&fast, &k, &cfg).unwrap();
    let n = warped.n_samples().min(fast.n_samples());
    let cat = |t: &Tensor| -> Vec<f64> { (0..t.rows()).flat_map(|r| t.row(r)[..n].to_vec()).collect() };
    let raw = relative_rms(&cat(&warped.dhf), &cat(&fast.dhf));
    let est = relative_rms(&cat(warped.dhf_estimate.as_ref().unwrap()), &cat(fast.dhf_estimate.as_ref().unwrap()));
    (raw, est)
}

#[test]
fn warped_walk_matches_faster_walk() {
    let (raw, est) = warp_cross_check(0.8);
    println!("a=0.8 raw dhf rel rms {raw:.4}, estimated dhf rel rms {est:.4}");
    assert!(est < 0.10, "estimated DHF differs by {est}");
    let (raw, est) = warp_cross_check(1.2);
    println!("a=1.2 raw dhf rel rms {raw:.4}, estimated dhf rel rms {est:.4}");
    assert!(est < 0.10, "estimated DHF differs by {est}");
}

#[test]
fn doubling_warp_doubles_the_sample_count() {
    let rec = simulate_scene(&walker_scene(1.0, 5.0)).unwrap();
    let w = time_warp(&rec, 2.0).unwrap();
    assert_eq!(w.n_samples(), 2 * rec.n_samples());
    assert_eq!(w.positions[0].len(), 2 * rec.n_samples());
    assert!(time_warp(&rec, 0.0).is_err());
    assert!(time_warp(&rec, -1.0).is_err());
    let same = time_warp(&rec, 1.0).unwrap();
    assert_eq!(same, rec);
}

/// Windowed brute-force scan: index `i` is a candidate peak when it is the first
/// maximum of `x[i-w..=i+w]` (troughs alike); candidates are kept when the swing to
/// the neighbouring candidates (or the series ends) reaches `h` on both sides.
fn brute_extrema(x: &[f64], w: usize, floor: f64) -> Vec<(usize, ExtremumKind)> {
    let n = x.len();
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let h = floor * (hi - lo);
    let mut cand = Vec::new();
    for i in 1..n - 1 {
        let a = i.saturating_sub(w);
        let b = (i + w).min(n - 1);
        let win = &x[a..=b];
        let first_max = win.iter().enumerate().fold(0, |m, (j, v)| if *v > win[m] { j } else { m });
        let first_min = win.iter().enumerate().fold(0, |m, (j, v)| if *v < win[m] { j } else { m });
        if a + first_max == i {
            cand.push((i, ExtremumKind::Peak));
        } else if a + first_min == i {
            cand.push((i, ExtremumKind::Trough));
        }
    }
    let mut out = Vec::new();
    for (j, &(i, kind)) in cand.iter().enumerate() {
        let prev = if j == 0 { 0 } else { cand[j - 1].0 };
        let next = if j + 1 == cand.len() { n - 1 } else { cand[j + 1].0 };
        let (left, right) = match kind {
            ExtremumKind::Peak => (
                x[i] - x[prev..i].iter().cloned().fold(f64::INFINITY, f64::min),
                x[i] - x[i + 1..=next].iter().cloned().fold(f64::INFINITY, f64::min),
            ),
            ExtremumKind::Trough => (
                x[prev..i].iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x[i],
                x[i + 1..=next].iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x[i],
            ),
        };
        if left >= h && right >= h {
            out.push((i, kind));
        }
    }
    out
}

fn smooth_series() -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec((0.1f64..1.0, 0.2f64..1.0, 0.0f64..(2.0 * PI)), 1..4), 200usize..600).prop_map(
        |(tones, n)| {
            (0..n)
                .map(|i| {
                    let t = i as f64 / 60.0;
                    tones.iter().map(|(f, a, p)| a * (2.0 * PI * f * t + p).sin()).sum()
                })
                .collect()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn extrema_match_windowed_scan(x in smooth_series()) {
        let floor = 0.05;
        let brute = brute_extrema(&x, 5, floor);
        // The scan and the zigzag agree whenever no interior swing falls below the floor.
        let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let h = floor * (hi - lo);
        let all = brute_extrema(&x, 5, 0.0);
        prop_assume!(all.windows(2).all(|p| (x[p[0].0] - x[p[1].0]).abs() >= 2.0 * h));
        prop_assume!(all.windows(2).all(|p| p[0].1 != p[1].1));
        let got: Vec<(usize, ExtremumKind)> = detect_extrema(&x, floor).iter().map(|e| (e.index, e.kind)).collect();
        prop_assert_eq!(got, brute);
    }

    #[test]
    fn normalize_is_idempotent(data in prop::collection::vec(-5.0f64..5.0, 40), scale in 0.01f64..100.0) {
        let x = Tensor::from_vec(&[4, 10], data).unwrap();
        let Ok(once) = normalize(&x) else { return Ok(()) };
        let twice = normalize(&once).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-12));
        }
        let mut scaled = x.clone();
        scaled.scale(scale);
        let s = normalize(&scaled).unwrap();
        for (a, b) in once.data().iter().zip(s.data()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn warp_then_unwarp_is_nearly_identity(
        tones in prop::collection::vec((0.1f64..2.0, 0.0f64..(2.0 * PI)), 1..4),
        a in 0.7f64..1.4,
    ) {
        let x: Vec<f64> = (0..600).map(|i| tones.iter().map(|(f, p)| (2.0 * PI * f * i as f64 / 60.0 + p).sin()).sum()).collect();
        let back = warp_series(&warp_series(&x, a), 1.0 / a);
        // Stay clear of the clamped tail where the compressed series ran out.
        let n = back.len().min(x.len()) - 3;
        prop_assert!(relative_rms(&back[..n], &x[..n]) < 0.02);
    }

    #[test]
    fn reshape_is_local(
        x in prop::collection::vec(-3.0f64..3.0, 20..80),
        picks in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
        w in 0.5f64..1.5,
    ) {
        let n = x.len();
        let mut idx = [picks.0, picks.1, picks.2].map(|p| (p * (n - 1) as f64) as usize);
        idx.sort_unstable();
        prop_assume!(idx[0] < idx[1] && idx[1] < idx[2]);
        let r = Reshape { t1: idx[0], t2: idx[1], t3: idx[2], w };
        let y = reshape_extrema(&x, &[r]).unwrap();
        for i in (0..r.t1).chain(r.t3 + 1..n) {
            prop_assert_eq!(y[i], x[i]);
        }
        prop_assert_eq!(y[r.t1], x[r.t1]);
        prop_assert_eq!(y[r.t3], x[r.t3]);
        let want = w * (x[r.t2] - x[r.t1]) + x[r.t1];
        prop_assert!((y[r.t2] - want).abs() <= 1e-12 * want.abs().max(1.0));
        let bad = Reshape { t1: r.t2, t2: r.t1, t3: r.t3, w };
        prop_assert!(reshape_extrema(&x, &[bad]).is_err());
    }
}
