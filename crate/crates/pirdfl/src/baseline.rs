//! SCICA separation baseline: per-channel separation of test windows and
//! the spectral-overlap sweep on synthetic two-walker windows.

use anyhow::Result;
use pirdfl_core::math::mean;
use pirdfl_core::models::Pirnet;
use pirdfl_core::pipeline::SignalWindow;
use pirdfl_core::radiometry::{simulate_scene, Arena, NoiseConfig, PersonBody, Recording, Scene, ScenePerson, Trajectory};
use pirdfl_core::scica::{matched_correlation, scica_separate, ScicaConfig};
use pirdfl_core::{rng, Point2, SensorModel};
use rand::Rng;
use rayon::prelude::*;

use crate::config::{CountSource, ExperimentConfig};
use crate::harness;

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSeparation {
    pub scene_id: u64,
    pub start_time: f64,
    pub persons: usize,
    pub n_sources: usize,
    /// Matched correlation per sensor channel; `None` where no person reached the
    /// channel or FastICA did not converge.
    pub channels: Vec<Option<f64>>,
    /// Channels where FastICA did not converge.
    pub unconverged: usize,
}

impl WindowSeparation {
    /// Mean over the channels that carry a person signal.
    pub fn mean(&self) -> Option<f64> {
        let v: Vec<f64> = self.channels.iter().flatten().copied().collect();
        (!v.is_empty()).then(|| mean(&v))
    }
}

/// Separates every sensor channel of one window into `n_sources` series and
/// scores them against the noise-free per-person DHF of that channel.
pub fn separate_window(w: &SignalWindow, n_sources: usize, cfg: &ScicaConfig) -> Result<WindowSeparation> {
    let dhf = w.dhf.as_ref().unwrap_or(&w.voltages);
    let mut channels = Vec::with_capacity(dhf.rows());
    let mut unconverged = 0;
    for s in 0..dhf.rows() {
        let truth: Vec<Vec<f64>> = w.person_dhf.iter().map(|p| p.row(s).to_vec()).collect();
        if n_sources == 0 || truth.iter().all(|t| t.iter().all(|v| *v == t[0])) {
            channels.push(None);
            continue;
        }
        match scica_separate(dhf.row(s), n_sources, cfg) {
            Ok(sep) => channels.push(matched_correlation(&sep.sources, &truth)),
            Err(pirdfl_core::Error::NotConverged { .. }) => {
                unconverged += 1;
                channels.push(None);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(WindowSeparation {
        scene_id: w.scene_id,
        start_time: w.start_time,
        persons: w.count,
        n_sources,
        channels,
        unconverged,
    })
}

/// Picks up to `max` windows with at least one person, spread evenly over the classes.
fn pick_windows(ws: &[SignalWindow], max_persons: usize, max: usize) -> Vec<&SignalWindow> {
    let per_class = max / max_persons.max(1);
    (1..=max_persons).flat_map(|m| ws.iter().filter(move |w| w.count == m).take(per_class)).collect()
}

/// Baseline on test recordings; the source count comes from the labels or the counting network.
pub fn evaluate_separation(
    cfg: &ExperimentConfig,
    test_recs: &[Recording],
    counter: Option<&Pirnet>,
) -> Result<Vec<WindowSeparation>> {
    let mut c = cfg.clone();
    c.switches.preprocess = true;
    let prepared = harness::prepare_recordings(&c, test_recs, false)?;
    let ws = harness::windows(cfg, &prepared, cfg.data.eval_hop)?;
    let picked = pick_windows(&ws, cfg.data.max_persons, cfg.baseline.max_windows);
    let source = cfg.baseline.count_source;
    picked
        .par_iter()
        .map(|w| {
            let n = match (source, counter) {
                (CountSource::CountingNet, Some(model)) => model.infer(w.input())?.count,
                (CountSource::CountingNet, None) => anyhow::bail!("counting-net source needs a trained model"),
                (CountSource::GroundTruth, _) => w.count,
            };
            separate_window(w, n, &cfg.baseline.scica)
        })
        .collect()
}

/// One sensor at the origin facing the arena centre and two walkers crossing
/// its beams on arcs at a common range in opposite directions. The range and
/// the start angles are drawn from `seed`.
pub fn two_walker_scene(speeds: (f64, f64), seed: u64) -> Scene {
    let arena = Arena::default();
    let sensor = SensorModel::facing(Point2::new(0.0, 0.0), arena.center());
    let mut r = rng::stream(seed, &[0x3277]);
    let radius = r.random_range(3.0..4.0);
    let arc = |speed: f64, from: f64, to: f64| {
        let waypoints: Vec<Point2> = (0..=20)
            .map(|k| {
                let a = (from + (to - from) * k as f64 / 20.0).to_radians();
                Point2::new(radius * a.cos(), radius * a.sin())
            })
            .collect();
        Trajectory { speeds: vec![speed; 20], waypoints, start_time: 0.0 }
    };
    let o1 = r.random_range(0.0..20.0);
    let o2 = r.random_range(0.0..20.0);
    let persons = vec![
        ScenePerson { trajectory: arc(speeds.0, 5.0 + o1, 85.0), body: PersonBody::default() },
        ScenePerson { trajectory: arc(speeds.1, 85.0 - o2, 5.0), body: PersonBody::default() },
    ];
    Scene {
        id: seed,
        arena,
        sensors: vec![sensor],
        persons,
        heat_sources: Vec::new(),
        noise: NoiseConfig::NONE,
        env_temp: 293.0,
        occlusion: false,
        duration: 2.5,
        rng_seed: seed,
    }
}

/// Cosine similarity of the two walkers' magnitude spectra (DC removed).
pub fn spectral_overlap(a: &[f64], b: &[f64]) -> f64 {
    let spec = |x: &[f64]| -> Vec<f64> {
        let n = x.len();
        let mu = mean(x);
        (1..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, v) in x.iter().enumerate() {
                    let ang = 2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                    re += (v - mu) * ang.cos();
                    im -= (v - mu) * ang.sin();
                }
                re.hypot(im)
            })
            .collect()
    };
    let (sa, sb) = (spec(a), spec(b));
    let dot: f64 = sa.iter().zip(&sb).map(|(x, y)| x * y).sum();
    let na: f64 = sa.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = sb.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapPoint {
    pub speeds: (f64, f64),
    pub overlap: f64,
    pub correlation: f64,
    /// Trials that separated without error.
    pub trials: usize,
}

/// Mean matched correlation and spectral overlap per speed pair.
pub fn overlap_sweep(cfg: &ExperimentConfig) -> Result<Vec<OverlapPoint>> {
    let b = &cfg.baseline;
    b.overlap_speeds
        .iter()
        .enumerate()
        .map(|(i, &speeds)| {
            let trials: Vec<Option<(f64, f64)>> = (0..b.overlap_trials)
                .into_par_iter()
                .map(|t| -> Result<Option<(f64, f64)>> {
                    let seed = rng::derive_seed(cfg.seed, &[0x6f76_6c70, i as u64, t as u64]);
                    let rec = simulate_scene(&two_walker_scene(speeds, seed))?;
                    let truth: Vec<Vec<f64>> = rec.person_dhf.iter().map(|p| p.row(0).to_vec()).collect();
                    let overlap = spectral_overlap(&truth[0], &truth[1]);
                    let Ok(sep) = scica_separate(rec.dhf.row(0), 2, &b.scica) else { return Ok(None) };
                    Ok(matched_correlation(&sep.sources, &truth).map(|c| (overlap, c)))
                })
                .collect::<Result<_>>()?;
            let ok: Vec<(f64, f64)> = trials.into_iter().flatten().collect();
            Ok(OverlapPoint {
                speeds,
                overlap: mean(&ok.iter().map(|p| p.0).collect::<Vec<_>>()),
                correlation: mean(&ok.iter().map(|p| p.1).collect::<Vec<_>>()),
                trials: ok.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_series_overlap_fully() {
        let x: Vec<f64> = (0..150).map(|i| (0.3 * i as f64).sin()).collect();
        assert!((spectral_overlap(&x, &x) - 1.0).abs() < 1e-12);
        let y: Vec<f64> = (0..150).map(|i| (2.0 * std::f64::consts::PI * 40.0 * i as f64 / 150.0).sin()).collect();
        let z: Vec<f64> = (0..150).map(|i| (2.0 * std::f64::consts::PI * 5.0 * i as f64 / 150.0).sin()).collect();
        assert!(spectral_overlap(&y, &z) < 1e-9);
    }

    #[test]
    fn two_walker_scenes_are_valid_and_seeded() {
        let a = two_walker_scene((0.6, 1.4), 1);
        assert!(a.validate().is_ok());
        assert_eq!(a, two_walker_scene((0.6, 1.4), 1));
        assert_ne!(a, two_walker_scene((0.6, 1.4), 2));
    }
}
