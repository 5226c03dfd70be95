//! Ground-truth scenes and their simulated sensor recordings.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::{dhf_contributions, sensor_dynamics, HeatSource, PersonState, DEFAULT_ENV_TEMP};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Point2, SensorModel};
use crate::math::{exp, floor, interp, powi, round, sqrt};
use crate::nn::Tensor;
use crate::pipeline::SignalWindow;
use crate::rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Largest number of simultaneously walking persons handled by the models.
pub const MAX_PERSONS: usize = 3;

/// Axis-aligned arena `[0, width] x [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Arena {
    pub width: f64,
    pub height: f64,
}

impl Default for Arena {
    fn default() -> Self {
        Self { width: 7.0, height: 7.0 }
    }
}

impl Arena {
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.width / 2.0, self.height / 2.0)
    }

    pub fn corners(&self) -> [Point2; 4] {
        [
            Point2::new(0.0, 0.0),
            Point2::new(self.width, 0.0),
            Point2::new(self.width, self.height),
            Point2::new(0.0, self.height),
        ]
    }
}

/// Physical constants of a walking person.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PersonBody {
    pub effective_area: f64,
    pub surface_temp: f64,
    pub radius: f64,
}

impl Default for PersonBody {
    fn default() -> Self {
        Self { effective_area: 0.6, surface_temp: 305.0, radius: 0.25 }
    }
}

impl PersonBody {
    pub fn at(&self, position: Point2) -> PersonState {
        PersonState {
            position,
            effective_area: self.effective_area,
            surface_temp: self.surface_temp,
            radius: self.radius,
        }
    }
}

/// Piecewise-linear walk at constant speed per leg.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Trajectory {
    pub waypoints: Vec<Point2>,
    /// Speed on each leg, m/s; one entry per consecutive waypoint pair.
    pub speeds: Vec<f64>,
    pub start_time: f64,
}

impl Trajectory {
    pub fn validate(&self, arena: &Arena) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(invalid("trajectory needs at least one waypoint"));
        }
        if self.speeds.len() + 1 != self.waypoints.len() {
            return Err(invalid("trajectory needs one speed per leg"));
        }
        if self.speeds.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(invalid("trajectory speeds must be positive"));
        }
        if let Some(p) = self.waypoints.iter().find(|p| !arena.contains(**p)) {
            return Err(Error::OutsideArena { x: p.x, y: p.y });
        }
        Ok(())
    }

    /// Cumulative arrival time at every waypoint.
    fn arrival_times(&self) -> Vec<f64> {
        let mut t = self.start_time;
        let mut out = Vec::with_capacity(self.waypoints.len());
        out.push(t);
        for (w, s) in self.waypoints.windows(2).zip(&self.speeds) {
            t += w[0].distance(w[1]) / s;
            out.push(t);
        }
        out
    }

    pub fn position_at(&self, t: f64) -> Point2 {
        let times = self.arrival_times();
        position_on(&self.waypoints, &times, t, &mut 0)
    }

    pub fn end_time(&self) -> f64 {
        *self.arrival_times().last().unwrap_or(&self.start_time)
    }
}

/// Position along a timed polyline; `cursor` remembers the current leg for monotone queries.
fn position_on(waypoints: &[Point2], times: &[f64], t: f64, cursor: &mut usize) -> Point2 {
    if t <= times[0] {
        return waypoints[0];
    }
    while *cursor + 1 < times.len() && times[*cursor + 1] <= t {
        *cursor += 1;
    }
    if *cursor + 1 >= times.len() {
        return waypoints[waypoints.len() - 1];
    }
    let (t0, t1) = (times[*cursor], times[*cursor + 1]);
    let frac = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
    waypoints[*cursor].lerp(waypoints[*cursor + 1], frac)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ScenePerson {
    pub trajectory: Trajectory,
    pub body: PersonBody,
}

/// Additive DHF noise: white Gaussian plus low-pass drift (wind and other
/// slow environmental disturbances).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct NoiseConfig {
    pub gaussian_std: f64,
    pub drift_std: f64,
    /// Corner frequency of the drift process, Hz.
    pub drift_cutoff: f64,
}

impl NoiseConfig {
    pub const NONE: NoiseConfig = NoiseConfig { gaussian_std: 0.0, drift_std: 0.0, drift_cutoff: 0.2 };

    /// Peak DHF of a default person in a beam 4 m from the sensor at the default
    /// environment temperature; noise presets are expressed relative to it.
    pub fn reference_peak() -> f64 {
        let body = PersonBody::default();
        body.effective_area * (powi(body.surface_temp, 4) - powi(DEFAULT_ENV_TEMP, 4)) / 16.0
    }

    /// Low-drift preset (controlled indoor environment).
    pub fn indoor() -> Self {
        let peak = Self::reference_peak();
        Self { gaussian_std: 0.02 * peak, drift_std: 0.03 * peak, drift_cutoff: 0.2 }
    }

    /// High-drift preset (uncontrolled outdoor environment).
    pub fn outdoor() -> Self {
        let peak = Self::reference_peak();
        Self { gaussian_std: 0.02 * peak, drift_std: 0.10 * peak, drift_cutoff: 0.2 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gaussian_std < 0.0 || self.drift_std < 0.0 || self.drift_cutoff < 0.0 {
            return Err(invalid("noise parameters must be non-negative"));
        }
        Ok(())
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::indoor()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Scene {
    pub id: u64,
    pub arena: Arena,
    pub sensors: Vec<SensorModel>,
    pub persons: Vec<ScenePerson>,
    pub heat_sources: Vec<HeatSource>,
    pub noise: NoiseConfig,
    pub env_temp: f64,
    pub occlusion: bool,
    /// Seconds.
    pub duration: f64,
    pub rng_seed: u64,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if self.sensors.is_empty() {
            return Err(invalid("scene needs at least one sensor"));
        }
        if self.persons.len() > MAX_PERSONS {
            return Err(invalid("scene has more persons than the supported maximum"));
        }
        if !(self.duration > 0.0) {
            return Err(invalid("scene duration must be positive"));
        }
        let rate = self.sensors[0].dynamics.sample_rate;
        for s in &self.sensors {
            s.validate()?;
            if s.dynamics.sample_rate != rate {
                return Err(invalid("all sensors must share one sample rate"));
            }
        }
        for p in &self.persons {
            p.trajectory.validate(&self.arena)?;
        }
        self.noise.validate()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sensors.first().map_or(60.0, |s| s.dynamics.sample_rate)
    }

    pub fn n_samples(&self) -> usize {
        round(self.duration * self.sample_rate()) as usize
    }
}

/// Simulated series of one scene, all sampled at `sample_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub scene_id: u64,
    pub sample_rate: f64,
    /// Sensor voltages, sensors x samples.
    pub voltages: Tensor,
    /// Noisy DHF fed to the sensor dynamics, sensors x samples.
    pub dhf: Tensor,
    /// DHF estimate recovered from the voltages, when computed.
    pub dhf_estimate: Option<Tensor>,
    /// Noise-free per-person contributions (after occlusion), one sensors x samples block per person.
    pub person_dhf: Vec<Tensor>,
    /// Ground-truth positions, one series per person.
    pub positions: Vec<Vec<Point2>>,
}

impl Recording {
    pub fn n_samples(&self) -> usize {
        self.voltages.cols()
    }

    pub fn n_sensors(&self) -> usize {
        self.voltages.rows()
    }

    pub fn n_persons(&self) -> usize {
        self.positions.len()
    }
}

/// Simulates sensor DHF and voltage series for a scene.
pub fn simulate_scene(scene: &Scene) -> Result<Recording> {
    scene.validate()?;
    let fs = scene.sample_rate();
    let n = scene.n_samples();
    let n_sensors = scene.sensors.len();
    let n_persons = scene.persons.len();

    let mut positions: Vec<Vec<Point2>> = vec![Vec::with_capacity(n); n_persons];
    for (person, out) in scene.persons.iter().zip(positions.iter_mut()) {
        let times = person.trajectory.arrival_times();
        let mut cursor = 0;
        for i in 0..n {
            out.push(position_on(&person.trajectory.waypoints, &times, i as f64 / fs, &mut cursor));
        }
    }

    let mut dhf = Tensor::zeros(&[n_sensors, n]);
    let mut person_dhf = vec![Tensor::zeros(&[n_sensors, n]); n_persons];
    let mut states: Vec<PersonState> = scene.persons.iter().map(|p| p.body.at(Point2::default())).collect();
    for i in 0..n {
        for (state, series) in states.iter_mut().zip(&positions) {
            state.position = series[i];
        }
        for (s, sensor) in scene.sensors.iter().enumerate() {
            let c = dhf_contributions(&states, &scene.heat_sources, sensor, scene.env_temp, scene.occlusion);
            dhf.set(s, i, c.total());
            for (pd, v) in person_dhf.iter_mut().zip(&c.persons) {
                pd.set(s, i, *v);
            }
        }
    }

    add_noise(&mut dhf, &scene.noise, fs, scene.rng_seed);

    let mut voltages = Tensor::zeros(&[n_sensors, n]);
    for s in 0..n_sensors {
        let v = sensor_dynamics(dhf.row(s), &scene.sensors[s].dynamics)?;
        voltages.row_mut(s).copy_from_slice(&v);
    }

    Ok(Recording {
        scene_id: scene.id,
        sample_rate: fs,
        voltages,
        dhf,
        dhf_estimate: None,
        person_dhf,
        positions,
    })
}

fn add_noise(dhf: &mut Tensor, noise: &NoiseConfig, fs: f64, seed: u64) {
    if noise.gaussian_std == 0.0 && noise.drift_std == 0.0 {
        return;
    }
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let alpha = exp(-2.0 * core::f64::consts::PI * noise.drift_cutoff / fs);
    let innovation = sqrt(1.0 - alpha * alpha);
    for s in 0..dhf.rows() {
        let mut white = rng::stream(seed, &[0x6e6f_6973, s as u64, 0]);
        let mut slow = rng::stream(seed, &[0x6e6f_6973, s as u64, 1]);
        let mut drift = noise.drift_std * std_normal.sample(&mut slow);
        for v in dhf.row_mut(s) {
            let w = noise.gaussian_std * std_normal.sample(&mut white);
            *v += w + drift;
            drift = alpha * drift + innovation * noise.drift_std * std_normal.sample(&mut slow);
        }
    }
}

/// Window start indices: `floor(i * hop)` for every window that fits.
pub fn window_starts(n_samples: usize, window_len: usize, hop_samples: f64) -> Vec<usize> {
    let mut out = Vec::new();
    if window_len == 0 || hop_samples <= 0.0 {
        return out;
    }
    let mut i = 0usize;
    loop {
        let start = floor(i as f64 * hop_samples + 1e-9) as usize;
        if start + window_len > n_samples {
            return out;
        }
        out.push(start);
        i += 1;
    }
}

/// Cuts recordings into labelled windows of `window` seconds every `hop` seconds.
pub fn window_dataset(recordings: &[Recording], window: f64, hop: f64, segments: usize) -> Result<Vec<SignalWindow>> {
    let mut out = Vec::new();
    for rec in recordings {
        let fs = rec.sample_rate;
        let d = round(window * fs) as usize;
        if segments == 0 || d % segments != 0 {
            return Err(invalid("segment count must divide the window length"));
        }
        if rec.n_samples() < d {
            return Err(invalid("recording shorter than one window"));
        }
        for start in window_starts(rec.n_samples(), d, hop * fs) {
            out.push(cut_window(rec, start, d, segments));
        }
    }
    Ok(out)
}

pub(crate) fn cut_window(rec: &Recording, start: usize, d: usize, segments: usize) -> SignalWindow {
    let slice = |t: &Tensor| t.columns(start, start + d);
    let seg_len = d / segments;
    let positions = rec
        .positions
        .iter()
        .map(|series| {
            let xs: Vec<f64> = series.iter().map(|p| p.x).collect();
            let ys: Vec<f64> = series.iter().map(|p| p.y).collect();
            (0..segments)
                .map(|k| {
                    let centre = (start + k * seg_len) as f64 + seg_len as f64 / 2.0;
                    Point2::new(interp(&xs, centre), interp(&ys, centre))
                })
                .collect()
        })
        .collect();
    SignalWindow {
        voltages: slice(&rec.voltages),
        dhf: rec.dhf_estimate.as_ref().map(slice),
        count: rec.n_persons(),
        positions,
        person_dhf: rec.person_dhf.iter().map(slice).collect(),
        scene_id: rec.scene_id,
        start_time: start as f64 / rec.sample_rate,
    }
}

/// Recipe for random scenes: random-waypoint walkers in a fixed deployment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SceneTemplate {
    pub arena: Arena,
    pub sensors: Vec<SensorModel>,
    pub body: PersonBody,
    /// Per-leg walking speed range, m/s.
    pub speed_range: (f64, f64),
    /// Walkers keep at least this distance from the arena walls, m.
    pub edge_margin: f64,
    /// Environment temperature drawn uniformly per scene, kelvin.
    pub env_temp_range: (f64, f64),
    pub noise: NoiseConfig,
    pub heat_sources: Vec<HeatSource>,
    pub occlusion: bool,
    pub duration: f64,
}

impl Default for SceneTemplate {
    fn default() -> Self {
        let arena = Arena::default();
        let sensors = arena.corners().iter().map(|c| SensorModel::facing(*c, arena.center())).collect();
        Self {
            arena,
            sensors,
            body: PersonBody::default(),
            speed_range: (0.5, 1.5),
            edge_margin: 0.5,
            env_temp_range: (288.0, 300.0),
            noise: NoiseConfig::default(),
            heat_sources: Vec::new(),
            occlusion: true,
            duration: 60.0,
        }
    }
}

impl SceneTemplate {
    /// Draws a scene with `n_persons` random-waypoint walkers.
    pub fn generate(&self, id: u64, n_persons: usize, seed: u64) -> Scene {
        let mut r = rng::stream(seed, &[0x7363_656e, id]);
        let (lo, hi) = self.env_temp_range;
        let env_temp = if hi > lo { r.random_range(lo..hi) } else { lo };
        let persons = (0..n_persons).map(|_| ScenePerson { trajectory: self.random_walk(&mut r), body: self.body }).collect();
        Scene {
            id,
            arena: self.arena,
            sensors: self.sensors.clone(),
            persons,
            heat_sources: self.heat_sources.clone(),
            noise: self.noise,
            env_temp,
            occlusion: self.occlusion,
            duration: self.duration,
            rng_seed: rng::derive_seed(seed, &[0x6e6f_6973, id]),
        }
    }

    fn random_point(&self, r: &mut rng::Rng) -> Point2 {
        let m = self.edge_margin;
        Point2::new(
            r.random_range(m..(self.arena.width - m)),
            r.random_range(m..(self.arena.height - m)),
        )
    }

    fn random_walk(&self, r: &mut rng::Rng) -> Trajectory {
        let mut waypoints = vec![self.random_point(r)];
        let mut speeds = Vec::new();
        let mut t = 0.0;
        while t <= self.duration {
            let last = *waypoints.last().unwrap();
            let next = loop {
                let p = self.random_point(r);
                if p.distance(last) >= 0.5 {
                    break p;
                }
            };
            let (lo, hi) = self.speed_range;
            let v = if hi > lo { r.random_range(lo..=hi) } else { lo };
            t += last.distance(next) / v;
            waypoints.push(next);
            speeds.push(v);
        }
        Trajectory { waypoints, speeds, start_time: 0.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radiometry::dhf_single;

    fn one_person_scene(noise: NoiseConfig, occlusion: bool) -> Scene {
        let t = SceneTemplate { noise, occlusion, duration: 10.0, ..Default::default() };
        t.generate(3, 1, 99)
    }

    #[test]
    fn empty_scene_is_silent() {
        let mut s = SceneTemplate { noise: NoiseConfig::NONE, duration: 5.0, ..Default::default() }.generate(0, 0, 1);
        s.heat_sources.clear();
        let r = simulate_scene(&s).unwrap();
        assert!(r.voltages.data().iter().all(|v| *v == 0.0));
        assert!(r.dhf.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn simulation_is_deterministic() {
        let s = SceneTemplate::default().generate(5, 2, 42);
        let a = simulate_scene(&s).unwrap();
        let b = simulate_scene(&s).unwrap();
        assert_eq!(a, b);
        let c = simulate_scene(&SceneTemplate::default().generate(6, 2, 42)).unwrap();
        assert_ne!(a.voltages, c.voltages);
    }

    #[test]
    fn single_person_voltage_is_dynamics_of_dhf_single() {
        let s = one_person_scene(NoiseConfig::NONE, false);
        let r = simulate_scene(&s).unwrap();
        let fs = s.sample_rate();
        for (k, sensor) in s.sensors.iter().enumerate() {
            let series: Vec<f64> = (0..s.n_samples())
                .map(|i| {
                    let p = s.persons[0].body.at(s.persons[0].trajectory.position_at(i as f64 / fs));
                    dhf_single(&p, sensor, s.env_temp).unwrap()
                })
                .collect();
            let v = sensor_dynamics(&series, &sensor.dynamics).unwrap();
            for (a, b) in v.iter().zip(r.voltages.row(k)) {
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn trajectory_leaving_arena_is_rejected() {
        let mut s = one_person_scene(NoiseConfig::NONE, false);
        s.persons[0].trajectory.waypoints[1] = Point2::new(8.0, 1.0);
        assert!(matches!(simulate_scene(&s), Err(Error::OutsideArena { .. })));
    }

    #[test]
    fn window_counts_and_labels() {
        let s = SceneTemplate { duration: 10.0, ..Default::default() }.generate(1, 2, 7);
        let r = simulate_scene(&s).unwrap();
        let w = window_dataset(&[r.clone()], 2.5, 2.5, 5).unwrap();
        assert_eq!(w.len(), 4);
        for (i, win) in w.iter().enumerate() {
            assert_eq!(win.voltages.shape(), &[4, 150]);
            assert_eq!(win.count, 2);
            assert_eq!(win.positions.len(), 2);
            assert!(win.positions.iter().all(|p| p.len() == 5));
            assert_eq!(win.start_time, 2.5 * i as f64);
            // Window content equals the matching slice of the recording.
            assert_eq!(win.voltages.row(1), &r.voltages.row(1)[150 * i..150 * (i + 1)]);
        }
        let empty = simulate_scene(&SceneTemplate { duration: 5.0, ..Default::default() }.generate(2, 0, 7)).unwrap();
        let w = window_dataset(&[empty], 2.5, 2.5, 5).unwrap();
        assert!(w.iter().all(|w| w.count == 0 && w.positions.is_empty()));
    }

    #[test]
    fn window_starts_match_index_arithmetic() {
        for &(n, d, hop) in &[(600usize, 150usize, 75.0f64), (601, 150, 75.0), (1000, 150, 37.5), (149, 150, 10.0)] {
            let got = window_starts(n, d, hop);
            let mut want = Vec::new();
            let mut k = 0u64;
            // Exact rational arithmetic: hop is a multiple of 0.5 here.
            let hop2 = (hop * 2.0) as u64;
            while (k * hop2) / 2 + d as u64 <= n as u64 {
                want.push(((k * hop2) / 2) as usize);
                k += 1;
            }
            assert_eq!(got, want, "n={n} d={d} hop={hop}");
        }
    }

    #[test]
    fn generated_walks_stay_inside() {
        let t = SceneTemplate::default();
        for id in 0..20 {
            let s = t.generate(id, 3, 11);
            s.validate().unwrap();
            for p in &s.persons {
                assert!(p.trajectory.end_time() > t.duration);
                assert!(p.trajectory.speeds.iter().all(|v| (0.5..=1.5).contains(v)));
            }
        }
    }
}
