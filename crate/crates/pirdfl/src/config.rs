//! Experiment configuration, read from TOML.

use std::path::Path;

use anyhow::{bail, Context, Result};
use pirdfl_core::models::{NetShape, Preset};
use pirdfl_core::nn::TrainConfig;
use pirdfl_core::pipeline::PipelineConfig;
use pirdfl_core::radiometry::{Arena, HeatSource, NoiseConfig, PersonBody, SceneTemplate};
use pirdfl_core::scica::ScicaConfig;
use pirdfl_core::{Point2, SensorModel};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoisePreset {
    None,
    Indoor,
    Outdoor,
}

impl NoisePreset {
    pub fn noise(self) -> NoiseConfig {
        match self {
            NoisePreset::None => NoiseConfig::NONE,
            NoisePreset::Indoor => NoiseConfig::indoor(),
            NoisePreset::Outdoor => NoiseConfig::outdoor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub arena: Arena,
    /// Sensor positions; every sensor faces the arena centre.
    pub sensors: Vec<Point2>,
    pub body: PersonBody,
    pub speed_range: (f64, f64),
    pub edge_margin: f64,
    pub env_temp_range: (f64, f64),
    pub noise: NoisePreset,
    pub occlusion: bool,
    /// Length of one simulated scene, seconds.
    pub duration: f64,
    /// Number of static heat sources, taken in order from `source_posts`.
    pub noise_sources: usize,
    pub source_posts: Vec<Point2>,
    pub source_area: f64,
    pub source_temp: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        let arena = Arena::default();
        let (w, h) = (arena.width, arena.height);
        Self {
            arena,
            sensors: arena.corners().to_vec(),
            body: PersonBody::default(),
            speed_range: (0.5, 1.5),
            edge_margin: 0.5,
            env_temp_range: (288.0, 300.0),
            noise: NoisePreset::Indoor,
            occlusion: true,
            duration: 60.0,
            noise_sources: 0,
            source_posts: vec![
                Point2::new(w / 2.0, 0.0),
                Point2::new(w, h / 2.0),
                Point2::new(w / 2.0, h),
                Point2::new(0.0, h / 2.0),
            ],
            source_area: 0.5,
            source_temp: 300.0,
        }
    }
}

impl SceneConfig {
    pub fn sensor_models(&self) -> Vec<SensorModel> {
        let c = self.arena.center();
        self.sensors.iter().map(|p| SensorModel::facing(*p, c)).collect()
    }

    pub fn template(&self) -> SceneTemplate {
        let heat_sources = self
            .source_posts
            .iter()
            .take(self.noise_sources)
            .map(|p| HeatSource { position: *p, effective_area: self.source_area, surface_temp: self.source_temp })
            .collect();
        SceneTemplate {
            arena: self.arena,
            sensors: self.sensor_models(),
            body: self.body,
            speed_range: self.speed_range,
            edge_margin: self.edge_margin,
            env_temp_range: self.env_temp_range,
            noise: self.noise.noise(),
            heat_sources,
            occlusion: self.occlusion,
            duration: self.duration,
        }
    }
}

/// Simulated minutes per person count (class) and window timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub train_minutes: f64,
    pub val_minutes: f64,
    pub test_minutes: f64,
    pub max_persons: usize,
    pub window: f64,
    pub train_hop: f64,
    pub eval_hop: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train_minutes: 20.0,
            val_minutes: 4.0,
            test_minutes: 8.0,
            max_persons: 3,
            window: 2.5,
            train_hop: 1.25,
            eval_hop: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub preset: Preset,
    /// Width of each counting component (the separation layer has `3 * width` units).
    pub counting_component_width: usize,
    pub counter: TrainConfig,
    pub localizer: TrainConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Desk,
            counting_component_width: 4,
            counter: TrainConfig { learning_rate: 1e-4, max_epochs: 30, patience: 5, ..Default::default() },
            localizer: TrainConfig { max_epochs: 30, patience: 5, ..Default::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Switches {
    pub preprocess: bool,
    pub augment: bool,
}

impl Default for Switches {
    fn default() -> Self {
        Self { preprocess: true, augment: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountSource {
    GroundTruth,
    CountingNet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub scica: ScicaConfig,
    pub count_source: CountSource,
    /// Test windows with at least one person that the baseline evaluates.
    pub max_windows: usize,
    /// Speed pairs of the spectral-overlap sweep, from disjoint to overlapping.
    pub overlap_speeds: Vec<(f64, f64)>,
    /// Random two-walker windows per sweep point.
    pub overlap_trials: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            scica: ScicaConfig::default(),
            count_source: CountSource::GroundTruth,
            max_windows: 120,
            overlap_speeds: vec![(0.6, 1.4), (0.8, 1.1), (0.9, 0.9)],
            overlap_trials: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Train-length fractions of the generated training minutes.
    pub train_fractions: Vec<f64>,
    pub noise_sources: Vec<usize>,
    /// Deployments of the sensor axis: the first `n` arena corners.
    pub sensor_counts: Vec<usize>,
    /// Split durations of the sensor and noise-source axes, relative to `data`.
    pub minutes_scale: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            train_fractions: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            noise_sources: vec![0, 1, 2, 3, 4],
            sensor_counts: vec![1, 2, 3, 4],
            minutes_scale: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scene: SceneConfig,
    pub data: DataConfig,
    pub pipeline: PipelineConfig,
    pub model: ModelConfig,
    pub switches: Switches,
    pub baseline: BaselineConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            scene: SceneConfig::default(),
            data: DataConfig::default(),
            pipeline: PipelineConfig::default(),
            model: ModelConfig::default(),
            switches: Switches::default(),
            baseline: BaselineConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn desk() -> Self {
        Self::default()
    }

    /// Paper-scale data volumes (5 h per class for training) and stage-1 width 512.
    pub fn paper() -> Self {
        let mut c = Self::default();
        c.model.preset = Preset::Paper;
        c.data.train_minutes = 300.0;
        c.data.val_minutes = 15.0;
        c.data.test_minutes = 30.0;
        c.sweep.minutes_scale = 1.0;
        c
    }

    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Desk => Self::desk(),
            Preset::Paper => Self::paper(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a file whose values override `base`; tables merge key by key.
    pub fn load_over(base: &Self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg = Self::from_toml_over(base, &text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_over(base: &Self, text: &str) -> Result<Self> {
        let over: toml::Table = toml::from_str(text)?;
        let mut merged = toml::Table::try_from(base)?;
        merge(&mut merged, over);
        Ok(merged.try_into()?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.scene.sensors.is_empty() {
            bail!("at least one sensor is required");
        }
        if let Some(p) = self.scene.sensors.iter().find(|p| !self.scene.arena.contains(**p)) {
            bail!("sensor at ({}, {}) lies outside the arena", p.x, p.y);
        }
        if self.scene.noise_sources > self.scene.source_posts.len() {
            bail!("{} noise sources requested but only {} posts configured", self.scene.noise_sources, self.scene.source_posts.len());
        }
        let d = &self.data;
        if d.max_persons == 0 || d.max_persons > pirdfl_core::radiometry::MAX_PERSONS {
            bail!("max_persons must lie in 1..={}", pirdfl_core::radiometry::MAX_PERSONS);
        }
        if !(d.window > 0.0 && d.train_hop > 0.0 && d.eval_hop > 0.0) {
            bail!("window and hops must be positive");
        }
        if self.scene.duration < d.window {
            bail!("scene duration must cover at least one window");
        }
        if !(d.train_minutes > 0.0 && d.val_minutes > 0.0 && d.test_minutes > 0.0) {
            bail!("every split needs a positive duration");
        }
        if self.sweep.train_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            bail!("train fractions must lie in (0, 1]");
        }
        if self.sweep.sensor_counts.iter().any(|n| !(1..=4).contains(n)) {
            bail!("sensor counts must lie in 1..=4");
        }
        if !(self.sweep.minutes_scale > 0.0) {
            bail!("sweep minutes_scale must be positive");
        }
        self.pipeline.validate()?;
        self.model.counter.validate()?;
        self.model.localizer.validate()?;
        Ok(())
    }

    pub fn scale_minutes(&mut self, f: f64) {
        self.data.train_minutes *= f;
        self.data.val_minutes *= f;
        self.data.test_minutes *= f;
    }

    pub fn n_sensors(&self) -> usize {
        self.scene.sensors.len()
    }

    pub fn counting_shape(&self) -> NetShape {
        let mut s = NetShape::counting(self.n_sensors());
        s.component_width = self.model.counting_component_width;
        s
    }

    pub fn localization_shape(&self, m: usize) -> NetShape {
        let a = &self.scene.arena;
        let scale = 0.5 * a.width.max(a.height);
        NetShape::localization(self.n_sensors(), m, self.model.preset, a.center(), scale)
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
