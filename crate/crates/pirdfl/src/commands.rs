//! Command implementations behind the CLI. Each command reads and writes
//! under one output directory:
//!
//! ```text
//! <out>/data/      manifest.json, train.jsonl, val.jsonl, test.jsonl
//! <out>/model/     checkpoints.json, *.ckpt, loss_*.csv
//! <out>/eval/      confusion.csv, metrics.csv, loc_errors.csv, loc_cdf.csv, summary.json
//! <out>/sweep/     <axis>.csv
//! <out>/baseline/  separation.csv, overlap.csv, summary.json
//! <out>/augment/   train.jsonl, variants.csv
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use pirdfl_core::models::{Counter, Localizer, Pirnet};
use pirdfl_core::pipeline::augment_recordings;
use pirdfl_core::radiometry::Recording;
use pirdfl_core::rng;
use serde::Serialize;

use crate::baseline;
use crate::checkpoint::{self, CheckpointManifest, NetworkEntry, TrainSummary};
use crate::config::{CountSource, ExperimentConfig};
use crate::dataset::{self, Manifest, Split};
use crate::harness::{self, EvalReport, Net};
use crate::report::{self, SweepRow};

#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn model(&self) -> PathBuf {
        self.root.join("model")
    }

    pub fn eval(&self) -> PathBuf {
        self.root.join("eval")
    }

    pub fn sweep(&self) -> PathBuf {
        self.root.join("sweep")
    }

    pub fn baseline(&self) -> PathBuf {
        self.root.join("baseline")
    }

    pub fn augment(&self) -> PathBuf {
        self.root.join("augment")
    }
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    Ok(())
}

/// Simulates the train, validation and test splits. Test recordings keep the
/// per-person DHF for the separation baseline.
pub fn simulate(cfg: &ExperimentConfig, out: &Layout) -> Result<Manifest> {
    let dir = out.data();
    write_config(&dir, cfg)?;
    let mut splits = Vec::new();
    let mut sample_rate = 0.0;
    for split in Split::ALL {
        let plan = dataset::plan_split(cfg, split);
        let recs = dataset::simulate_plan(cfg, &plan)?;
        sample_rate = recs.first().map_or(sample_rate, |r| r.sample_rate);
        dataset::write_recordings(&dir.join(split.file_name()), &recs, split == Split::Test)?;
        let m = dataset::split_manifest(cfg, split, &plan, &recs);
        info!("{}: {} scenes, windows per class {:?}", split.name(), plan.len(), m.windows_per_class);
        splits.push(m);
    }
    let manifest = Manifest {
        seed: cfg.seed,
        sensors: cfg.n_sensors(),
        sample_rate,
        scene_duration: cfg.scene.duration,
        window: cfg.data.window,
        splits,
    };
    manifest.write(&dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Reads one split, checking that the data set was generated for this deployment.
pub fn load_split(cfg: &ExperimentConfig, out: &Layout, split: Split) -> Result<Vec<Recording>> {
    let dir = out.data();
    let manifest = Manifest::read(&dir.join("manifest.json")).context("no data set; run `simulate` first")?;
    if manifest.sensors != cfg.n_sensors() {
        bail!("data set has {} sensors, configuration has {}", manifest.sensors, cfg.n_sensors());
    }
    if manifest.seed != cfg.seed {
        log::warn!("data set was generated with seed {}, configuration seed is {}", manifest.seed, cfg.seed);
    }
    dataset::read_recordings(&dir.join(split.file_name()))
}

/// Which networks `train` fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    All,
    Counter,
    Localizer(usize),
}

impl std::str::FromStr for Target {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Target::All),
            "counter" => Ok(Target::Counter),
            _ => match s.strip_prefix("localizer-").and_then(|m| m.parse().ok()) {
                Some(m) if m >= 1 => Ok(Target::Localizer(m)),
                _ => bail!("target must be `all`, `counter` or `localizer-<M>`"),
            },
        }
    }
}

fn untrained(cfg: &ExperimentConfig, job: usize) -> Result<(Net, NetworkEntry)> {
    let init_seed = rng::derive_seed(cfg.seed, &[0x696e_6974, job as u64]);
    let name = harness::network_name(job);
    let (net, shape) = if job == 0 {
        let s = cfg.counting_shape();
        (Net::Count(Counter::new(s, init_seed)?), s)
    } else {
        let s = cfg.localization_shape(job);
        (Net::Locate(Localizer::new(s, init_seed)?), s)
    };
    let training = TrainSummary { epochs: 0, best_epoch: 0, stopped_early: false, best_val_loss: None, train_samples: 0, val_samples: 0 };
    Ok((net, NetworkEntry { file: format!("{name}.ckpt"), name, shape, init_seed, training }))
}

/// Trains the selected networks and saves checkpoints. A partial target
/// updates an existing checkpoint set, or starts one from untrained networks.
pub fn train(cfg: &ExperimentConfig, out: &Layout, target: Target) -> Result<CheckpointManifest> {
    let train_recs = load_split(cfg, out, Split::Train)?;
    let val_recs = load_split(cfg, out, Split::Val)?;
    let jobs: Vec<usize> = match target {
        Target::All => (0..=cfg.data.max_persons).collect(),
        Target::Counter => vec![0],
        Target::Localizer(m) => vec![m],
    };
    let (mode, trained) = harness::train_networks(cfg, &train_recs, &val_recs, &jobs)?;
    let dir = out.model();
    std::fs::create_dir_all(&dir)?;
    let existing = if target != Target::All && dir.join(checkpoint::MANIFEST_FILE).exists() {
        let (m, model) = checkpoint::load(&dir)?;
        if m.mode != mode {
            bail!("existing checkpoints were trained with input mode {:?}, this run uses {:?}", m.mode, mode);
        }
        Some((m, model))
    } else {
        None
    };
    let mut slots: Vec<(Net, NetworkEntry)> = Vec::new();
    for job in 0..=cfg.data.max_persons {
        let slot = match &existing {
            Some((m, model)) if job < m.networks.len() => {
                let net = if job == 0 { Net::Count(model.counter.clone()) } else { Net::Locate(model.localizers[job - 1].clone()) };
                (net, m.networks[job].clone())
            }
            _ => untrained(cfg, job)?,
        };
        slots.push(slot);
    }
    for t in trained {
        report::write_loss_curve(&dir.join(format!("loss_{}.csv", t.entry.name)), &t.report)?;
        slots[t.job] = (t.net, t.entry);
    }
    let mut counter = None;
    let mut localizers = Vec::new();
    let mut networks = Vec::new();
    for (net, entry) in slots {
        match net {
            Net::Count(c) => counter = Some(c),
            Net::Locate(l) => localizers.push(l),
        }
        networks.push(entry);
    }
    let k = harness::constants(cfg);
    let model = Pirnet {
        counter: counter.expect("slot 0 is the counter"),
        localizers,
        constants: k,
        pipeline: cfg.pipeline.clone(),
        mode,
    };
    let manifest = CheckpointManifest { mode, pipeline: cfg.pipeline.clone(), constants: k, networks };
    checkpoint::save(&dir, &manifest, &model)?;
    write_config(&dir, cfg)?;
    Ok(manifest)
}

/// Loads checkpoints and checks them against the networks the configuration builds.
pub fn load_model(cfg: &ExperimentConfig, out: &Layout) -> Result<Pirnet> {
    let (manifest, model) = checkpoint::load(&out.model()).context("no checkpoints; run `train` first")?;
    if manifest.networks.len() != cfg.data.max_persons + 1 {
        bail!("checkpoints cover {} networks, configuration needs {}", manifest.networks.len(), cfg.data.max_persons + 1);
    }
    checkpoint::check_shape(&manifest.networks[0], &cfg.counting_shape())?;
    for m in 1..=cfg.data.max_persons {
        checkpoint::check_shape(&manifest.networks[m], &cfg.localization_shape(m))?;
    }
    Ok(model)
}

#[derive(Debug, Serialize)]
pub struct EvalSummary {
    pub windows: usize,
    pub silent_windows: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Mean localization error per person count, index `m - 1`.
    pub loc_mean: Vec<f64>,
    pub loc_std: Vec<f64>,
}

impl EvalSummary {
    pub fn new(r: &EvalReport) -> Self {
        let m = r.loc_errors.len();
        Self {
            windows: r.windows,
            silent_windows: r.silent,
            accuracy: r.accuracy(),
            macro_f1: r.confusion.macro_f1(),
            loc_mean: (1..=m).map(|i| r.loc_summary(i).mean).collect(),
            loc_std: (1..=m).map(|i| r.loc_summary(i).std).collect(),
        }
    }
}

pub fn evaluate(cfg: &ExperimentConfig, out: &Layout) -> Result<EvalReport> {
    let model = load_model(cfg, out)?;
    let test = load_split(cfg, out, Split::Test)?;
    let r = harness::evaluate(cfg, &model, &test)?;
    let dir = out.eval();
    report::write_eval(&dir, &r)?;
    report::write_json(&dir.join("summary.json"), &EvalSummary::new(&r))?;
    info!("accuracy {:.4}, mean errors {:?}", r.accuracy(), EvalSummary::new(&r).loc_mean);
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Axis {
    Sensors,
    TrainLength,
    NoiseSources,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Sensors => "sensors",
            Axis::TrainLength => "train_length",
            Axis::NoiseSources => "noise_sources",
        }
    }
}

/// Simulates, trains and evaluates in memory for one configuration.
pub fn run_point(cfg: &ExperimentConfig, train_fraction: f64) -> Result<EvalReport> {
    cfg.validate()?;
    let train = dataset::simulate_split(cfg, Split::Train)?;
    let train = if train_fraction < 1.0 { harness::train_subset(&train, train_fraction) } else { train };
    let val = dataset::simulate_split(cfg, Split::Val)?;
    let test = dataset::simulate_split(cfg, Split::Test)?;
    let t = harness::train_models(cfg, &train, &val)?;
    harness::evaluate(cfg, &t.model, &test)
}

/// Configurations of a sweep axis, with the grid value of each.
pub fn sweep_points(cfg: &ExperimentConfig, axis: Axis) -> Vec<(f64, ExperimentConfig, f64)> {
    let s = &cfg.sweep;
    match axis {
        Axis::Sensors => {
            let corners = cfg.scene.arena.corners();
            s.sensor_counts
                .iter()
                .map(|&n| {
                    let mut c = cfg.clone();
                    c.scene.sensors = corners[..n].to_vec();
                    c.scale_minutes(s.minutes_scale);
                    (n as f64, c, 1.0)
                })
                .collect()
        }
        Axis::TrainLength => s.train_fractions.iter().map(|&f| (f, cfg.clone(), f)).collect(),
        Axis::NoiseSources => s
            .noise_sources
            .iter()
            .map(|&k| {
                let mut c = cfg.clone();
                c.scene.noise_sources = k;
                c.scale_minutes(s.minutes_scale);
                (k as f64, c, 1.0)
            })
            .collect(),
    }
}

pub fn sweep(cfg: &ExperimentConfig, out: &Layout, axis: Axis) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for (value, c, fraction) in sweep_points(cfg, axis) {
        let t = std::time::Instant::now();
        let r = run_point(&c, fraction)?;
        let row = SweepRow::new(axis.name(), value, &r);
        info!("{} = {value}: accuracy {:.4}, errors {:.3} {:.3} {:.3} ({:.0} s)", axis.name(), row.accuracy, row.loc_mean_1, row.loc_mean_2, row.loc_mean_3, t.elapsed().as_secs_f64());
        rows.push(row);
    }
    let dir = out.sweep();
    std::fs::create_dir_all(&dir)?;
    report::write_rows(&dir.join(format!("{}.csv", axis.name())), &rows)?;
    Ok(rows)
}

#[derive(Debug, Serialize)]
pub struct BaselineSummary {
    pub windows: usize,
    /// Mean matched correlation per person count, index `m - 1`.
    pub correlation: Vec<f64>,
    /// Sensor channels where FastICA did not converge (left out of the means).
    pub unconverged: usize,
    pub overlap_correlation: Vec<f64>,
    pub spectral_overlap: Vec<f64>,
}

pub fn run_baseline(cfg: &ExperimentConfig, out: &Layout) -> Result<BaselineSummary> {
    let test = load_split(cfg, out, Split::Test)?;
    if test.iter().any(|r| r.n_persons() > 0 && r.person_dhf.is_empty()) {
        bail!("test recordings lack per-person DHF; regenerate them with `simulate`");
    }
    let model = match cfg.baseline.count_source {
        CountSource::CountingNet => Some(load_model(cfg, out)?),
        CountSource::GroundTruth => None,
    };
    let rows = baseline::evaluate_separation(cfg, &test, model.as_ref())?;
    let points = baseline::overlap_sweep(cfg)?;
    let dir = out.baseline();
    std::fs::create_dir_all(&dir)?;
    report::write_separation(&dir.join("separation.csv"), &rows)?;
    report::write_overlap(&dir.join("overlap.csv"), &points)?;
    let summary = BaselineSummary {
        windows: rows.len(),
        correlation: report::separation_means(&rows, cfg.data.max_persons),
        unconverged: rows.iter().map(|r| r.unconverged).sum(),
        overlap_correlation: points.iter().map(|p| p.correlation).collect(),
        spectral_overlap: points.iter().map(|p| p.overlap).collect(),
    };
    report::write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
struct VariantRow {
    index: usize,
    scene_id: u64,
    variant: String,
    samples: usize,
}

/// Writes the augmented training recordings (with DHF estimates) and a table
/// naming the variant of each.
pub fn augment(cfg: &ExperimentConfig, out: &Layout) -> Result<usize> {
    let train = load_split(cfg, out, Split::Train)?;
    let seed = rng::derive_seed(cfg.seed, &[0x6175_676d]);
    let k = harness::constants(cfg);
    let recs = augment_recordings(&train, &k, &cfg.pipeline, seed, true, true)?;
    let mut names: Vec<String> = cfg.pipeline.warp_factors.iter().map(|a| format!("warp_{a}")).collect();
    names.push("reshape".into());
    names.push("original".into());
    let rows: Vec<VariantRow> = recs
        .iter()
        .enumerate()
        .map(|(i, r)| VariantRow { index: i, scene_id: r.scene_id, variant: names[i % names.len()].clone(), samples: r.n_samples() })
        .collect();
    let dir = out.augment();
    std::fs::create_dir_all(&dir)?;
    dataset::write_recordings(&dir.join(Split::Train.file_name()), &recs, false)?;
    report::write_rows(&dir.join("variants.csv"), &rows)?;
    Ok(recs.len())
}
