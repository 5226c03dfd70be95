//! Simulated data sets: scene planning per split, JSONL persistence of
//! recordings, and the manifest describing them.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use pirdfl_core::nn::Tensor;
use pirdfl_core::radiometry::{simulate_scene, window_starts, Recording};
use pirdfl_core::{rng, Point2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Val => 2,
            Split::Test => 3,
        }
    }

    pub fn minutes(self, cfg: &ExperimentConfig) -> f64 {
        match self {
            Split::Train => cfg.data.train_minutes,
            Split::Val => cfg.data.val_minutes,
            Split::Test => cfg.data.test_minutes,
        }
    }

    /// Training windows overlap by half; validation and test windows do not.
    pub fn hop(self, cfg: &ExperimentConfig) -> f64 {
        match self {
            Split::Train => cfg.data.train_hop,
            Split::Val | Split::Test => cfg.data.eval_hop,
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.jsonl", self.name())
    }
}

/// One planned scene of a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenePlan {
    pub id: u64,
    pub persons: usize,
    /// Seed the scene's walkers are drawn from.
    pub seed: u64,
}

/// Scenes per class so that every class gets at least the configured minutes.
pub fn scenes_per_class(cfg: &ExperimentConfig, split: Split) -> usize {
    (split.minutes(cfg) * 60.0 / cfg.scene.duration - 1e-9).ceil().max(1.0) as usize
}

/// Scene ids are unique across splits and classes; seeds are derived from
/// the experiment seed and the split, so no two splits share one.
pub fn plan_split(cfg: &ExperimentConfig, split: Split) -> Vec<ScenePlan> {
    let per_class = scenes_per_class(cfg, split);
    let seed = rng::derive_seed(cfg.seed, &[0x7370_6c74, split.tag()]);
    (0..=cfg.data.max_persons)
        .flat_map(|persons| {
            (0..per_class).map(move |i| ScenePlan {
                id: split.tag() * 1_000_000_000 + persons as u64 * 1_000_000 + i as u64,
                persons,
                seed,
            })
        })
        .collect()
}

pub fn simulate_plan(cfg: &ExperimentConfig, plan: &[ScenePlan]) -> Result<Vec<Recording>> {
    let template = cfg.scene.template();
    plan.par_iter()
        .map(|p| simulate_scene(&template.generate(p.id, p.persons, p.seed)).map_err(anyhow::Error::from))
        .collect()
}

pub fn simulate_split(cfg: &ExperimentConfig, split: Split) -> Result<Vec<Recording>> {
    simulate_plan(cfg, &plan_split(cfg, split))
}

/// Windows cut from one recording of `samples` samples.
pub fn window_count(cfg: &ExperimentConfig, samples: usize, hop: f64, sample_rate: f64) -> usize {
    let d = (cfg.data.window * sample_rate).round() as usize;
    window_starts(samples, d, hop * sample_rate).len()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RecordingLine {
    scene_id: u64,
    persons: usize,
    sensors: usize,
    samples: usize,
    sample_rate: f64,
    /// Row-major `sensors x samples`.
    voltages: Vec<f64>,
    dhf: Vec<f64>,
    /// `[person][sample] = [x, y]`
    positions: Vec<Vec<[f64; 2]>>,
    /// Per person, row-major `sensors x samples`; omitted for training splits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    person_dhf: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dhf_estimate: Option<Vec<f64>>,
}

impl RecordingLine {
    fn from_recording(r: &Recording, with_person_dhf: bool) -> Self {
        Self {
            scene_id: r.scene_id,
            persons: r.n_persons(),
            sensors: r.n_sensors(),
            samples: r.n_samples(),
            sample_rate: r.sample_rate,
            voltages: r.voltages.data().to_vec(),
            dhf: r.dhf.data().to_vec(),
            positions: r.positions.iter().map(|s| s.iter().map(|p| [p.x, p.y]).collect()).collect(),
            person_dhf: with_person_dhf.then(|| r.person_dhf.iter().map(|t| t.data().to_vec()).collect()),
            dhf_estimate: r.dhf_estimate.as_ref().map(|t| t.data().to_vec()),
        }
    }

    fn into_recording(self) -> Result<Recording> {
        let shape = [self.sensors, self.samples];
        let block = |data: Vec<f64>, what: &str| {
            Tensor::from_vec(&shape, data).with_context(|| format!("scene {}: {what} block has the wrong size", self.scene_id))
        };
        if self.positions.len() != self.persons || self.positions.iter().any(|p| p.len() != self.samples) {
            bail!("scene {}: positions do not match {} persons x {} samples", self.scene_id, self.persons, self.samples);
        }
        let person_dhf = match self.person_dhf {
            Some(blocks) => {
                if blocks.len() != self.persons {
                    bail!("scene {}: expected {} per-person DHF blocks", self.scene_id, self.persons);
                }
                blocks.into_iter().map(|b| block(b, "per-person DHF")).collect::<Result<_>>()?
            }
            None => Vec::new(),
        };
        Ok(Recording {
            scene_id: self.scene_id,
            sample_rate: self.sample_rate,
            voltages: block(self.voltages, "voltage")?,
            dhf: block(self.dhf, "DHF")?,
            dhf_estimate: self.dhf_estimate.map(|d| block(d, "DHF estimate")).transpose()?,
            person_dhf,
            positions: self.positions.iter().map(|s| s.iter().map(|p| Point2::new(p[0], p[1])).collect()).collect(),
        })
    }
}

pub fn write_recordings(path: &Path, recordings: &[Recording], with_person_dhf: bool) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for r in recordings {
        serde_json::to_writer(&mut w, &RecordingLine::from_recording(r, with_person_dhf))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_recordings(path: &Path) -> Result<Vec<Recording>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordingLine =
            serde_json::from_str(&line).with_context(|| format!("{}:{}: malformed record", path.display(), i + 1))?;
        out.push(rec.into_recording()?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub split: Split,
    pub file: String,
    pub hop: f64,
    pub scenes: Vec<ScenePlan>,
    /// Windows per person count, index = count.
    pub windows_per_class: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub sensors: usize,
    pub sample_rate: f64,
    pub scene_duration: f64,
    pub window: f64,
    pub splits: Vec<SplitManifest>,
}

impl Manifest {
    pub fn split(&self, s: Split) -> Option<&SplitManifest> {
        self.splits.iter().find(|m| m.split == s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn split_manifest(cfg: &ExperimentConfig, split: Split, plan: &[ScenePlan], recordings: &[Recording]) -> SplitManifest {
    let mut windows = vec![0; cfg.data.max_persons + 1];
    for r in recordings {
        windows[r.n_persons()] += window_count(cfg, r.n_samples(), split.hop(cfg), r.sample_rate);
    }
    SplitManifest { split, file: split.file_name(), hop: split.hop(cfg), scenes: plan.to_vec(), windows_per_class: windows }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut c = ExperimentConfig::desk();
        c.scene.duration = 10.0;
        c.data.train_minutes = 0.5;
        c.data.val_minutes = 0.2;
        c.data.test_minutes = 0.2;
        c
    }

    #[test]
    fn plans_are_disjoint_across_splits() {
        let c = tiny();
        let train = plan_split(&c, Split::Train);
        let test = plan_split(&c, Split::Test);
        assert_eq!(train.len(), 4 * 3);
        assert!(test.iter().all(|t| train.iter().all(|p| p.id != t.id && p.seed != t.seed)));
    }

    #[test]
    fn recordings_round_trip_through_jsonl() {
        let c = tiny();
        let plan = &plan_split(&c, Split::Val)[..3];
        let recs = simulate_plan(&c, plan).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("val.jsonl");
        write_recordings(&p, &recs, true).unwrap();
        assert_eq!(read_recordings(&p).unwrap(), recs);
        write_recordings(&p, &recs, false).unwrap();
        let back = read_recordings(&p).unwrap();
        assert!(back.iter().all(|r| r.person_dhf.is_empty()));
        assert_eq!(back[2].voltages, recs[2].voltages);
    }

    #[test]
    fn window_counts_follow_duration_and_hop() {
        let c = ExperimentConfig::desk();
        // 60 s scenes, 2.5 s windows every 1.25 s.
        assert_eq!(window_count(&c, 3600, 1.25, 60.0), 47);
        assert_eq!(window_count(&c, 3600, 2.5, 60.0), 24);
        assert_eq!(scenes_per_class(&c, Split::Train), 20);
    }
}
