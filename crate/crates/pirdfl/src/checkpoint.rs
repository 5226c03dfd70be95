//! Decimal text checkpoints and the manifest tying them to their networks.
//!
//! Every value is written with 17 significant digits, enough to read back the
//! identical `f64`.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use pirdfl_core::models::{Counter, Localizer, NetShape, Pirnet};
use pirdfl_core::nn::{ModelParams, Tensor, TrainReport};
use pirdfl_core::pipeline::{InputMode, PipelineConfig};
use pirdfl_core::radiometry::DynamicsConstants;
use serde::{Deserialize, Serialize};

const MAGIC: &str = "pirdfl-checkpoint 1";

pub fn to_text(network: &str, params: &ModelParams) -> String {
    let mut s = String::new();
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "network {network}").unwrap();
    writeln!(s, "tensors {}", params.len()).unwrap();
    for (name, t) in params.names().iter().zip(params.values()) {
        let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        writeln!(s, "tensor {name} {}", dims.join(" ")).unwrap();
        let width = t.shape().last().copied().unwrap_or(1).max(1);
        for row in t.data().chunks(width) {
            let vals: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(s, "{}", vals.join(" ")).unwrap();
        }
    }
    s
}

/// Parses a checkpoint into `(network, [(name, tensor)])`.
pub fn from_text(text: &str) -> Result<(String, Vec<(String, Tensor)>)> {
    let mut lines = text.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, &str)> {
        lines.next().map(|(i, l)| (i + 1, l)).with_context(|| format!("checkpoint ends before {what}"))
    };
    let (_, magic) = next("the header")?;
    if magic != MAGIC {
        bail!("not a checkpoint (header `{magic}`)");
    }
    let (i, l) = next("the network name")?;
    let network = l.strip_prefix("network ").with_context(|| format!("line {i}: expected `network <name>`"))?.to_string();
    let (i, l) = next("the tensor count")?;
    let count: usize = l
        .strip_prefix("tensors ")
        .and_then(|v| v.parse().ok())
        .with_context(|| format!("line {i}: expected `tensors <count>`"))?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let (i, l) = next("a tensor header")?;
        let mut parts = l.strip_prefix("tensor ").with_context(|| format!("line {i}: expected `tensor <name> <dims>`"))?.split(' ');
        let name = parts.next().unwrap_or_default().to_string();
        let shape: Vec<usize> =
            parts.map(|d| d.parse().with_context(|| format!("line {i}: bad dimension `{d}`"))).collect::<Result<_>>()?;
        let len: usize = shape.iter().product();
        let width = shape.last().copied().unwrap_or(1).max(1);
        let mut data = Vec::with_capacity(len);
        while data.len() < len {
            let (i, l) = next("tensor values")?;
            let before = data.len();
            for v in l.split(' ') {
                data.push(v.parse::<f64>().with_context(|| format!("line {i}: bad value `{v}`"))?);
            }
            if data.len() - before != width.min(len - before) {
                bail!("line {i}: expected {} values", width.min(len - before));
            }
        }
        out.push((name, Tensor::from_vec(&shape, data)?));
    }
    Ok((network, out))
}

/// Overwrites `params` with the tensors of a checkpoint, matching names and shapes.
pub fn load_into(params: &mut ModelParams, tensors: &[(String, Tensor)]) -> Result<()> {
    if tensors.len() != params.len() {
        bail!("checkpoint has {} tensors, network has {}", tensors.len(), params.len());
    }
    for (i, (name, _)) in tensors.iter().enumerate() {
        if params.names()[i] != *name {
            bail!("checkpoint tensor {i} is `{name}`, network expects `{}`", params.names()[i]);
        }
    }
    let values: Vec<Tensor> = tensors.iter().map(|(_, t)| t.clone()).collect();
    params.load(&values)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    /// `None` for a network that has not been trained.
    pub best_val_loss: Option<f64>,
    pub train_samples: usize,
    pub val_samples: usize,
}

impl TrainSummary {
    pub fn new(r: &TrainReport, train_samples: usize, val_samples: usize) -> Self {
        Self {
            epochs: r.val_loss.len(),
            best_epoch: r.best_epoch,
            stopped_early: r.stopped_early,
            best_val_loss: r.val_loss.get(r.best_epoch.wrapping_sub(1)).copied(),
            train_samples,
            val_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEntry {
    pub name: String,
    pub file: String,
    pub shape: NetShape,
    pub init_seed: u64,
    pub training: TrainSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub mode: InputMode,
    pub pipeline: PipelineConfig,
    pub constants: DynamicsConstants,
    /// `networks[0]` is the counter, `networks[m]` the localizer for `m` persons.
    pub networks: Vec<NetworkEntry>,
}

pub const MANIFEST_FILE: &str = "checkpoints.json";

pub fn save(dir: &Path, manifest: &CheckpointManifest, model: &Pirnet) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let params = std::iter::once(&model.counter.net.params).chain(model.localizers.iter().map(|l| &l.net.params));
    for (entry, p) in manifest.networks.iter().zip(params) {
        std::fs::write(dir.join(&entry.file), to_text(&entry.name, p))?;
    }
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    std::fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(())
}

pub fn load(dir: &Path) -> Result<(CheckpointManifest, Pirnet)> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    let read = |e: &NetworkEntry| -> Result<Vec<(String, Tensor)>> {
        let text = std::fs::read_to_string(dir.join(&e.file)).with_context(|| format!("reading {}", e.file))?;
        let (name, tensors) = from_text(&text).with_context(|| format!("parsing {}", e.file))?;
        if name != e.name {
            bail!("{} holds network `{name}`, manifest says `{}`", e.file, e.name);
        }
        Ok(tensors)
    };
    let Some((first, rest)) = manifest.networks.split_first() else {
        bail!("checkpoint manifest lists no networks");
    };
    let mut counter = Counter::new(first.shape, first.init_seed)?;
    load_into(&mut counter.net.params, &read(first)?)?;
    let mut localizers = Vec::new();
    for (m, e) in rest.iter().enumerate() {
        let mut l = Localizer::new(e.shape, e.init_seed)?;
        if l.persons() != m + 1 {
            bail!("network `{}` handles {} persons, expected {}", e.name, l.persons(), m + 1);
        }
        load_into(&mut l.net.params, &read(e)?)?;
        localizers.push(l);
    }
    let model = Pirnet {
        counter,
        localizers,
        constants: manifest.constants,
        pipeline: manifest.pipeline.clone(),
        mode: manifest.mode,
    };
    Ok((manifest, model))
}

/// Shape-compatibility check between a checkpoint and the network a config would build.
pub fn check_shape(entry: &NetworkEntry, want: &NetShape) -> Result<()> {
    if entry.shape != *want {
        bail!("checkpoint `{}` was trained with shape {:?}, configuration needs {:?}", entry.name, entry.shape, want);
    }
    Ok(())
}
