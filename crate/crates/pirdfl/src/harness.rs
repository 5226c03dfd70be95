//! Experiment orchestration: sample preparation, training, evaluation,
//! sweeps and the separation baseline. Everything here is in memory; the
//! command layer in [`crate::commands`] handles files.

use std::time::Instant;

use anyhow::{bail, Result};
use log::info;
use pirdfl_core::math::std_dev;
use pirdfl_core::metrics::{summarize, Confusion, Summary};
use pirdfl_core::models::{localization_loss, CountSample, Counter, LocSample, Localizer, Pirnet};
use pirdfl_core::nn::{train_loop, TrainConfig, TrainReport};
use pirdfl_core::pipeline::{augment_recordings, estimate_dhf, preprocess, InputMode, SignalWindow};
use pirdfl_core::radiometry::{window_dataset, DynamicsConstants, Recording};
use pirdfl_core::{rng, Error as CoreError, Point2};
use rayon::prelude::*;

use crate::checkpoint::{CheckpointManifest, NetworkEntry, TrainSummary};
use crate::config::ExperimentConfig;

/// Dynamics shared by every sensor of a deployment.
pub fn constants(cfg: &ExperimentConfig) -> DynamicsConstants {
    cfg.scene.sensor_models().first().map(|s| s.dynamics).unwrap_or_default()
}

/// Attaches DHF estimates (and, for training, augmented copies) when the
/// networks see preprocessed input. Raw-input runs use the recordings as they are.
pub fn prepare_recordings(cfg: &ExperimentConfig, recs: &[Recording], augment: bool) -> Result<Vec<Recording>> {
    if !cfg.switches.preprocess {
        return Ok(recs.to_vec());
    }
    let k = constants(cfg);
    let seed = rng::derive_seed(cfg.seed, &[0x6175_676d]);
    let out: Vec<Vec<Recording>> = recs
        .par_iter()
        .map(|r| -> Result<Vec<Recording>> {
            if augment {
                Ok(augment_recordings(std::slice::from_ref(r), &k, &cfg.pipeline, seed, true, true)?)
            } else {
                Ok(vec![estimate_dhf(r, &k, &cfg.pipeline)?])
            }
        })
        .collect::<Result<_>>()?;
    Ok(out.into_iter().flatten().collect())
}

pub fn windows(cfg: &ExperimentConfig, recs: &[Recording], hop: f64) -> Result<Vec<SignalWindow>> {
    Ok(window_dataset(recs, cfg.data.window, hop, cfg.pipeline.segments)?)
}

/// Input mode of a run. Without preprocessing the raw voltages are divided by
/// one global constant, the mean summed row deviation of the training windows.
pub fn input_mode(cfg: &ExperimentConfig, train: &[SignalWindow]) -> Result<InputMode> {
    if cfg.switches.preprocess {
        return Ok(InputMode::Preprocessed);
    }
    let sums: Vec<f64> = train
        .iter()
        .map(|w| (0..w.voltages.rows()).map(|r| std_dev(w.voltages.row(r))).sum::<f64>())
        .filter(|s| *s > 0.0)
        .collect();
    if sums.is_empty() {
        bail!("training windows carry no signal");
    }
    let typical = sums.iter().sum::<f64>() / sums.len() as f64;
    Ok(InputMode::Raw { scale: 1.0 / typical })
}

/// Network inputs with labels; silent windows are dropped.
pub struct Samples {
    pub count: Vec<CountSample>,
    /// Entry `m - 1` holds the windows with `m` persons.
    pub loc: Vec<Vec<LocSample>>,
    pub silent: usize,
}

pub fn samples(cfg: &ExperimentConfig, windows: &[SignalWindow], mode: InputMode) -> Result<Samples> {
    let k = constants(cfg);
    let xs: Vec<Option<_>> = windows
        .par_iter()
        .map(|w| match preprocess(w.input(), &k, &cfg.pipeline, mode) {
            Ok(x) => Ok(Some(x)),
            Err(CoreError::SilentWindow) => Ok(None),
            Err(e) => Err(anyhow::Error::from(e)),
        })
        .collect::<Result<_>>()?;
    let mut out = Samples { count: Vec::new(), loc: vec![Vec::new(); cfg.data.max_persons], silent: 0 };
    for (w, x) in windows.iter().zip(xs) {
        let Some(x) = x else {
            out.silent += 1;
            continue;
        };
        if w.count > 0 && w.count <= out.loc.len() {
            out.loc[w.count - 1].push(LocSample { x: x.clone(), positions: w.positions.clone() });
        }
        out.count.push(CountSample { x, count: w.count });
    }
    Ok(out)
}

pub struct Trained {
    pub model: Pirnet,
    pub manifest: CheckpointManifest,
    /// Counter first, then one report per localizer.
    pub reports: Vec<TrainReport>,
}

pub enum Net {
    Count(Counter),
    Locate(Localizer),
}

/// One trained network: job 0 is the counter, job `m` the localizer for `m` persons.
pub struct TrainedNet {
    pub job: usize,
    pub net: Net,
    pub report: TrainReport,
    pub entry: NetworkEntry,
}

/// Trains the selected networks (independent jobs, run in parallel) and
/// returns them with the input mode they were trained for.
pub fn train_networks(
    cfg: &ExperimentConfig,
    train_recs: &[Recording],
    val_recs: &[Recording],
    jobs: &[usize],
) -> Result<(InputMode, Vec<TrainedNet>)> {
    let t0 = Instant::now();
    let train_prepared = prepare_recordings(cfg, train_recs, cfg.switches.augment && cfg.switches.preprocess)?;
    let val_prepared = prepare_recordings(cfg, val_recs, false)?;
    let train_windows = windows(cfg, &train_prepared, cfg.data.train_hop)?;
    drop(train_prepared);
    let val_windows = windows(cfg, &val_prepared, cfg.data.eval_hop)?;
    let mode = input_mode(cfg, &train_windows)?;
    let train = samples(cfg, &train_windows, mode)?;
    let val = samples(cfg, &val_windows, mode)?;
    drop(train_windows);
    info!(
        "prepared {} training and {} validation windows in {:.1} s",
        train.count.len(),
        val.count.len(),
        t0.elapsed().as_secs_f64()
    );
    if let Some(m) = jobs.iter().find(|&&m| m > cfg.data.max_persons) {
        bail!("no localizer for {m} persons (max_persons = {})", cfg.data.max_persons);
    }
    let nets = jobs
        .par_iter()
        .map(|&m| -> Result<TrainedNet> {
            let t = Instant::now();
            let init_seed = rng::derive_seed(cfg.seed, &[0x696e_6974, m as u64]);
            let train_seed = rng::derive_seed(cfg.seed, &[0x7472_6e, m as u64]);
            let (net, report, entry) = if m == 0 {
                let shape = cfg.counting_shape();
                let mut c = Counter::new(shape, init_seed)?;
                let tc = TrainConfig { seed: train_seed, ..cfg.model.counter.clone() };
                let report = train_loop(&mut c, &train.count, &val.count, &tc)?;
                let entry = NetworkEntry {
                    name: network_name(0),
                    file: format!("{}.ckpt", network_name(0)),
                    shape,
                    init_seed,
                    training: TrainSummary::new(&report, train.count.len(), val.count.len()),
                };
                (Net::Count(c), report, entry)
            } else {
                let shape = cfg.localization_shape(m);
                let mut l = Localizer::new(shape, init_seed)?;
                let tc = TrainConfig { seed: train_seed, ..cfg.model.localizer.clone() };
                let (tr, va) = (&train.loc[m - 1], &val.loc[m - 1]);
                let report = train_loop(&mut l, tr, va, &tc)?;
                let entry = NetworkEntry {
                    name: network_name(m),
                    file: format!("{}.ckpt", network_name(m)),
                    shape,
                    init_seed,
                    training: TrainSummary::new(&report, tr.len(), va.len()),
                };
                (Net::Locate(l), report, entry)
            };
            info!(
                "{}: {} epochs, best {} (val {:.4}), {:.1} s",
                entry.name,
                report.val_loss.len(),
                report.best_epoch,
                entry.training.best_val_loss.unwrap_or(f64::NAN),
                t.elapsed().as_secs_f64()
            );
            Ok(TrainedNet { job: m, net, report, entry })
        })
        .collect::<Result<_>>()?;
    info!("training finished in {:.1} s", t0.elapsed().as_secs_f64());
    Ok((mode, nets))
}

pub fn network_name(job: usize) -> String {
    if job == 0 {
        "counter".into()
    } else {
        format!("localizer-{job}")
    }
}

/// Trains the counter and every localizer.
pub fn train_models(cfg: &ExperimentConfig, train_recs: &[Recording], val_recs: &[Recording]) -> Result<Trained> {
    let jobs: Vec<usize> = (0..=cfg.data.max_persons).collect();
    let (mode, nets) = train_networks(cfg, train_recs, val_recs, &jobs)?;
    let mut counter = None;
    let mut localizers = Vec::new();
    let mut reports = Vec::new();
    let mut networks = Vec::new();
    for t in nets {
        match t.net {
            Net::Count(c) => counter = Some(c),
            Net::Locate(l) => localizers.push(l),
        }
        reports.push(t.report);
        networks.push(t.entry);
    }
    let model = Pirnet {
        counter: counter.expect("counter job always runs"),
        localizers,
        constants: constants(cfg),
        pipeline: cfg.pipeline.clone(),
        mode,
    };
    let manifest = CheckpointManifest { mode, pipeline: cfg.pipeline.clone(), constants: constants(cfg), networks };
    Ok(Trained { model, manifest, reports })
}

/// Per-person, per-segment errors (metres) of one window under the best assignment.
pub fn matched_errors(pred: &[Vec<Point2>], truth: &[Vec<Point2>]) -> Result<Vec<f64>> {
    let (_, perm) = localization_loss(pred, truth)?;
    Ok(pred.iter().enumerate().flat_map(|(m, p)| p.iter().zip(&truth[perm[m]]).map(|(a, b)| a.distance(*b))).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub confusion: Confusion,
    pub windows: usize,
    pub silent: usize,
    /// Errors of the localizer for the true person count, entry `m - 1`.
    pub loc_errors: Vec<Vec<f64>>,
    /// Errors of the full inference chain on windows whose count it got right, entry `m - 1`.
    pub chain_errors: Vec<Vec<f64>>,
    /// Windows with `m` persons whose count was mispredicted (no chain error recorded).
    pub chain_miscounted: Vec<usize>,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        self.confusion.accuracy()
    }

    pub fn loc_summary(&self, m: usize) -> Summary {
        summarize(&self.loc_errors[m - 1])
    }

    pub fn loc_mean(&self, m: usize) -> f64 {
        self.loc_summary(m).mean
    }
}

/// Evaluates on test recordings. Inference only ever sees label-free inputs.
pub fn evaluate(cfg: &ExperimentConfig, model: &Pirnet, test_recs: &[Recording]) -> Result<EvalReport> {
    let prepared = if model.mode == InputMode::Preprocessed {
        let mut c = cfg.clone();
        c.switches.preprocess = true;
        prepare_recordings(&c, test_recs, false)?
    } else {
        test_recs.to_vec()
    };
    let ws = windows(cfg, &prepared, cfg.data.eval_hop)?;
    let max_m = model.localizers.len();
    struct One {
        truth: usize,
        count: usize,
        silent: bool,
        oracle: Option<Vec<f64>>,
        chain: Option<Vec<f64>>,
    }
    let rows: Vec<One> = ws
        .par_iter()
        .map(|w| -> Result<One> {
            let inf = model.infer(w.input())?;
            let m = w.count;
            let mut oracle = None;
            let mut chain = None;
            if m >= 1 && m <= max_m && !inf.silent {
                let x = model.prepare(w.input())?;
                let pred = model.localizers[m - 1].locate(&[&x])?.pop().unwrap_or_default();
                oracle = Some(matched_errors(&pred, &w.positions)?);
                if inf.count == m {
                    chain = Some(matched_errors(&inf.positions, &w.positions)?);
                }
            }
            Ok(One { truth: m, count: inf.count, silent: inf.silent, oracle, chain })
        })
        .collect::<Result<_>>()?;
    let mut r = EvalReport {
        confusion: Confusion::default(),
        windows: rows.len(),
        silent: 0,
        loc_errors: vec![Vec::new(); max_m],
        chain_errors: vec![Vec::new(); max_m],
        chain_miscounted: vec![0; max_m],
    };
    for o in rows {
        r.confusion.add(o.truth, o.count);
        r.silent += usize::from(o.silent);
        if let Some(e) = o.oracle {
            r.loc_errors[o.truth - 1].extend(e);
            match o.chain {
                Some(c) => r.chain_errors[o.truth - 1].extend(c),
                None => r.chain_miscounted[o.truth - 1] += 1,
            }
        }
    }
    Ok(r)
}

/// Keeps the first `fraction` of each class's training scenes.
pub fn train_subset(recs: &[Recording], fraction: f64) -> Vec<Recording> {
    let max_m = recs.iter().map(|r| r.n_persons()).max().unwrap_or(0);
    let mut out = Vec::new();
    for m in 0..=max_m {
        let class: Vec<&Recording> = recs.iter().filter(|r| r.n_persons() == m).collect();
        let keep = ((class.len() as f64 * fraction).round() as usize).clamp(1.min(class.len()), class.len());
        out.extend(class.into_iter().take(keep).cloned());
    }
    out
}
