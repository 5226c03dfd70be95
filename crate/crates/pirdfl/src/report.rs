//! CSV and JSON reports. Reports hold results only, never timings, so reruns
//! produce identical files.

use std::path::Path;

use anyhow::{Context, Result};
use pirdfl_core::metrics::{cdf, Confusion};
use pirdfl_core::nn::TrainReport;
use serde::Serialize;

use crate::baseline::{OverlapPoint, WindowSeparation};
use crate::harness::EvalReport;

/// Error grid of the CDF report, metres.
pub fn cdf_grid() -> Vec<f64> {
    (0..=80).map(|i| i as f64 * 0.05).collect()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

pub fn write_loss_curve(path: &Path, r: &TrainReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["epoch", "train_loss", "val_loss", "kept"])?;
    for (i, (t, v)) in r.train_loss.iter().zip(&r.val_loss).enumerate() {
        w.write_record([(i + 1).to_string(), t.to_string(), v.to_string(), u8::from(i + 1 == r.best_epoch).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_confusion(path: &Path, c: &Confusion) -> Result<()> {
    let mut w = writer(path)?;
    let n = c.counts.len();
    let mut header = vec!["true".to_string()];
    header.extend((0..n).map(|p| format!("pred_{p}")));
    w.write_record(&header)?;
    for (t, row) in c.counts.iter().enumerate() {
        let mut rec = vec![t.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct MetricRow<'a> {
    metric: &'a str,
    class: String,
    value: f64,
}

/// Long-format metrics: counting precision/recall/F1 per class, accuracy, macro F1,
/// and localization summaries per person count.
pub fn write_metrics(path: &Path, r: &EvalReport) -> Result<()> {
    let mut w = writer(path)?;
    let mut row = |metric: &str, class: String, value: f64| w.serialize(MetricRow { metric, class, value });
    row("accuracy", "all".into(), r.accuracy())?;
    row("macro_f1", "all".into(), r.confusion.macro_f1())?;
    row("windows", "all".into(), r.windows as f64)?;
    row("silent_windows", "all".into(), r.silent as f64)?;
    for c in 0..r.confusion.counts.len() {
        row("windows", c.to_string(), r.confusion.row_total(c) as f64)?;
        row("precision", c.to_string(), r.confusion.precision(c))?;
        row("recall", c.to_string(), r.confusion.recall(c))?;
        row("f1", c.to_string(), r.confusion.f1(c))?;
    }
    for m in 1..=r.loc_errors.len() {
        let s = r.loc_summary(m);
        row("loc_mean", m.to_string(), s.mean)?;
        row("loc_std", m.to_string(), s.std)?;
        row("loc_median", m.to_string(), s.median)?;
        row("loc_max", m.to_string(), s.max)?;
        let chain = pirdfl_core::metrics::summarize(&r.chain_errors[m - 1]);
        row("chain_mean", m.to_string(), chain.mean)?;
        row("chain_miscounted", m.to_string(), r.chain_miscounted[m - 1] as f64)?;
    }
    drop(row);
    w.flush()?;
    Ok(())
}

pub fn write_loc_errors(path: &Path, r: &EvalReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["persons", "error_m"])?;
    for (i, errs) in r.loc_errors.iter().enumerate() {
        for e in errs {
            w.write_record([(i + 1).to_string(), e.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_loc_cdf(path: &Path, r: &EvalReport) -> Result<()> {
    let grid = cdf_grid();
    let curves: Vec<Vec<f64>> = r.loc_errors.iter().map(|e| cdf(e, &grid)).collect();
    let mut w = writer(path)?;
    let mut header = vec!["error_m".to_string()];
    header.extend((1..=curves.len()).map(|m| format!("persons_{m}")));
    w.write_record(&header)?;
    for (i, g) in grid.iter().enumerate() {
        let mut rec = vec![g.to_string()];
        rec.extend(curves.iter().map(|c| c[i].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// All evaluation reports into `dir`.
pub fn write_eval(dir: &Path, r: &EvalReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_confusion(&dir.join("confusion.csv"), &r.confusion)?;
    write_metrics(&dir.join("metrics.csv"), r)?;
    write_loc_errors(&dir.join("loc_errors.csv"), r)?;
    write_loc_cdf(&dir.join("loc_cdf.csv"), r)?;
    Ok(())
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub loc_mean_1: f64,
    pub loc_std_1: f64,
    pub loc_mean_2: f64,
    pub loc_std_2: f64,
    pub loc_mean_3: f64,
    pub loc_std_3: f64,
}

impl SweepRow {
    pub fn new(axis: &str, value: f64, r: &EvalReport) -> Self {
        let s = |m: usize| if m <= r.loc_errors.len() { r.loc_summary(m) } else { pirdfl_core::metrics::summarize(&[]) };
        let (s1, s2, s3) = (s(1), s(2), s(3));
        Self {
            axis: axis.to_string(),
            value,
            accuracy: r.accuracy(),
            macro_f1: r.confusion.macro_f1(),
            loc_mean_1: s1.mean,
            loc_std_1: s1.std,
            loc_mean_2: s2.mean,
            loc_std_2: s2.std,
            loc_mean_3: s3.mean,
            loc_std_3: s3.std,
        }
    }

    pub fn loc_mean(&self, m: usize) -> f64 {
        [self.loc_mean_1, self.loc_mean_2, self.loc_mean_3][m - 1]
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SeparationRow {
    scene_id: u64,
    start_time: f64,
    persons: usize,
    n_sources: usize,
    sensor: usize,
    correlation: f64,
}

pub fn write_separation(path: &Path, rows: &[WindowSeparation]) -> Result<()> {
    let mut w = writer(path)?;
    for r in rows {
        for (s, c) in r.channels.iter().enumerate() {
            if let Some(c) = c {
                w.serialize(SeparationRow {
                    scene_id: r.scene_id,
                    start_time: r.start_time,
                    persons: r.persons,
                    n_sources: r.n_sources,
                    sensor: s,
                    correlation: *c,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct OverlapRow {
    speed_a: f64,
    speed_b: f64,
    spectral_overlap: f64,
    correlation: f64,
    trials: usize,
}

pub fn write_overlap(path: &Path, points: &[OverlapPoint]) -> Result<()> {
    let rows: Vec<OverlapRow> = points
        .iter()
        .map(|p| OverlapRow {
            speed_a: p.speeds.0,
            speed_b: p.speeds.1,
            spectral_overlap: p.overlap,
            correlation: p.correlation,
            trials: p.trials,
        })
        .collect();
    write_rows(path, &rows)
}

/// Mean separation correlation per person count, index `m - 1`.
pub fn separation_means(rows: &[WindowSeparation], max_persons: usize) -> Vec<f64> {
    (1..=max_persons)
        .map(|m| {
            let v: Vec<f64> = rows.iter().filter(|r| r.persons == m).filter_map(|r| r.mean()).collect();
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
