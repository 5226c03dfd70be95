use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use pirdfl::commands::{self, Layout, Target};
use pirdfl::config::ExperimentConfig;
use pirdfl::dataset::{self, Manifest, Split};
use pirdfl::harness;
use pirdfl_core::metrics::{cdf, f1_score, Confusion};
use pirdfl_core::Point2;
use proptest::prelude::*;

fn tiny() -> ExperimentConfig {
    let mut c = ExperimentConfig::desk();
    c.seed = 11;
    c.scene.duration = 10.0;
    c.data.train_minutes = 0.5;
    c.data.val_minutes = 0.2;
    c.data.test_minutes = 0.2;
    c.model.counter.max_epochs = 2;
    c.model.localizer.max_epochs = 2;
    c.baseline.max_windows = 6;
    c.baseline.overlap_trials = 2;
    c
}

fn files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn run_all(cfg: &ExperimentConfig, out: &Layout) {
    commands::simulate(cfg, out).unwrap();
    commands::train(cfg, out, Target::All).unwrap();
    commands::evaluate(cfg, out).unwrap();
    commands::run_baseline(cfg, out).unwrap();
    commands::augment(cfg, out).unwrap();
}

#[test]
fn every_command_reproduces_its_artifacts_byte_for_byte() {
    let cfg = tiny();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_all(&cfg, &Layout::new(a.path()));
    run_all(&cfg, &Layout::new(b.path()));
    let (fa, fb) = (files(a.path()), files(b.path()));
    for name in [
        "data/train.jsonl",
        "data/test.jsonl",
        "data/manifest.json",
        "model/checkpoints.json",
        "model/counter.ckpt",
        "model/localizer-3.ckpt",
        "model/loss_counter.csv",
        "eval/confusion.csv",
        "eval/metrics.csv",
        "eval/loc_cdf.csv",
        "baseline/separation.csv",
        "baseline/overlap.csv",
        "augment/train.jsonl",
        "augment/variants.csv",
    ] {
        assert!(fa.contains_key(name), "missing {name}");
    }
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        assert!(bytes == &fb[name], "{name} differs between runs");
    }
}

#[test]
fn end_to_end_run_is_consistent() {
    let cfg = tiny();
    let dir = tempfile::tempdir().unwrap();
    let out = Layout::new(dir.path());
    let manifest = commands::simulate(&cfg, &out).unwrap();

    // Test scene seeds and ids never occur in the training plan.
    let train = manifest.split(Split::Train).unwrap();
    let test = manifest.split(Split::Test).unwrap();
    for t in &test.scenes {
        assert!(train.scenes.iter().all(|s| s.seed != t.seed && s.id != t.id));
    }

    let ckpt = commands::train(&cfg, &out, Target::All).unwrap();
    assert_eq!(ckpt.networks.len(), 4);
    assert!(ckpt.networks.iter().all(|n| n.training.epochs == 2));

    let report = commands::evaluate(&cfg, &out).unwrap();
    // Confusion marginals equal the test-set class counts.
    for (c, &n) in test.windows_per_class.iter().enumerate() {
        assert_eq!(report.confusion.row_total(c), n as u64);
    }
    assert_eq!(report.windows, test.windows_per_class.iter().sum::<usize>());
    for c in 0..4 {
        assert!((0.0..=1.0).contains(&report.confusion.f1(c)));
    }
    for m in 1..=3 {
        assert!(!report.loc_errors[m - 1].is_empty());
        assert!(report.loc_errors[m - 1].iter().all(|e| e.is_finite() && *e >= 0.0));
    }
    let cdf_text = std::fs::read_to_string(dir.path().join("eval/loc_cdf.csv")).unwrap();
    assert_eq!(cdf_text.lines().count(), 1 + pirdfl::report::cdf_grid().len());

    // Evaluation with a configuration that builds different networks is refused.
    let mut wide = cfg.clone();
    wide.model.preset = pirdfl_core::models::Preset::Paper;
    assert!(commands::evaluate(&wide, &out).is_err());
}

#[test]
fn switches_change_what_training_sees() {
    let cfg = tiny();
    let dir = tempfile::tempdir().unwrap();
    let out = Layout::new(dir.path());
    let manifest = commands::simulate(&cfg, &out).unwrap();
    let windows: usize = manifest.split(Split::Train).unwrap().windows_per_class.iter().sum();

    let mut plain = cfg.clone();
    plain.switches.augment = false;
    let m = commands::train(&plain, &out, Target::Counter).unwrap();
    let seen = m.networks[0].training.train_samples;
    assert!(seen <= windows && seen + windows / 10 >= windows, "{seen} of {windows}");
    // Only the counter was trained; the localizers were initialized.
    assert!(m.networks[1..].iter().all(|n| n.training.epochs == 0));

    let m = commands::train(&cfg, &out, Target::Localizer(2)).unwrap();
    assert!(m.networks[0].training.train_samples == seen, "counter slot kept");
    let per_class = manifest.split(Split::Train).unwrap().windows_per_class[2];
    assert!(m.networks[2].training.train_samples > 3 * per_class);

    let mut raw = cfg.clone();
    raw.switches.preprocess = false;
    // Mixing input modes in one checkpoint set is refused.
    assert!(commands::train(&raw, &out, Target::Counter).is_err());
    let m = commands::train(&raw, &out, Target::All).unwrap();
    assert!(matches!(m.mode, pirdfl_core::pipeline::InputMode::Raw { .. }));
    assert!(m.networks[0].training.train_samples <= windows);
}

#[test]
fn desk_manifest_counts_follow_duration_rate_and_hop() {
    let cfg = ExperimentConfig::desk();
    let plan = dataset::plan_split(&cfg, Split::Train);
    let recs = dataset::simulate_plan(&cfg, &plan[..2]).unwrap();
    let m = dataset::split_manifest(&cfg, Split::Train, &plan[..2], &recs);
    // 60 s scenes at 60 Hz: (60 - 2.5) / 1.25 + 1 windows each.
    let per_scene = ((60.0 - 2.5) / 1.25f64).floor() as usize + 1;
    assert_eq!(m.windows_per_class[0], 2 * per_scene);
    let scenes = (20.0 * 60.0 / 60.0) as usize;
    assert_eq!(plan.len(), 4 * scenes);
    let eval = ((60.0 - 2.5) / 2.5f64).floor() as usize + 1;
    assert_eq!(dataset::window_count(&cfg, 3600, cfg.data.eval_hop, 60.0), eval);
}

#[test]
fn f1_matches_the_harmonic_mean() {
    assert!((f1_score(0.8, 0.5) - 8.0 / 13.0).abs() < 1e-15);
    let mut c = Confusion::default();
    for _ in 0..4 {
        c.add(1, 1);
    }
    for _ in 0..4 {
        c.add(1, 2);
    }
    c.add(0, 1);
    assert!((c.precision(1) - 0.8).abs() < 1e-15);
    assert!((c.recall(1) - 0.5).abs() < 1e-15);
    assert!((c.f1(1) - 8.0 / 13.0).abs() < 1e-15);
}

#[test]
fn perfect_predictor_scores_perfectly() {
    let mut c = Confusion::default();
    for t in 0..4 {
        for _ in 0..(t + 2) {
            c.add(t, t);
        }
    }
    assert_eq!(c.accuracy(), 1.0);
    assert_eq!(c.macro_f1(), 1.0);
    for t in 0..4 {
        for p in 0..4 {
            assert_eq!(c.counts[t][p] == 0, t != p);
        }
    }
    let truth = vec![
        vec![Point2::new(1.0, 2.0), Point2::new(1.5, 2.0)],
        vec![Point2::new(5.0, 5.0), Point2::new(4.0, 5.5)],
    ];
    let e = harness::matched_errors(&truth, &truth).unwrap();
    assert_eq!(e, vec![0.0; 4]);
}

proptest! {
    #[test]
    fn cdf_reaches_one_at_the_largest_error(errs in prop::collection::vec(0.0f64..10.0, 1..60)) {
        let max = errs.iter().copied().fold(0.0, f64::max);
        let c = cdf(&errs, &[max, max - 1e-9]);
        prop_assert_eq!(c[0], 1.0);
        prop_assert!(c[1] < 1.0);
    }
}

#[test]
fn cli_resolves_config_and_reproduces_data() {
    let bin = env!("CARGO_BIN_EXE_pirdfl");
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("tiny.toml");
    std::fs::write(&cfg_path, "[scene]\nduration = 5.0\n[data]\ntrain_minutes = 0.2\nval_minutes = 0.1\ntest_minutes = 0.1\n").unwrap();
    let run = |args: &[&str]| {
        let o = Command::new(bin).args(args).env("RUST_LOG", "warn").output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    let text = run(&["--config", cfg_path.to_str().unwrap(), "--seed", "5", "--no-augment", "config"]);
    let resolved: ExperimentConfig = toml::from_str(&text).unwrap();
    assert_eq!(resolved.seed, 5);
    assert_eq!(resolved.scene.duration, 5.0);
    assert!(!resolved.switches.augment);
    assert_eq!(resolved.data.eval_hop, 2.5);

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run(&["--config", cfg_path.to_str().unwrap(), "--seed", "5", "--out", out.to_str().unwrap(), "simulate"]);
    }
    assert_eq!(files(&a), files(&b));
    let m = Manifest::read(&a.join("data/manifest.json")).unwrap();
    assert_eq!(m.seed, 5);
    assert_eq!(m.splits.len(), 3);
}
