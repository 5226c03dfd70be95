use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use pirdfl::commands::{self, Axis, Layout, Target};
use pirdfl::config::ExperimentConfig;
use pirdfl_core::models::Preset;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    Desk,
    Paper,
}

#[derive(Debug, Parser)]
#[command(name = "pirdfl", version, about = "PIR-sensor multi-person localization lab")]
struct Cli {
    /// TOML configuration; its values override the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    preset: Option<PresetArg>,
    /// Feed raw voltages to the networks (disables augmentation too).
    #[arg(long, global = true)]
    no_preprocess: bool,
    #[arg(long, global = true)]
    no_augment: bool,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the train, validation and test recordings.
    Simulate,
    /// Train the counter and localizers on the simulated data.
    Train {
        /// `all`, `counter` or `localizer-<M>`.
        #[arg(long, default_value = "all")]
        target: Target,
    },
    /// Evaluate the trained networks on the test recordings.
    Evaluate,
    /// Simulate, train and evaluate along one axis.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
    },
    /// SCICA separation baseline.
    Baseline {
        #[arg(value_parser = ["scica"], default_value = "scica")]
        method: String,
    },
    /// Write augmented training recordings.
    Augment,
    /// Print the resolved configuration.
    Config,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let base = match cli.preset {
        Some(PresetArg::Paper) => ExperimentConfig::preset(Preset::Paper),
        _ => ExperimentConfig::desk(),
    };
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load_over(&base, path)?,
        None => base,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.no_preprocess {
        cfg.switches.preprocess = false;
    }
    if cli.no_augment {
        cfg.switches.augment = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    pirdfl::init_threads();
    let cli = Cli::parse();
    let cfg = resolve(&cli)?;
    let out = Layout::new(&cli.out);
    let t = std::time::Instant::now();
    match &cli.command {
        Command::Simulate => {
            let m = commands::simulate(&cfg, &out)?;
            println!("wrote {} splits to {}", m.splits.len(), out.data().display());
        }
        Command::Train { target } => {
            let m = commands::train(&cfg, &out, *target)?;
            for n in &m.networks {
                match n.training.best_val_loss {
                    Some(v) => println!("{}: {} epochs, best {} (val loss {v:.5})", n.name, n.training.epochs, n.training.best_epoch),
                    None => println!("{}: untrained", n.name),
                }
            }
        }
        Command::Evaluate => {
            let r = commands::evaluate(&cfg, &out)?;
            let s = commands::EvalSummary::new(&r);
            println!("accuracy {:.4}  macro F1 {:.4}", s.accuracy, s.macro_f1);
            for (m, (mean, std)) in s.loc_mean.iter().zip(&s.loc_std).enumerate() {
                println!("{} person(s): mean error {mean:.3} m (std {std:.3})", m + 1);
            }
        }
        Command::Sweep { axis } => {
            for r in commands::sweep(&cfg, &out, *axis)? {
                println!(
                    "{} = {}: accuracy {:.4}, mean errors {:.3} / {:.3} / {:.3} m",
                    r.axis, r.value, r.accuracy, r.loc_mean_1, r.loc_mean_2, r.loc_mean_3
                );
            }
        }
        Command::Baseline { .. } => {
            let s = commands::run_baseline(&cfg, &out)?;
            println!("mean matched correlation per person count: {:?}", s.correlation);
            println!("overlap sweep correlation: {:?} (spectral overlap {:?})", s.overlap_correlation, s.spectral_overlap);
        }
        Command::Augment => {
            let n = commands::augment(&cfg, &out)?;
            println!("wrote {n} recordings to {}", out.augment().display());
        }
        Command::Config => print!("{}", cfg.to_toml()),
    }
    log::info!("finished in {:.1} s", t.elapsed().as_secs_f64());
    Ok(())
}
