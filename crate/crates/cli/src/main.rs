//! `lom`: run the online MNIST experiment, score checkpoints, print codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use lom::checkpoint::Checkpoint;
use lom::config::RunConfig;
use lom::experiment::{self, write_metrics, BinRecord};
use lom::mnist::{load_images, load_labels, Dataset, DatasetPaths};
use lom::{encode, BinaryVector};

#[derive(Parser)]
#[command(name = "lom", version, about = "Low-order model learner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train bin by bin on MNIST, scoring the test set after each bin.
    Experiment {
        /// TOML run configuration. Defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for metrics.csv, checkpoint.lom and config.toml.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Vote threshold of the output stage.
        #[arg(long)]
        threshold: Option<f64>,
        /// Deepest generalization tier, applied to both layers.
        #[arg(long)]
        max_tier: Option<usize>,
    },
    /// Print the test-set error of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Directory holding the standard MNIST files.
        #[arg(long, default_value = "data/mnist")]
        dataset: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Print the dendritic code of a bit string such as `101`.
    Encode { bits: String },
    /// Per-unit statistics of a checkpoint as CSV.
    Inspect {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Experiment {
            config,
            seed,
            out,
            threshold,
            max_tier,
        } => {
            let mut cfg = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            if let Some(t) = threshold {
                cfg.topology.vote_threshold = t;
            }
            if let Some(k) = max_tier {
                cfg.topology.hidden.max_tier = k;
                cfg.topology.output.max_tier = k;
            }
            cfg.validate()?;
            cmd_experiment(&cfg)
        }
        Command::Eval {
            checkpoint,
            dataset,
            threshold,
        } => cmd_eval(&checkpoint, &dataset, threshold),
        Command::Encode { bits } => {
            let v: BinaryVector = bits.parse()?;
            println!("{}", encode(&v)?);
            Ok(())
        }
        Command::Inspect { checkpoint } => cmd_inspect(&checkpoint),
    }
}

fn cmd_experiment(cfg: &RunConfig) -> Result<()> {
    let paths = cfg.dataset.paths();
    paths.check_exist()?;
    let data = Dataset::load(&paths)?;
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    fs::write(cfg.out_dir.join("config.toml"), cfg.to_toml())?;
    let metrics = cfg.out_dir.join("metrics.csv");

    let start = Instant::now();
    let mut seen: Vec<BinRecord> = Vec::new();
    let mut write_err = None;
    let result = experiment::run_experiment(&cfg.experiment, &cfg.input, &cfg.topology, cfg.seed, &data, |r| {
        eprintln!(
            "bin {:>2}  images {:>5}  error {:.4}  ({:.0}s)",
            r.bin_index,
            r.images_seen,
            r.error_rate,
            start.elapsed().as_secs_f64()
        );
        seen.push(*r);
        if let Err(e) = write_metrics(&metrics, &seen) {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e).context("writing metrics");
    }

    let ck = Checkpoint {
        seed: cfg.seed,
        examples_seen: (cfg.experiment.bins * cfg.experiment.bin_size) as u64,
        input: cfg.input.clone(),
        network: result.network,
    };
    ck.save(cfg.out_dir.join("checkpoint.lom"))?;
    for r in &result.records {
        println!("{},{},{:.4}", r.bin_index, r.images_seen, r.error_rate);
    }
    Ok(())
}

fn cmd_eval(checkpoint: &Path, dataset: &Path, threshold: Option<f64>) -> Result<()> {
    let mut ck = Checkpoint::load(checkpoint).with_context(|| format!("reading {}", checkpoint.display()))?;
    if let Some(t) = threshold {
        ck.network.set_vote_threshold(t)?;
    }
    let paths = DatasetPaths::in_dir(dataset);
    for p in [&paths.test_images, &paths.test_labels] {
        if !p.exists() {
            bail!("missing path: {}", p.display());
        }
    }
    let images = load_images(&paths.test_images)?;
    let labels = load_labels(&paths.test_labels)?;
    experiment::check_geometry(&ck.input, ck.network.config(), images.rows, images.cols)?;
    let windows = experiment::extract_all(&ck.input, &images);
    let error = experiment::evaluate(&ck.network, &windows, &labels, ck.seed)?;
    println!("{error:.4}");
    Ok(())
}

fn cmd_inspect(checkpoint: &Path) -> Result<()> {
    let ck = Checkpoint::load(checkpoint).with_context(|| format!("reading {}", checkpoint.display()))?;
    println!("unit,layer,patterns,label_entropy");
    let layers = [(1, ck.network.hidden_units()), (2, ck.network.output_units())];
    for (layer, units) in layers {
        for u in units {
            let patterns = u.memory().stored_patterns().map_or(0, |p| p.len());
            match u.label_entropy() {
                Some(h) => println!("{},{layer},{patterns},{h:.4}", u.id()),
                None => println!("{},{layer},{patterns},", u.id()),
            }
        }
    }
    Ok(())
}
