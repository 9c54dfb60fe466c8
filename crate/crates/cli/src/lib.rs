//! `ionprof`: generate CDF training data, train surrogates, predict
//! concentration profiles, evaluate and benchmark.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use ionprof_core::ModelKind;
use serde_json::json;

use crate::commands::{BenchArgs, Context, PredictArgs};
use crate::config::{Preset, RunConfig};

pub const THREADS_ENV: &str = "IONPROF_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "ionprof",
    version,
    about = "Ion concentration profiles in slit nanochannels from learned CDFs"
)]
pub struct Cli {
    /// Run configuration (TOML, or JSON when the name ends in .json).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output root; relative paths in the config resolve against it.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Base settings that the config file overlays.
    #[arg(long, global = true, value_enum, default_value = "paper")]
    pub preset: Preset,

    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Mlp,
    Gbdt,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Mlp => ModelKind::Mlp,
            KindArg::Gbdt => ModelKind::Gbdt,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the configured grid and write train/test CSVs plus a manifest.
    Generate,
    /// Parse trajectory exports into a binary distance cache.
    Ingest {
        /// `frame,ion_id,z` CSV; repeat for several configurations.
        #[arg(long = "trajectory", required = true)]
        trajectories: Vec<PathBuf>,
        /// Sidecar JSON per trajectory (default: same name with .json).
        #[arg(long = "meta")]
        metas: Vec<PathBuf>,
        /// Cache file (default: <out>/cache/empirical.bin).
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Train a model on the generated training split.
    Train {
        #[arg(value_enum)]
        kind: KindArg,
    },
    /// Predict one concentration profile.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        ion: String,
        /// Channel width, nm.
        #[arg(long)]
        width: f64,
        /// Molarity, M.
        #[arg(long)]
        molarity: f64,
        /// Bin size, nm.
        #[arg(long, default_value_t = 0.05)]
        bin_size: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Profile MAE and peak deviation over the grid, per model.
    Evaluate {
        /// Model files (default: every model in the model directory).
        #[arg(long = "model")]
        models: Vec<PathBuf>,
        /// Also evaluate the ground-truth source against itself.
        #[arg(long)]
        oracle: bool,
    },
    /// Time full-grid profile inference.
    Bench {
        #[arg(long = "model")]
        models: Vec<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        bin_size: Option<f64>,
        /// Use the full 1,725-configuration grid instead of the configured one.
        #[arg(long)]
        full_grid: bool,
    },
    /// Write the ion catalog as JSON and print it.
    Catalog {
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            anyhow::bail!("--threads must be >= 1");
        }
        // ignore "already initialized" when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let mut cfg = RunConfig::load(cli.preset, cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.sampling.master_seed = seed;
    }
    let ctx = Context::new(cfg, cli.out)?;
    match cli.command {
        Command::Generate => commands::generate(&ctx).map(drop),
        Command::Ingest {
            trajectories,
            metas,
            cache,
        } => commands::ingest(&ctx, &trajectories, &metas, cache.as_deref()).map(drop),
        Command::Train { kind } => commands::train(&ctx, kind.into()).map(drop),
        Command::Predict {
            model,
            ion,
            width,
            molarity,
            bin_size,
            output,
        } => commands::predict(
            &ctx,
            &PredictArgs {
                model: &model,
                ion: &ion,
                width,
                molarity,
                bin_size,
                output: output.as_deref(),
            },
        )
        .map(drop),
        Command::Evaluate { models, oracle } => {
            commands::evaluate_cmd(&ctx, &models, oracle).map(drop)
        }
        Command::Bench {
            models,
            runs,
            bin_size,
            full_grid,
        } => commands::bench(
            &ctx,
            &BenchArgs {
                models: &models,
                runs,
                bin_size,
                full_grid,
            },
        )
        .map(drop),
        Command::Catalog { output } => commands::catalog(&ctx, output.as_deref()).map(drop),
    }
}

/// One-line JSON error for stderr.
pub fn error_line(err: &anyhow::Error) -> String {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<ionprof_core::Error>())
        .map(|e| e.kind())
        .unwrap_or("runtime");
    let message = err
        .chain()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(": ");
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}
