//! `gd2p`: dataset generation, diffusion training, pose sampling, ranking,
//! and multi-step push planning over the shipped hand and object assets.
//!
//! Exit codes: 0 success, 2 degenerate-but-handled (no feasible pose, no
//! path, empty output), 1 error.

mod gen;
mod pipeline;
mod stats;
mod train;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use util::{parse_directions, parse_xy, Degenerate, EXIT_DEGENERATE};

#[derive(Parser)]
#[command(name = "gd2p", version, about = "Hand-pose generation for nonprehensile pushing")]
struct Cli {
    /// Worker threads (defaults to the number of cores). Output bytes do
    /// not depend on this.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled pose dataset from a run manifest.
    GenData {
        /// Run manifest (TOML).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the manifest object list (comma-separated manifest paths).
        #[arg(long, value_delimiter = ',')]
        objects: Option<Vec<String>>,
        /// Override the manifest directions, e.g. "1,0;0,1;-1,0".
        #[arg(long)]
        directions: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the conditional diffusion model on a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Fraction of the successful records to train on, in (0, 1].
        #[arg(long, default_value_t = 1.0)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// BPS cache directory (defaults to `<dataset dir>/bps`).
        #[arg(long)]
        bps: Option<PathBuf>,
    },
    /// Sample pose vectors from a trained model for one object.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        object: PathBuf,
        #[arg(long, default_value_t = 200)]
        n_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample, simulate, and rank candidate poses for one push.
    Rank {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        object: PathBuf,
        /// Push direction "x,y".
        #[arg(long, default_value = "1,0")]
        direction: String,
        #[arg(long, default_value_t = 200)]
        n_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Workspace/rank-weight config (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write a per-pose score CSV.
        #[arg(long)]
        plot: bool,
    },
    /// Plan a multi-push route to a goal around disc obstacles.
    Plan {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Dataset file used as a pose bank instead of a model.
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        object: PathBuf,
        /// Goal position "x,y" (the object starts at the origin).
        #[arg(long)]
        goal: String,
        /// TOML file with `obstacles = [[x, y], ...]`.
        #[arg(long)]
        obstacles: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        n_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a dataset.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit figure-ready CSVs from a dataset.
    PlotData {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .ok();
    }
    match cli.command {
        Command::GenData {
            config,
            seed,
            objects,
            directions,
            out,
        } => gen::cmd_gen_data(&gen::GenArgs {
            manifest: config,
            seed,
            objects,
            directions: directions.as_deref().map(parse_directions).transpose()?,
            out,
        }),
        Command::Train {
            dataset,
            config,
            out,
            fraction,
            seed,
            bps,
        } => train::cmd_train(&train::TrainArgs {
            dataset,
            config,
            out,
            fraction,
            seed,
            bps_dir: bps,
        }),
        Command::Sample {
            model,
            object,
            n_samples,
            seed,
            out,
        } => pipeline::cmd_sample(&pipeline::SampleArgs {
            model,
            object,
            n_samples,
            seed,
            out,
        }),
        Command::Rank {
            model,
            object,
            direction,
            n_samples,
            seed,
            config,
            out,
            plot,
        } => pipeline::cmd_rank(&pipeline::RankArgs {
            model,
            object,
            direction: parse_xy(&direction)?,
            n_samples,
            seed,
            config,
            out,
            plot,
        }),
        Command::Plan {
            model,
            bank,
            object,
            goal,
            obstacles,
            n_samples,
            seed,
            config,
            out,
        } => pipeline::cmd_plan(&pipeline::PlanArgs {
            model,
            bank,
            object,
            goal: parse_xy(&goal)?,
            obstacles,
            n_samples,
            seed,
            config,
            out,
        }),
        Command::Stats { dataset, out } => stats::cmd_stats(&dataset, &out),
        Command::PlotData { dataset, out } => stats::cmd_plot_data(&dataset, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.downcast_ref::<Degenerate>().is_some() {
                eprintln!("gd2p: {e}");
                ExitCode::from(EXIT_DEGENERATE)
            } else {
                eprintln!("gd2p: error: {e:#}");
                ExitCode::FAILURE
            }
        }
    }
}
