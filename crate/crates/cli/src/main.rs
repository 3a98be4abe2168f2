use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use lens_cli::commands;
use lens_cli::config::Config;
use lens_cli::synth::SynthSpec;
use lens_cli::Result;

#[derive(Parser)]
#[command(
    name = "lens",
    version,
    about = "Event-camera place recognition: train a compact spiking network, \
             localize traverses, and evaluate against the SAD baseline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a reference event traverse.
    Train {
        /// Reference traverse event file.
        #[arg(long)]
        events: PathBuf,
        /// Config file (defaults apply when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Training log path (default: <out>.log).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Dump the selected count frames into this directory.
        #[arg(long)]
        dump_frames: Option<PathBuf>,
    },
    /// Localize a query traverse against a trained model.
    Localize {
        #[arg(long)]
        model: PathBuf,
        /// Query traverse event file.
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Sequence-matching length (overrides the config).
        #[arg(long = "seq-len")]
        seq_len: Option<usize>,
        /// Spike-count vectors averaged per query (overrides the config).
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for matrices and matches.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute Recall@N, PR curves, and AUC for similarity matrices.
    Evaluate {
        /// Similarity matrix CSV. Repeat to evaluate several side by side.
        #[arg(long = "matrix", required = true)]
        matrices: Vec<PathBuf>,
        /// Ground-truth file 'query,reference' (default: diagonal).
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Place tolerance for a correct match.
        #[arg(long, default_value_t = 2)]
        tolerance: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write pr_curves.svg.
        #[arg(long)]
        plot: bool,
    },
    /// Sum-of-absolute-differences matcher over the same frames.
    Baseline {
        /// Reference traverse event file.
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Query traverse event file.
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "seq-len")]
        seq_len: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Dump reference frames and report the bytes SAD must store.
        #[arg(long)]
        dump_frames: bool,
    },
    /// Generate a synthetic reference/query traverse pair.
    Synth {
        #[arg(long)]
        places: usize,
        /// Network input pixels (perfect square).
        #[arg(long)]
        pixels: usize,
        /// Fraction of pixels perturbed in the query pass.
        #[arg(long)]
        noise: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Peak per-pixel event rate per window.
        #[arg(long, default_value_t = 30.0)]
        rate_max: f64,
        /// Fraction of pixels carrying scene structure per place.
        #[arg(long, default_value_t = 0.2)]
        active_fraction: f64,
    },
    /// Re-run train+localize over a parameter grid.
    Sweep {
        /// Grid file (ref/query paths plus pixels, feat_multiplier, seq_len lists).
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<Config> {
    match path {
        Some(p) => Config::read_file(p),
        None => Ok(Config::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            events,
            config,
            out,
            seed,
            log,
            dump_frames,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            commands::cmd_train(&cfg, &events, &out, log.as_deref(), dump_frames.as_deref())?;
        }
        Command::Localize {
            model,
            events,
            config,
            seq_len,
            bins,
            seed,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(l) = seq_len {
                cfg.seq_len = l;
            }
            if let Some(b) = bins {
                cfg.bins = b;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            commands::cmd_localize(&cfg, &model, &events, &out)?;
        }
        Command::Evaluate {
            matrices,
            gt,
            tolerance,
            out,
            plot,
        } => {
            commands::cmd_evaluate(&matrices, gt.as_deref(), tolerance, &out, plot)?;
        }
        Command::Baseline {
            reference,
            query,
            config,
            seq_len,
            out,
            dump_frames,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(l) = seq_len {
                cfg.seq_len = l;
            }
            cfg.validate()?;
            commands::cmd_baseline(&cfg, &reference, &query, &out, dump_frames)?;
        }
        Command::Synth {
            places,
            pixels,
            noise,
            seed,
            out,
            rate_max,
            active_fraction,
        } => {
            let spec = SynthSpec {
                places,
                pixels,
                noise,
                seed,
                rate_max,
                active_fraction,
            };
            commands::cmd_synth(&spec, &out)?;
        }
        Command::Sweep { grid, out } => {
            commands::cmd_sweep(&grid, &out)?;
        }
    }
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help/--version print and succeed; argument mistakes are
            // validation failures.
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
