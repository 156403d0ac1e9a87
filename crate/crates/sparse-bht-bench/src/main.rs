//! `sbht`: seeded benchmark sweeps for sparse recovery by iterative
//! hypothesis testing.
//!
//! # Overview
//! Thin shell over [`sparse_bht_bench`]: resolves layered configuration
//! (defaults < `--config` file < flags), hands off to the experiment
//! drivers, and writes every produced artifact under the output directory:
//! `rows.csv`, `summary.csv`, `plotdata/*.csv`, experiment-specific extras,
//! and `config.resolved` for provenance.

use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use sparse_bht_bench::config::{Ensemble, FileConfig, Settings};
use sparse_bht_bench::experiments::{
    codec_run, diagnose, gen, solve_one, stability, sweep_alpha, sweep_snr, sweep_sparsity,
    timing, ExperimentOutput,
};
use sparse_bht_bench::registry::SolverName;
use sparse_bht_bench::rows::{plotdata_files, rows_csv, summary_csv};

#[derive(Parser)]
#[command(
    name = "sbht",
    version,
    about = "Seeded benchmark sweeps for sparse recovery by iterative hypothesis testing"
)]
struct Cli {
    #[command(flatten)]
    globals: Globals,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Globals {
    /// Master seed; every random draw derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trials per grid point.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory for all artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for the sweep pool.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Echo the fully resolved configuration to stdout before running.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Emit serialized instance files plus a manifest.
    Gen,
    /// Solve one instance with one solver and print SNR/support.
    Solve {
        /// Instance file produced by `gen`; absent, a fresh instance is
        /// synthesized from the configured problem.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Solver label (hard-optimal, hard-simple, soft, mp, omp, min-l2).
        #[arg(long, default_value = "hard-optimal")]
        solver: String,
    },
    /// Output SNR versus input SNR under the spiky prior.
    SweepSnr,
    /// Output SNR versus support size with fixed-amplitude spikes.
    SweepSparsity,
    /// Output SNR versus the decay factor (iterative solvers only).
    SweepAlpha,
    /// Monte Carlo check of the per-iteration noise model.
    Diagnose,
    /// Per-atom stability floors over sampled dictionaries.
    Stability {
        /// Dictionary ensemble: dct or uniform.
        #[arg(long)]
        ensemble: Option<String>,
    },
    /// Wall-clock scaling over problem size (n = m/2).
    Timing,
    /// Encode/corrupt/decode message blocks through the parity-check code.
    Codec {
        /// Raw little-endian f64 sample file chunked into message blocks.
        #[arg(long)]
        source: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();

    let mut settings = Settings::default();
    if let Some(path) = &cli.globals.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let file: FileConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config file {}", path.display()))?;
        settings.apply_file(&file)?;
    }
    if let Some(seed) = cli.globals.seed {
        settings.master_seed = seed;
    }
    if let Some(trials) = cli.globals.trials {
        settings.trials = trials;
    }
    if let Some(out) = &cli.globals.out {
        settings.out_dir = out.clone();
    }
    if cli.globals.threads.is_some() {
        settings.threads = cli.globals.threads;
    }
    match &cli.command {
        Command::Stability { ensemble: Some(label) } => {
            settings.stability_ensemble = Ensemble::from_str(label).map_err(anyhow::Error::msg)?;
        }
        Command::Codec { source: Some(path) } => {
            settings.codec.source = Some(path.clone());
        }
        _ => {}
    }
    settings.validate()?;

    if let Some(threads) = settings.threads {
        // Ignore the error from re-initialization (tests or repeated calls).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    if cli.globals.print_config {
        print!("{}", settings.resolved_toml());
    }

    let output = match &cli.command {
        Command::Gen => gen(&settings)?,
        Command::Solve { input, solver } => {
            let solver = SolverName::from_str(solver).map_err(anyhow::Error::msg)?;
            solve_one(&settings, input.as_deref(), solver)?
        }
        Command::SweepSnr => sweep_snr(&settings)?,
        Command::SweepSparsity => sweep_sparsity(&settings)?,
        Command::SweepAlpha => sweep_alpha(&settings)?,
        Command::Diagnose => diagnose(&settings)?,
        Command::Stability { .. } => stability(&settings)?,
        Command::Timing => timing(&settings)?,
        Command::Codec { .. } => codec_run(&settings)?,
    };
    write_output(&settings, output)
}

fn write_output(settings: &Settings, output: ExperimentOutput) -> anyhow::Result<()> {
    let dir = &settings.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.resolved"), settings.resolved_toml())?;

    let mut written = vec!["config.resolved".to_string()];
    let ExperimentOutput {
        rows,
        summaries,
        plot_stem,
        extra_files,
        report,
    } = output;

    if !rows.is_empty() {
        let mut rows = rows;
        fs::write(dir.join("rows.csv"), rows_csv(&mut rows))?;
        written.push(format!("rows.csv ({} rows)", rows.len()));
    }
    if !summaries.is_empty() {
        fs::write(dir.join("summary.csv"), summary_csv(&summaries))?;
        written.push("summary.csv".to_string());
    }
    if let Some(stem) = plot_stem {
        let plot_dir = dir.join("plotdata");
        fs::create_dir_all(&plot_dir)?;
        for (name, body) in plotdata_files(stem, &summaries) {
            fs::write(plot_dir.join(&name), body)?;
            written.push(format!("plotdata/{name}"));
        }
    }
    for (rel, bytes) in extra_files {
        let path = dir.join(&rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, bytes)?;
        written.push(rel);
    }

    if let Some(report) = report {
        println!("{report}");
    }
    println!("out: {} [{}]", dir.display(), written.join(", "));
    Ok(())
}
