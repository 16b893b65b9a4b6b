//! Experiment front end: generate data, train under a chosen objective,
//! score SDR/SIR, sweep the full loss x SNR x seed grid, and emit
//! plot-ready CSV artifacts.
//!
//! Exit codes: 0 on success, 1 when some sweep runs failed, 2 on invalid
//! configuration or I/O problems.

mod commands;
mod config;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{cmd_curve, cmd_eval, cmd_gen, cmd_trace, cmd_train, Bypass, EvalArgs};
use config::ExperimentConfig;
use sweep::cmd_sweep;

#[derive(Parser)]
#[command(name = "sdropt", version, about = "Source enhancement by direct SDR maximization")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the clean signal, noises, and mixtures for every SNR.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train one model on generated data.
    Train {
        /// Directory produced by `gen`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// One of l1, l2, is, neg_stoi, neg_sdr.
        #[arg(long)]
        loss: String,
        #[arg(long)]
        snr: f64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score a trained model (or a bypass signal) on the test mixture.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        snr: f64,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed label recorded in the report row.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the evaluation projector delay.
        #[arg(long)]
        eval_g: Option<usize>,
        /// Write the one-row report CSV here (also printed to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Score a reference signal instead of a model.
        #[arg(long, value_enum)]
        bypass: Option<Bypass>,
        /// Loss label recorded in the report row.
        #[arg(long)]
        loss: Option<String>,
    },
    /// Run the full loss x SNR x seed grid and merge the result tables.
    Sweep {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Worker pool size (defaults to the available cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Emit the closed-form gamma-SDR curve.
    Curve {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        gamma_min: f64,
        #[arg(long, default_value_t = 0.99)]
        gamma_max: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// Emit aligned clean/mixture/estimate columns for plotting.
    Trace {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        snr: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    match Cli::parse().cmd {
        Cmd::Gen { out, config, seed } => {
            let cfg = ExperimentConfig::load_or_default(config.as_deref())?;
            cmd_gen(&cfg, &out, seed)?;
            eprintln!("generated data for {} SNR conditions in {}", cfg.snr_list.len(), out.display());
        }
        Cmd::Train {
            data,
            out,
            loss,
            snr,
            config,
            seed,
        } => {
            let cfg = ExperimentConfig::load_or_default(config.as_deref())?;
            let outcome = cmd_train(&cfg, &data, &loss, snr, seed, &out)?;
            let last = outcome.history.epochs.last().expect("at least one epoch");
            eprintln!(
                "trained {loss} at snr {snr}: {} epochs (best {} at val {:.6}), final train {:.6}, {:.1}s",
                outcome.history.epochs.len(),
                outcome.history.best_epoch,
                outcome.history.best_val_loss,
                last.train_loss,
                outcome.runtime_s
            );
        }
        Cmd::Eval {
            model,
            data,
            snr,
            config,
            seed,
            eval_g,
            out,
            bypass,
            loss,
        } => {
            let cfg = ExperimentConfig::load_or_default(config.as_deref())?;
            let report = cmd_eval(&EvalArgs {
                model: model.as_deref(),
                data_dir: &data,
                snr_db: snr,
                seed,
                eval_g: eval_g.unwrap_or(cfg.eval_g),
                window: cfg.window,
                shift: cfg.shift,
                bypass,
                loss_label: loss.as_deref(),
            })?;
            if let Some(path) = out {
                sdropt::io::write_reports_csv(&path, &[report.clone()])?;
            }
            println!("{}", sdropt::bss::EvalReport::CSV_HEADER);
            println!("{}", report.csv_row());
        }
        Cmd::Sweep { out, config, jobs } => {
            let cfg = ExperimentConfig::load_or_default(config.as_deref())?;
            let outcome = cmd_sweep(&cfg, &out, jobs)?;
            eprintln!(
                "sweep finished: {} rows, {} failures; results in {}",
                outcome.rows.len(),
                outcome.failures.len(),
                out.display()
            );
            if !outcome.failures.is_empty() {
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Curve {
            out,
            gamma_min,
            gamma_max,
            steps,
        } => {
            cmd_curve(gamma_min, gamma_max, steps, &out)?;
            eprintln!("wrote {steps} curve rows to {}", out.display());
        }
        Cmd::Trace {
            model,
            data,
            snr,
            out,
            config,
        } => {
            let cfg = ExperimentConfig::load_or_default(config.as_deref())?;
            cmd_trace(&model, &data, snr, cfg.window, cfg.shift, &out)?;
            eprintln!("wrote trace to {}", out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
