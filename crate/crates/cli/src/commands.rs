//! Single-run commands: data generation, training, evaluation, the
//! gamma-SDR curve, and plot-ready signal traces.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};

use sdropt::bss::{self, EvalReport};
use sdropt::dsp;
use sdropt::io as sio;
use sdropt::rnn::{self, Dataset, TrainHistory};

use crate::config::{snr_label, ExperimentConfig};

pub fn clean_path(data_dir: &Path) -> PathBuf {
    data_dir.join("clean.csv")
}

pub fn snr_dir(data_dir: &Path, snr_db: f64) -> PathBuf {
    data_dir.join(format!("snr_{}", snr_label(snr_db)))
}

/// Noise seeds are derived from the run seed so that the training and
/// separation-step noises never coincide.
pub fn noise_seeds(seed: u64) -> (u64, u64) {
    (seed.wrapping_mul(2).wrapping_add(1), seed.wrapping_mul(2).wrapping_add(2))
}

/// Generates the clean signal and, per SNR, the scaled train/test noises and
/// mixtures. The clean signal is shared by the training and separation
/// steps; the noises are drawn from distinct seeds.
pub fn cmd_gen(cfg: &ExperimentConfig, out_dir: &Path, seed: u64) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let clean = dsp::gen_sine(cfg.t_len)?;
    sio::write_signal_csv(&clean_path(out_dir), &clean)?;

    let (train_seed, test_seed) = noise_seeds(seed);
    let noise_train_raw = dsp::gen_uniform_noise(cfg.t_len, train_seed)?;
    let noise_test_raw = dsp::gen_uniform_noise(cfg.t_len, test_seed)?;

    for &snr in &cfg.snr_list {
        let dir = snr_dir(out_dir, snr);
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("creating {}", dir.display()))?;
        let (mixture_train, scaled_train) = dsp::mix_at_snr(&clean, &noise_train_raw, snr)?;
        let (mixture_test, scaled_test) = dsp::mix_at_snr(&clean, &noise_test_raw, snr)?;
        sio::write_signal_csv(&dir.join("noise_train.csv"), &scaled_train)?;
        sio::write_signal_csv(&dir.join("noise_test.csv"), &scaled_test)?;
        sio::write_signal_csv(&dir.join("mixture_train.csv"), &mixture_train)?;
        sio::write_signal_csv(&dir.join("mixture_test.csv"), &mixture_test)?;
    }
    cfg.echo(out_dir)?;
    Ok(())
}

pub struct TrainOutcome {
    pub history: TrainHistory,
    pub runtime_s: f64,
}

/// Trains one model from generated data and writes params, history, and a
/// JSON summary into `out_dir`.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    data_dir: &Path,
    loss_name: &str,
    snr_db: f64,
    seed: u64,
    out_dir: &Path,
) -> Result<TrainOutcome> {
    let loss = cfg.loss_spec(loss_name)?;
    let clean = sio::read_signal_csv(&clean_path(data_dir))?;
    let mixture = sio::read_signal_csv(&snr_dir(data_dir, snr_db).join("mixture_train.csv"))?;
    let dataset = Dataset::from_signals(&mixture, &clean, cfg.window, cfg.shift)?;
    let train_cfg = cfg.train_config(seed);

    let started = Instant::now();
    let (params, history) = rnn::train(&dataset, &loss, &train_cfg)?;
    let runtime_s = started.elapsed().as_secs_f64();

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    sio::write_params_csv(&out_dir.join("params.csv"), &params)?;
    sio::write_history_csv(&out_dir.join("history.csv"), &history)?;
    let last = history.epochs.last().expect("at least one epoch");
    let summary = serde_json::json!({
        "loss": loss_name,
        "snr_in_db": snr_db,
        "seed": seed,
        "windows": dataset.len(),
        "hidden_size": train_cfg.hidden_size,
        "epochs_run": history.epochs.len(),
        "best_epoch": history.best_epoch,
        "best_val_loss": history.best_val_loss,
        "final_train_loss": last.train_loss,
        "final_val_loss": last.val_loss,
        "stopped_early": history.stopped_early,
        "degenerate_segments": history.diag.degenerate_segments,
        "floored_entries": history.diag.floored_entries,
        "runtime_s": runtime_s,
    });
    std::fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )
    .with_context(|| format!("writing {}", out_dir.join("summary.json").display()))?;
    cfg.echo(out_dir)?;
    Ok(TrainOutcome { history, runtime_s })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Bypass {
    /// Score the clean signal itself (oracle upper bound).
    Clean,
    /// Score the unprocessed mixture (identity lower bound).
    Mixture,
}

pub struct EvalArgs<'a> {
    pub model: Option<&'a Path>,
    pub data_dir: &'a Path,
    pub snr_db: f64,
    pub seed: u64,
    pub eval_g: usize,
    pub window: usize,
    pub shift: usize,
    pub bypass: Option<Bypass>,
    pub loss_label: Option<&'a str>,
}

/// Scores one estimate (a trained model, or a bypass signal) against the
/// clean reference and the scaled test noise.
pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let clean = sio::read_signal_csv(&clean_path(args.data_dir))?;
    let dir = snr_dir(args.data_dir, args.snr_db);
    let mixture = sio::read_signal_csv(&dir.join("mixture_test.csv"))?;
    let noise = sio::read_signal_csv(&dir.join("noise_test.csv"))?;

    let started = Instant::now();
    let (est, label) = match args.bypass {
        Some(Bypass::Clean) => (clean.clone(), "bypass_clean"),
        Some(Bypass::Mixture) => (mixture.clone(), "bypass_mixture"),
        None => {
            let model = args
                .model
                .context("--model is required unless a bypass is selected")?;
            let params = sio::read_params_csv(model)?;
            (
                rnn::infer(&params, &mixture, args.window, args.shift)?,
                "model",
            )
        }
    };
    let sdr_db = bss::sdr(&clean, &est, args.eval_g)?;
    let sir_db = bss::sir(&clean, &noise, &est, args.eval_g)?;
    let runtime_s = started.elapsed().as_secs_f64();

    Ok(EvalReport {
        loss_kind: args.loss_label.unwrap_or(label).to_string(),
        snr_in_db: args.snr_db,
        seed: args.seed,
        sdr_db,
        sir_db,
        runtime_s,
    })
}

/// Emits `gamma,sdr_db` rows over an inclusive linear grid.
pub fn cmd_curve(gamma_min: f64, gamma_max: f64, steps: usize, out: &Path) -> Result<()> {
    if !(gamma_min > 0.0 && gamma_min < gamma_max && gamma_max < 1.0) {
        bail!("require 0 < gamma_min < gamma_max < 1, got [{gamma_min}, {gamma_max}]");
    }
    if steps < 2 {
        bail!("steps must be at least 2");
    }
    let gammas: Vec<f64> = (0..steps)
        .map(|i| gamma_min + (gamma_max - gamma_min) * i as f64 / (steps - 1) as f64)
        .collect();
    let curve = bss::sdr_gamma_curve(&gammas)?;
    let mut text = String::from("gamma,sdr_db\n");
    for (gamma, sdr_db) in curve {
        let mut db = format!("{sdr_db:.6}");
        if db == "-0.000000" {
            db = "0.000000".into();
        }
        let _ = writeln!(text, "{gamma},{db}");
    }
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

/// Emits aligned `index,clean,mixture,estimate` columns for the full test
/// signal of one SNR condition.
pub fn cmd_trace(
    model: &Path,
    data_dir: &Path,
    snr_db: f64,
    window: usize,
    shift: usize,
    out: &Path,
) -> Result<()> {
    let clean = sio::read_signal_csv(&clean_path(data_dir))?;
    let mixture = sio::read_signal_csv(&snr_dir(data_dir, snr_db).join("mixture_test.csv"))?;
    let params = sio::read_params_csv(model)?;
    let est = rnn::infer(&params, &mixture, window, shift)?;

    let mut text = String::from("index,clean,mixture,estimate\n");
    for (i, ((c, m), e)) in clean.iter().zip(&mixture).zip(&est).enumerate() {
        let _ = writeln!(text, "{i},{c},{m},{e}");
    }
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}
