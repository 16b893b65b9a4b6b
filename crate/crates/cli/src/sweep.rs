//! The full experiment: every (loss, SNR, seed) combination trained and
//! scored on a worker pool, merged into deterministic result tables.
//!
//! `results.csv` holds only seeded, bit-reproducible columns; wall-clock
//! runtimes go to `runtimes.csv` and the per-run reports, which carry the
//! full six-column eval row.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;

use sdropt::bss::EvalReport;
use sdropt::io as sio;

use crate::commands::{cmd_eval, cmd_gen, cmd_train, EvalArgs};
use crate::config::{snr_label, ExperimentConfig};

#[derive(Debug, Clone)]
struct Task {
    index: usize,
    loss: String,
    snr_db: f64,
    seed: u64,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<EvalReport>,
    pub failures: Vec<(Task2, String)>,
}

pub type Task2 = (String, f64, u64);

pub fn data_dir_for_seed(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join("data").join(format!("seed_{seed}"))
}

pub fn run_dir(out_dir: &Path, loss: &str, snr_db: f64, seed: u64) -> PathBuf {
    out_dir
        .join("runs")
        .join(format!("{loss}_snr{}_seed{seed}", snr_label(snr_db)))
}

pub fn cmd_sweep(cfg: &ExperimentConfig, out_dir: &Path, jobs: Option<usize>) -> Result<SweepOutcome> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    cfg.echo(out_dir)?;

    // data depends only on (seed, snr); generate it once per seed up front
    for &seed in &cfg.seeds {
        cmd_gen(cfg, &data_dir_for_seed(out_dir, seed), seed)?;
    }

    let mut tasks = Vec::new();
    for loss in &cfg.losses {
        for &snr_db in &cfg.snr_list {
            for &seed in &cfg.seeds {
                tasks.push(Task {
                    index: tasks.len(),
                    loss: loss.clone(),
                    snr_db,
                    seed,
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        }))
        .build()
        .context("building the worker pool")?;

    let total = tasks.len();
    let results: Vec<(usize, std::result::Result<EvalReport, String>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| {
                let outcome = run_one(cfg, out_dir, task);
                match &outcome {
                    Ok(row) => eprintln!(
                        "[{}/{}] {} snr {} seed {}: SDR {:.2} dB, SIR {:.2} dB",
                        task.index + 1,
                        total,
                        task.loss,
                        snr_label(task.snr_db),
                        task.seed,
                        row.sdr_db,
                        row.sir_db
                    ),
                    Err(e) => eprintln!(
                        "[{}/{}] {} snr {} seed {}: FAILED: {e:#}",
                        task.index + 1,
                        total,
                        task.loss,
                        snr_label(task.snr_db),
                        task.seed
                    ),
                }
                (task.index, outcome.map_err(|e| format!("{e:#}")))
            })
            .collect()
    });

    let mut ordered: Vec<(usize, std::result::Result<EvalReport, String>)> = results;
    ordered.sort_by_key(|(i, _)| *i);

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (i, res) in ordered {
        let task = &tasks[i];
        match res {
            Ok(row) => rows.push(row),
            Err(msg) => failures.push(((task.loss.clone(), task.snr_db, task.seed), msg)),
        }
    }

    write_results_csv(&out_dir.join("results.csv"), &rows)?;
    write_runtimes_csv(&out_dir.join("runtimes.csv"), &rows)?;
    write_summary_csv(&out_dir.join("summary.csv"), cfg, &rows)?;
    write_tables_md(&out_dir.join("tables.md"), cfg, &rows)?;
    if !failures.is_empty() {
        let report: Vec<_> = failures
            .iter()
            .map(|((loss, snr, seed), msg)| {
                serde_json::json!({"loss": loss, "snr_in_db": snr, "seed": seed, "error": msg})
            })
            .collect();
        std::fs::write(
            out_dir.join("failures.json"),
            serde_json::to_string_pretty(&report)? + "\n",
        )?;
    }

    Ok(SweepOutcome { rows, failures })
}

fn run_one(cfg: &ExperimentConfig, out_dir: &Path, task: &Task) -> Result<EvalReport> {
    let data_dir = data_dir_for_seed(out_dir, task.seed);
    let run_dir = run_dir(out_dir, &task.loss, task.snr_db, task.seed);
    let started = Instant::now();
    cmd_train(cfg, &data_dir, &task.loss, task.snr_db, task.seed, &run_dir)?;
    let mut report = cmd_eval(&EvalArgs {
        model: Some(&run_dir.join("params.csv")),
        data_dir: &data_dir,
        snr_db: task.snr_db,
        seed: task.seed,
        eval_g: cfg.eval_g,
        window: cfg.window,
        shift: cfg.shift,
        bypass: None,
        loss_label: Some(&task.loss),
    })?;
    report.runtime_s = started.elapsed().as_secs_f64();
    sio::write_reports_csv(&run_dir.join("report.csv"), &[report.clone()])?;
    Ok(report)
}

/// Seeded, bit-reproducible columns only.
fn write_results_csv(path: &Path, rows: &[EvalReport]) -> Result<()> {
    let mut text = String::from("loss,snr_in_db,seed,sdr_db,sir_db\n");
    for r in rows {
        let _ = writeln!(
            text,
            "{},{:.6},{},{:.6},{:.6}",
            r.loss_kind, r.snr_in_db, r.seed, r.sdr_db, r.sir_db
        );
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_runtimes_csv(path: &Path, rows: &[EvalReport]) -> Result<()> {
    let mut text = String::from("loss,snr_in_db,seed,runtime_s\n");
    for r in rows {
        let _ = writeln!(
            text,
            "{},{:.6},{},{:.6}",
            r.loss_kind, r.snr_in_db, r.seed, r.runtime_s
        );
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

fn per_condition<'a>(
    cfg: &'a ExperimentConfig,
    rows: &'a [EvalReport],
) -> impl Iterator<Item = (&'a str, f64, Vec<&'a EvalReport>)> + 'a {
    cfg.losses.iter().flat_map(move |loss| {
        cfg.snr_list.iter().map(move |&snr| {
            let selected: Vec<&EvalReport> = rows
                .iter()
                .filter(|r| r.loss_kind == *loss && r.snr_in_db == snr)
                .collect();
            (loss.as_str(), snr, selected)
        })
    })
}

fn write_summary_csv(path: &Path, cfg: &ExperimentConfig, rows: &[EvalReport]) -> Result<()> {
    let mut text =
        String::from("loss,snr_in_db,seeds,mean_sdr_db,std_sdr_db,mean_sir_db,std_sir_db\n");
    for (loss, snr, selected) in per_condition(cfg, rows) {
        if selected.is_empty() {
            continue;
        }
        let sdr: Vec<f64> = selected.iter().map(|r| r.sdr_db).collect();
        let sir: Vec<f64> = selected.iter().map(|r| r.sir_db).collect();
        let (ms, ss) = mean_std(&sdr);
        let (mi, si) = mean_std(&sir);
        let _ = writeln!(
            text,
            "{},{:.6},{},{:.6},{:.6},{:.6},{:.6}",
            loss,
            snr,
            selected.len(),
            ms,
            ss,
            mi,
            si
        );
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_tables_md(path: &Path, cfg: &ExperimentConfig, rows: &[EvalReport]) -> Result<()> {
    let mut text = String::from("# Output SDR / SIR per input SNR\n");
    for &snr in &cfg.snr_list {
        let _ = write!(
            text,
            "\n## Input SNR {} dB\n\n| loss | SDR [dB] | SIR [dB] |\n|---|---|---|\n",
            snr_label(snr)
        );
        for loss in &cfg.losses {
            let selected: Vec<&EvalReport> = rows
                .iter()
                .filter(|r| r.loss_kind == *loss && r.snr_in_db == snr)
                .collect();
            if selected.is_empty() {
                let _ = writeln!(text, "| {loss} | - | - |");
                continue;
            }
            let sdr: Vec<f64> = selected.iter().map(|r| r.sdr_db).collect();
            let sir: Vec<f64> = selected.iter().map(|r| r.sir_db).collect();
            let (ms, ss) = mean_std(&sdr);
            let (mi, si) = mean_std(&sir);
            let _ = writeln!(
                text,
                "| {loss} | {ms:.1} ± {ss:.1} | {mi:.1} ± {si:.1} |"
            );
        }
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
