//! CLI for the bi-fidelity experiment harness.
//!
//! Every subcommand reads a flat key=value config and writes CSV tables plus
//! a run manifest into the output directory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bifi_core::bifi::persist::{load_surrogate, save_surrogate};
use bifi_harness::config::{fmt_f64, ExperimentConfig};
use bifi_harness::experiments::{
    offline_call_audit, run_bifi_eval, run_convergence_in_n, run_eps_sweep, run_offline,
    run_order_study,
};
use bifi_harness::report;

#[derive(Parser)]
#[command(
    name = "bifi",
    about = "Bi-fidelity stochastic collocation experiments for multiscale kinetic equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a surrogate: low-fidelity sweep, greedy selection, N
    /// high-fidelity runs; persists the surrogate directory.
    Offline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a persisted surrogate on fresh test samples against the
    /// high-fidelity reference.
    BifiEval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Surrogate directory (defaults to <out>/surrogate)
        #[arg(long)]
        surrogate: Option<PathBuf>,
    },
    /// Convergence study in the number of high-fidelity runs N.
    ConvN {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error components across the Knudsen numbers in eps_list.
    EpsSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mesh refinement study of the coarse low-fidelity model.
    OrderStudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> bifi_core::Result<()> {
    match cli.command {
        Command::Offline { config, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let out = out_dir(&cfg, out)?;
            let eps = cfg.eps_list[0];
            let outcome = run_offline(&cfg, eps)?;
            offline_call_audit(&outcome, &cfg)?;
            save_surrogate(&out.join("surrogate"), &outcome.surrogate)?;
            let pivot_rows: Vec<Vec<String>> = outcome
                .surrogate
                .basis
                .indices
                .iter()
                .zip(&outcome.pivots)
                .enumerate()
                .map(|(step, (idx, pivot))| {
                    vec![step.to_string(), idx.to_string(), fmt_f64(*pivot)]
                })
                .collect();
            report::write_csv(&out.join("pivots.csv"), "step,candidate,pivot", &pivot_rows)?;
            report::write_manifest(
                &out.join("manifest.txt"),
                "offline",
                &cfg,
                &[
                    ("low_solves", outcome.low_calls),
                    ("high_solves", outcome.high_calls),
                ],
                &[("n_selected", outcome.surrogate.n().to_string())],
            )?;
            println!(
                "offline: selected {} of {} candidates; surrogate in {}",
                outcome.surrogate.n(),
                cfg.m_train,
                out.join("surrogate").display()
            );
        }
        Command::BifiEval {
            config,
            out,
            surrogate,
        } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let out = out_dir(&cfg, out)?;
            let surrogate_dir = surrogate.unwrap_or_else(|| out.join("surrogate"));
            let surrogate = load_surrogate(&surrogate_dir)?;
            let outcome = run_bifi_eval(&cfg, &surrogate)?;
            report::eval_csv(&out.join("eval.csv"), &outcome)?;
            report::write_manifest(
                &out.join("manifest.txt"),
                "bifi-eval",
                &cfg,
                &[
                    ("low_solves", outcome.low_calls),
                    ("high_solves", outcome.high_calls),
                ],
                &[("aggregate_error", fmt_f64(outcome.aggregate))],
            )?;
            println!(
                "bifi-eval: {} samples, aggregate error {:.3e}",
                outcome.rows.len(),
                outcome.aggregate
            );
        }
        Command::ConvN { config, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let out = out_dir(&cfg, out)?;
            let outcome = run_convergence_in_n(&cfg)?;
            report::conv_csv(&out.join("conv_n.csv"), &outcome)?;
            report::write_manifest(
                &out.join("manifest.txt"),
                "conv-n",
                &cfg,
                &[
                    ("high_solves_offline", outcome.high_calls_offline),
                    ("test_samples", outcome.samples),
                    ("coeff_bound_violations", outcome.coeff_bound_violations),
                    ("triangle_violations", outcome.triangle_violations),
                ],
                &[("truncated", outcome.truncated.to_string())],
            )?;
            for row in &outcome.rows {
                println!(
                    "N = {:3}: projection {:.3e}, bi-fidelity {:.3e}",
                    row.n, row.projection_error, row.bifi_error
                );
            }
        }
        Command::EpsSweep { config, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let out = out_dir(&cfg, out)?;
            let outcome = run_eps_sweep(&cfg)?;
            report::eps_csv(&out.join("eps_sweep.csv"), &outcome)?;
            report::write_manifest(
                &out.join("manifest.txt"),
                "eps-sweep",
                &cfg,
                &[
                    ("test_samples", outcome.samples),
                    ("coeff_bound_violations", outcome.coeff_bound_violations),
                    ("triangle_violations", outcome.triangle_violations),
                    ("structure_violations", outcome.structure_violations),
                ],
                &[],
            )?;
            for row in &outcome.rows {
                if row.skipped {
                    println!("eps = {:9.3e}: skipped (CFL-infeasible)", row.eps);
                } else {
                    println!(
                        "eps = {:9.3e}: gap {:.3e}, projection {:.3e}, bi-fidelity {:.3e}",
                        row.eps, row.model_gap, row.projection_error, row.bifi_error
                    );
                }
            }
        }
        Command::OrderStudy { config, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let out = out_dir(&cfg, out)?;
            let outcome = run_order_study(&cfg)?;
            report::order_csv(&out.join("order_study.csv"), &outcome)?;
            report::write_manifest(
                &out.join("manifest.txt"),
                "order-study",
                &cfg,
                &[("levels", outcome.rows.len())],
                &[("observed_order", fmt_f64(outcome.observed_order))],
            )?;
            println!("observed order: {:.3}", outcome.observed_order);
        }
    }
    Ok(())
}

fn out_dir(cfg: &ExperimentConfig, cli_out: Option<PathBuf>) -> bifi_core::Result<PathBuf> {
    let dir = cli_out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| Path::new("out").to_path_buf());
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
