//! CSV tables and the run manifest. Numbers are written with 17 significant
//! digits and rows in deterministic order, so outputs are reproducible
//! bit-for-bit from (config, seed).

use std::fs;
use std::path::Path;

use bifi_core::error::Result;

use crate::config::{fmt_f64, ExperimentConfig};
use crate::experiments::{ConvOutcome, EpsOutcome, EvalOutcome, OrderOutcome};

pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn conv_csv(path: &Path, outcome: &ConvOutcome) -> Result<()> {
    let rows: Vec<Vec<String>> = outcome
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt_f64(r.projection_error),
                fmt_f64(r.bifi_error),
                fmt_f64(r.lambda_min),
                fmt_f64(r.max_coeff_norm),
            ]
        })
        .collect();
    write_csv(
        path,
        "n,projection_error,bifi_error,lambda_min,max_coeff_norm",
        &rows,
    )
}

pub fn eps_csv(path: &Path, outcome: &EpsOutcome) -> Result<()> {
    let rows: Vec<Vec<String>> = outcome
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.eps),
                fmt_f64(r.model_gap),
                fmt_f64(r.projection_error),
                fmt_f64(r.bifi_error),
                fmt_f64(r.structure_bound),
                fmt_f64(r.lambda_min),
                fmt_f64(r.max_coeff_norm),
                r.skipped.to_string(),
            ]
        })
        .collect();
    write_csv(
        path,
        "epsilon,model_gap,projection_error,bifi_error,structure_bound,lambda_min,max_coeff_norm,skipped",
        &rows,
    )
}

pub fn order_csv(path: &Path, outcome: &OrderOutcome) -> Result<()> {
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (k, r) in outcome.rows.iter().enumerate() {
        let pairwise = if k == 0 {
            String::new()
        } else {
            let prev = &outcome.rows[k - 1];
            fmt_f64((prev.error / r.error).ln() / (prev.dx / r.dx).ln())
        };
        rows.push(vec![
            r.n_x.to_string(),
            fmt_f64(r.dx),
            fmt_f64(r.dt),
            fmt_f64(r.error),
            pairwise,
        ]);
    }
    write_csv(path, "nx,dx,dt,error,observed_order", &rows)
}

pub fn eval_csv(path: &Path, outcome: &EvalOutcome) -> Result<()> {
    let rows: Vec<Vec<String>> = outcome
        .rows
        .iter()
        .map(|r| {
            vec![
                r.sample.to_string(),
                fmt_f64(r.error),
                fmt_f64(r.coeff_norm),
                fmt_f64(r.bound),
                r.in_bound.to_string(),
            ]
        })
        .collect();
    write_csv(path, "sample,error,coeff_norm,bound,in_bound", &rows)
}

/// Config echo, seed and solver call counts; no timestamps, so the manifest
/// is as reproducible as the tables.
pub fn write_manifest(
    path: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    counts: &[(&str, usize)],
    extra: &[(&str, String)],
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("command={command}\n"));
    out.push_str(&format!("seed={}\n", cfg.seed));
    out.push_str(&format!("test_seed={}\n", cfg.test_seed()));
    for (key, val) in counts {
        out.push_str(&format!("{key}={val}\n"));
    }
    for (key, val) in extra {
        out.push_str(&format!("{key}={val}\n"));
    }
    for (key, val) in cfg.canonical_items() {
        out.push_str(&format!("config.{key}={val}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}
