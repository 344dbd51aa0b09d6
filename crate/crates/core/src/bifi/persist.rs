//! Surrogate persistence: a directory of paired snapshot files plus an index
//! file listing the selected points gamma_N and the greedy pivots.
//!
//! Layout:
//! ```text
//! <dir>/index.txt     n=, tol=, lambda_min=, gamma=, pivots=
//! <dir>/low_000.snap  ... low_{N-1}.snap   (selection order)
//! <dir>/high_000.snap ... high_{N-1}.snap
//! ```

use std::fs;
use std::path::Path;

use crate::bifi::{gramian, BiFiSurrogate, GreedyBasis, Snapshot};
use crate::error::{Error, Result};

pub fn save_surrogate(dir: &Path, surrogate: &BiFiSurrogate) -> Result<()> {
    fs::create_dir_all(dir)?;
    let n = surrogate.n();
    let mut index = String::new();
    index.push_str(&format!("n={n}\n"));
    index.push_str(&format!("tol={:.16e}\n", surrogate.basis.tol));
    index.push_str(&format!("lambda_min={:.16e}\n", surrogate.lambda_min));
    index.push_str(&format!(
        "gamma={}\n",
        surrogate
            .basis
            .indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    ));
    index.push_str(&format!(
        "pivots={}\n",
        surrogate
            .basis
            .pivots
            .iter()
            .map(|p| format!("{p:.16e}"))
            .collect::<Vec<_>>()
            .join(" ")
    ));
    fs::write(dir.join("index.txt"), index)?;
    for (k, (low, high)) in surrogate.low.iter().zip(&surrogate.high).enumerate() {
        low.save(&dir.join(format!("low_{k:03}.snap")))?;
        high.save(&dir.join(format!("high_{k:03}.snap")))?;
    }
    Ok(())
}

/// Load a surrogate, recomputing the Cholesky factor of the selected Gramian
/// from the stored low-fidelity snapshots. The factor of the selected points
/// in selection order is unique, so this reproduces the offline factor; the
/// stored pivots are cross-checked against the recomputed diagonal.
pub fn load_surrogate(dir: &Path) -> Result<BiFiSurrogate> {
    let index = fs::read_to_string(dir.join("index.txt"))?;
    let mut n = None;
    let mut tol = None;
    let mut gamma: Option<Vec<usize>> = None;
    let mut pivots: Option<Vec<f64>> = None;
    for line in index.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, val) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("malformed index line `{line}`")))?;
        match key.trim() {
            "n" => {
                n = Some(
                    val.trim()
                        .parse::<usize>()
                        .map_err(|e| Error::Format(format!("bad n `{val}`: {e}")))?,
                )
            }
            "tol" => {
                tol = Some(
                    val.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Format(format!("bad tol `{val}`: {e}")))?,
                )
            }
            "lambda_min" => {} // informational; recomputed on assemble
            "gamma" => {
                gamma = Some(
                    val.split_whitespace()
                        .map(|t| {
                            t.parse::<usize>()
                                .map_err(|e| Error::Format(format!("bad index `{t}`: {e}")))
                        })
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            "pivots" => {
                pivots = Some(
                    val.split_whitespace()
                        .map(|t| {
                            t.parse::<f64>()
                                .map_err(|e| Error::Format(format!("bad pivot `{t}`: {e}")))
                        })
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            other => return Err(Error::Format(format!("unknown index key `{other}`"))),
        }
    }
    let n = n.ok_or_else(|| Error::Format("index missing n".into()))?;
    let tol = tol.ok_or_else(|| Error::Format("index missing tol".into()))?;
    let gamma = gamma.ok_or_else(|| Error::Format("index missing gamma".into()))?;
    let pivots = pivots.ok_or_else(|| Error::Format("index missing pivots".into()))?;
    if gamma.len() != n || pivots.len() != n {
        return Err(Error::Format(format!(
            "index declares n={n} but gamma has {} and pivots {}",
            gamma.len(),
            pivots.len()
        )));
    }

    let mut low = Vec::with_capacity(n);
    let mut high = Vec::with_capacity(n);
    for k in 0..n {
        low.push(Snapshot::load(&dir.join(format!("low_{k:03}.snap")))?);
        high.push(Snapshot::load(&dir.join(format!("high_{k:03}.snap")))?);
    }

    let factor = cholesky_in_order(&gramian(&low)?)?;
    for (k, piv) in pivots.iter().enumerate() {
        let diag_sq = factor[k][k] * factor[k][k];
        if (diag_sq - piv).abs() > 1e-6 * pivots[0].max(1e-300) {
            return Err(Error::Format(format!(
                "stored pivot {piv} disagrees with snapshot Gramian ({diag_sq}) at step {k}"
            )));
        }
    }

    BiFiSurrogate::assemble(
        GreedyBasis {
            indices: gamma,
            factor,
            pivots,
            tol,
        },
        low,
        high,
    )
}

/// Plain Cholesky in the given row order (no pivoting).
#[allow(clippy::needless_range_loop)]
fn cholesky_in_order(g: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = g.len();
    let mut l: Vec<Vec<f64>> = (0..n).map(|k| vec![0.0; k + 1]).collect();
    for i in 0..n {
        for j in 0..=i {
            let mut v = g[i][j];
            for k in 0..j {
                v -= l[i][k] * l[j][k];
            }
            if i == j {
                if v <= 0.0 {
                    return Err(Error::SingularGramian(format!(
                        "non-positive pivot {v} at step {i} while refactoring"
                    )));
                }
                l[i][j] = v.sqrt();
            } else {
                l[i][j] = v / l[j][j];
            }
        }
    }
    Ok(l)
}
