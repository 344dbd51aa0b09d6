//! Solution snapshots: flat value vectors with grid metadata and the
//! quadrature weights that define their discrete L2 inner product.
//!
//! Persistence format: `#`-prefixed header lines (`model=`, `nx=`, `nv=`,
//! `dz=`, `z=`, `weights=`) followed by one value per line, row-major over
//! the declared axes (x outer, v inner).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::randomspace::ParameterVector;

/// One solution vector u(z) of a model run, plus the metadata needed to take
/// inner products against other snapshots.
#[derive(Debug, Clone)]
pub struct Snapshot {
    /// Model identifier, e.g. "transport" or "acoustic-moments".
    pub model: String,
    /// First axis size (spatial cells).
    pub nx: usize,
    /// Second axis size (velocity nodes or stacked fields); 1 for scalar fields.
    pub nv: usize,
    /// Parameter sample the snapshot was computed at.
    pub z: ParameterVector,
    /// Strictly positive quadrature weights, one per value.
    pub weights: Vec<f64>,
    /// Values, row-major over (x, v).
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn new(
        model: impl Into<String>,
        nx: usize,
        nv: usize,
        z: ParameterVector,
        weights: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != nx * nv {
            return Err(Error::InvalidArgument(format!(
                "snapshot has {} values, declared axes give {}",
                values.len(),
                nx * nv
            )));
        }
        if weights.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "snapshot has {} weights for {} values",
                weights.len(),
                values.len()
            )));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidArgument(
                "snapshot weights must be strictly positive".into(),
            ));
        }
        Ok(Self {
            model: model.into(),
            nx,
            nv,
            z,
            weights,
            values,
        })
    }

    /// Two snapshots can be combined in inner products iff their grids and
    /// weights match.
    pub fn compatible(&self, other: &Snapshot) -> bool {
        self.nx == other.nx && self.nv == other.nv && self.weights == other.weights
    }

    pub fn check_compatible(&self, other: &Snapshot) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "snapshots are not inner-product compatible ({}x{} vs {}x{})",
                self.nx, self.nv, other.nx, other.nv
            )))
        }
    }

    /// Weighted discrete L2 inner product sum_k w_k u_k v_k.
    pub fn inner(&self, other: &Snapshot) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .weights
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(w, (a, b))| w * a * b)
            .sum())
    }

    /// Weighted discrete L2 norm.
    pub fn norm(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Norm of the difference, without allocating the intermediate snapshot.
    pub fn distance(&self, other: &Snapshot) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .weights
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(w, (a, b))| w * (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// Linear combination sum_k c_k s_k, carrying the metadata of `like`.
    pub fn linear_combination(
        c: &[f64],
        snaps: &[Snapshot],
        like: &Snapshot,
        z: ParameterVector,
    ) -> Result<Snapshot> {
        if c.len() != snaps.len() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for {} snapshots",
                c.len(),
                snaps.len()
            )));
        }
        let mut values = vec![0.0; like.values.len()];
        for (ck, s) in c.iter().zip(snaps) {
            like.check_compatible(s)?;
            for (v, sv) in values.iter_mut().zip(&s.values) {
                *v += ck * sv;
            }
        }
        Snapshot::new(
            like.model.clone(),
            like.nx,
            like.nv,
            z,
            like.weights.clone(),
            values,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("# model={}\n", self.model));
        out.push_str(&format!("# nx={}\n", self.nx));
        out.push_str(&format!("# nv={}\n", self.nv));
        out.push_str(&format!("# dz={}\n", self.z.dim()));
        out.push_str(&format!("# z={}\n", join_numbers(self.z.entries())));
        out.push_str(&format!("# weights={}\n", join_numbers(&self.weights)));
        let mut file = fs::File::create(path)?;
        file.write_all(out.as_bytes())?;
        let mut body = String::with_capacity(self.values.len() * 24);
        for v in &self.values {
            body.push_str(&format!("{v:.16e}\n"));
        }
        file.write_all(body.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Snapshot> {
        let text = fs::read_to_string(path)?;
        let mut model = None;
        let mut nx = None;
        let mut nv = None;
        let mut dz = None;
        let mut z = None;
        let mut weights = None;
        let mut values = Vec::new();

        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let header = header.trim();
                let (key, val) = header
                    .split_once('=')
                    .ok_or_else(|| Error::Format(format!("malformed header `{header}`")))?;
                match key.trim() {
                    "model" => model = Some(val.trim().to_string()),
                    "nx" => nx = Some(parse_usize(val)?),
                    "nv" => nv = Some(parse_usize(val)?),
                    "dz" => dz = Some(parse_usize(val)?),
                    "z" => z = Some(parse_numbers(val)?),
                    "weights" => weights = Some(parse_numbers(val)?),
                    other => {
                        return Err(Error::Format(format!("unknown header key `{other}`")));
                    }
                }
            } else {
                values.push(
                    line.parse::<f64>()
                        .map_err(|e| Error::Format(format!("bad value `{line}`: {e}")))?,
                );
            }
        }

        let model = model.ok_or_else(|| Error::Format("missing model header".into()))?;
        let nx = nx.ok_or_else(|| Error::Format("missing nx header".into()))?;
        let nv = nv.ok_or_else(|| Error::Format("missing nv header".into()))?;
        let dz = dz.ok_or_else(|| Error::Format("missing dz header".into()))?;
        let z = z.ok_or_else(|| Error::Format("missing z header".into()))?;
        let weights = weights.ok_or_else(|| Error::Format("missing weights header".into()))?;
        if z.len() != dz {
            return Err(Error::Format(format!(
                "dz={} but z has {} entries",
                dz,
                z.len()
            )));
        }
        Snapshot::new(model, nx, nv, ParameterVector(z), weights, values)
    }
}

fn join_numbers(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{x:.16e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_numbers(s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|e| Error::Format(format!("bad number `{tok}`: {e}")))
        })
        .collect()
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|e| Error::Format(format!("bad count `{s}`: {e}")))
}
