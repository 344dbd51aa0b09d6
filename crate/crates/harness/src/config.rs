//! Flat key=value experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Lists are comma-separated.
//! Every key except `pair` has a default, so a config names a model pair and
//! overrides what it needs. Test samples are drawn from a stream derived from
//! `seed` (seed + 0x5EED), disjoint from the training stream by construction.

use std::fmt;
use std::path::{Path, PathBuf};

use bifi_core::error::{Error, Result};

/// Offset that separates the test-sample stream from the training stream.
pub const TEST_SEED_OFFSET: u64 = 0x5EED;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    /// Kinetic transport (micro-macro AP) vs its diffusion limit.
    TransportDiffusion,
    /// Fine-mesh transport vs coarse-mesh transport prolonged to the fine grid.
    TransportFineCoarse,
    /// Linearized BGK moments vs the acoustic system's moments.
    BgkAcoustic,
}

impl PairKind {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "transport-diffusion" => Ok(Self::TransportDiffusion),
            "transport-fine-coarse" => Ok(Self::TransportFineCoarse),
            "bgk-acoustic" => Ok(Self::BgkAcoustic),
            other => Err(Error::InvalidArgument(format!(
                "unknown pair `{other}` (expected transport-diffusion, \
                 transport-fine-coarse or bgk-acoustic)"
            ))),
        }
    }
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::TransportDiffusion => "transport-diffusion",
            Self::TransportFineCoarse => "transport-fine-coarse",
            Self::BgkAcoustic => "bgk-acoustic",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub pair: PairKind,
    pub d_z: usize,
    pub m_train: usize,
    pub m_test: usize,
    pub n_list: Vec<usize>,
    pub eps_list: Vec<f64>,
    pub nx_fine: usize,
    pub nx_coarse: usize,
    pub n_v: usize,
    pub n_w: usize,
    pub v_max: f64,
    pub t_final: f64,
    pub delta: f64,
    pub alpha: u32,
    pub seed: u64,
    pub c_cfl: f64,
    pub sigma_a: f64,
    pub greedy_tol: f64,
    pub sigma_base: f64,
    pub sigma_mode_amp: f64,
    pub sigma_mode_decay: f64,
    pub sigma_min: f64,
    pub init_mean: f64,
    pub init_cos_amp: f64,
    pub rho0_cos_amp: f64,
    pub rho0_mode_amp: f64,
    pub rho0_mode_decay: f64,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn defaults(pair: PairKind) -> Self {
        Self {
            pair,
            d_z: 4,
            m_train: 64,
            m_test: 200,
            n_list: vec![1, 2, 4, 8, 12],
            eps_list: vec![1e-6],
            nx_fine: 64,
            nx_coarse: 32,
            n_v: 16,
            n_w: 64,
            v_max: 6.0,
            t_final: 0.1,
            delta: 1e-3,
            alpha: 0,
            seed: 42,
            c_cfl: 0.4,
            sigma_a: 0.0,
            greedy_tol: 1e-12,
            sigma_base: 1.0,
            sigma_mode_amp: 0.3,
            sigma_mode_decay: 2.0,
            sigma_min: 0.2,
            init_mean: 1.0,
            init_cos_amp: 0.5,
            rho0_cos_amp: 0.3,
            rho0_mode_amp: 0.3,
            rho0_mode_decay: 2.0,
            out_dir: None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pair = None;
        let mut overrides: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("line {}: expected key=value", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key == "pair" {
                pair = Some(PairKind::parse(&value)?);
            } else {
                overrides.push((key, value));
            }
        }
        let pair = pair.ok_or_else(|| Error::InvalidArgument("config must set `pair`".into()))?;
        let mut cfg = Self::defaults(pair);
        for (key, value) in overrides {
            cfg.apply(&key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "d_z" => self.d_z = parse_num(key, value)?,
            "m_train" => self.m_train = parse_num(key, value)?,
            "m_test" => self.m_test = parse_num(key, value)?,
            "n_list" => self.n_list = parse_list(key, value)?,
            "eps_list" => self.eps_list = parse_list(key, value)?,
            "nx_fine" => self.nx_fine = parse_num(key, value)?,
            "nx_coarse" => self.nx_coarse = parse_num(key, value)?,
            "n_v" => self.n_v = parse_num(key, value)?,
            "n_w" => self.n_w = parse_num(key, value)?,
            "v_max" => self.v_max = parse_num(key, value)?,
            "t_final" => self.t_final = parse_num(key, value)?,
            "delta" => self.delta = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "c_cfl" => self.c_cfl = parse_num(key, value)?,
            "sigma_a" => self.sigma_a = parse_num(key, value)?,
            "greedy_tol" => self.greedy_tol = parse_num(key, value)?,
            "sigma_base" => self.sigma_base = parse_num(key, value)?,
            "sigma_mode_amp" => self.sigma_mode_amp = parse_num(key, value)?,
            "sigma_mode_decay" => self.sigma_mode_decay = parse_num(key, value)?,
            "sigma_min" => self.sigma_min = parse_num(key, value)?,
            "init_mean" => self.init_mean = parse_num(key, value)?,
            "init_cos_amp" => self.init_cos_amp = parse_num(key, value)?,
            "rho0_cos_amp" => self.rho0_cos_amp = parse_num(key, value)?,
            "rho0_mode_amp" => self.rho0_mode_amp = parse_num(key, value)?,
            "rho0_mode_decay" => self.rho0_mode_decay = parse_num(key, value)?,
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown config key `{other}`"
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_z == 0 {
            return Err(Error::InvalidArgument("d_z must be >= 1".into()));
        }
        if self.n_list.is_empty() || self.eps_list.is_empty() {
            return Err(Error::InvalidArgument(
                "n_list and eps_list must be nonempty".into(),
            ));
        }
        let n_max = *self.n_list.iter().max().unwrap();
        if self.m_train < n_max {
            return Err(Error::InvalidArgument(format!(
                "m_train = {} below max(n_list) = {n_max}",
                self.m_train
            )));
        }
        if self.nx_coarse == 0 || !self.nx_fine.is_multiple_of(self.nx_coarse) {
            return Err(Error::InvalidArgument(format!(
                "nx_coarse = {} must divide nx_fine = {}",
                self.nx_coarse, self.nx_fine
            )));
        }
        if self.alpha > 1 {
            return Err(Error::InvalidArgument("alpha must be 0 or 1".into()));
        }
        if self.t_final < 0.0 || self.delta <= 0.0 || self.c_cfl <= 0.0 {
            return Err(Error::InvalidArgument(
                "t_final must be >= 0, delta and c_cfl > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn max_n(&self) -> usize {
        *self.n_list.iter().max().unwrap()
    }

    pub fn test_seed(&self) -> u64 {
        self.seed.wrapping_add(TEST_SEED_OFFSET)
    }

    /// Sorted key=value echo for the run manifest.
    pub fn canonical_items(&self) -> Vec<(String, String)> {
        let mut items = vec![
            ("alpha".into(), self.alpha.to_string()),
            ("c_cfl".into(), fmt_f64(self.c_cfl)),
            ("d_z".into(), self.d_z.to_string()),
            ("delta".into(), fmt_f64(self.delta)),
            (
                "eps_list".into(),
                self.eps_list
                    .iter()
                    .map(|e| fmt_f64(*e))
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("greedy_tol".into(), fmt_f64(self.greedy_tol)),
            ("init_cos_amp".into(), fmt_f64(self.init_cos_amp)),
            ("init_mean".into(), fmt_f64(self.init_mean)),
            ("m_test".into(), self.m_test.to_string()),
            ("m_train".into(), self.m_train.to_string()),
            (
                "n_list".into(),
                self.n_list
                    .iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("n_v".into(), self.n_v.to_string()),
            ("n_w".into(), self.n_w.to_string()),
            ("nx_coarse".into(), self.nx_coarse.to_string()),
            ("nx_fine".into(), self.nx_fine.to_string()),
            ("pair".into(), self.pair.to_string()),
            ("rho0_cos_amp".into(), fmt_f64(self.rho0_cos_amp)),
            ("rho0_mode_amp".into(), fmt_f64(self.rho0_mode_amp)),
            ("rho0_mode_decay".into(), fmt_f64(self.rho0_mode_decay)),
            ("seed".into(), self.seed.to_string()),
            ("sigma_a".into(), fmt_f64(self.sigma_a)),
            ("sigma_base".into(), fmt_f64(self.sigma_base)),
            ("sigma_min".into(), fmt_f64(self.sigma_min)),
            ("sigma_mode_amp".into(), fmt_f64(self.sigma_mode_amp)),
            ("sigma_mode_decay".into(), fmt_f64(self.sigma_mode_decay)),
            ("t_final".into(), fmt_f64(self.t_final)),
            ("v_max".into(), fmt_f64(self.v_max)),
        ];
        items.sort();
        items
    }
}

/// 17 significant digits: round-trips f64 exactly and keeps CSV rows
/// bit-reproducible.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::InvalidArgument(format!("bad value for {key}: {e}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(|tok| parse_num(key, tok.trim()))
        .collect()
}
