//! Flat `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, list values are
//! comma-separated. Keys are the `SystemParams` field names (with the
//! single-letter symbols `K M N Q T J L` accepted as aliases) plus the sweep
//! and region keys below. Unknown or repeated keys are errors.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{Algorithm, RegionVar, SweepConfig, SweepVar};
use crate::error::{Error, Result};
use crate::params::SystemParams;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub base: SystemParams,
    pub sweep_var: SweepVar,
    pub values: Vec<f64>,
    pub trials: usize,
    pub algorithms: Vec<Algorithm>,
    pub out_path: Option<PathBuf>,
    pub workers: Option<usize>,
    pub region_var: RegionVar,
    pub region_values: Vec<f64>,
    /// Angle in radians between the direct and backscatter links of the
    /// region report's scalar channel.
    pub region_phase: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            base: SystemParams::default(),
            sweep_var: SweepVar::SigmaS2,
            values: vec![0.2, 0.4, 0.6, 0.8],
            trials: 200,
            algorithms: Algorithm::ALL.to_vec(),
            out_path: None,
            workers: None,
            region_var: RegionVar::ZetaMax,
            region_values: (1..=10).map(|k| k as f64 / 10.0).collect(),
            region_phase: 0.0,
        }
    }
}

fn canonical(key: &str) -> &str {
    match key {
        "K" => "num_tags",
        "M" => "rx_antennas",
        "N" => "samples",
        "Q" => "tx_antennas",
        "T" => "t_grid",
        "J" => "penalty_iters",
        "L" => "sca_iters",
        other => other,
    }
}

fn scalar<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse {
        line,
        detail: format!("{key}: cannot parse {raw:?}"),
    })
}

fn list<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',').map(|t| scalar(line, key, t.trim())).collect()
}

/// `none` clears an optional field.
fn optional<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<Option<T>> {
    if raw == "none" {
        Ok(None)
    } else {
        scalar(line, key, raw).map(Some)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                detail: format!("expected key = value, got {content:?}"),
            })?;
            let key = canonical(key.trim());
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse { line, detail: format!("{key} given twice") });
            }
            cfg.assign(line, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn assign(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        let p = &mut self.base;
        match key {
            "num_tags" => p.num_tags = scalar(line, key, v)?,
            "rx_antennas" => p.rx_antennas = scalar(line, key, v)?,
            "samples" => p.samples = scalar(line, key, v)?,
            "tx_antennas" => p.tx_antennas = scalar(line, key, v)?,
            "alpha" => p.alpha = scalar(line, key, v)?,
            "sigma_s2" => p.sigma_s2 = scalar(line, key, v)?,
            "sigma_w2" => p.sigma_w2 = scalar(line, key, v)?,
            "xi_max" => p.xi_max = scalar(line, key, v)?,
            "zeta_max" => p.zeta_max = scalar(line, key, v)?,
            "kappa" => p.kappa = scalar(line, key, v)?,
            "rho" => p.rho = scalar(line, key, v)?,
            "chi" => p.chi = optional(line, key, v)?,
            "t_grid" => p.t_grid = scalar(line, key, v)?,
            "penalty_iters" => p.penalty_iters = scalar(line, key, v)?,
            "sca_iters" => p.sca_iters = scalar(line, key, v)?,
            "omega" => p.omega = scalar(line, key, v)?,
            "seed" => p.seed = scalar(line, key, v)?,
            "d_st" => p.d_st = optional(line, key, v)?,
            "d_sr" => p.d_sr = optional(line, key, v)?,
            "d_tr" => p.d_tr = optional(line, key, v)?,
            "los_angle" => p.los_angle = optional(line, key, v)?,
            "dist_range" => {
                let r: Vec<f64> = list(line, key, v)?;
                let [lo, hi] = r[..] else {
                    return Err(Error::Parse { line, detail: "dist_range takes two values".into() });
                };
                p.dist_range = (lo, hi);
            }
            "sweep_var" => self.sweep_var = scalar(line, key, v)?,
            "values" => self.values = list(line, key, v)?,
            "trials" => self.trials = scalar(line, key, v)?,
            "algorithms" => self.algorithms = list(line, key, v)?,
            "out_path" => self.out_path = Some(PathBuf::from(v)),
            "workers" => self.workers = Some(scalar(line, key, v)?),
            "region_var" => self.region_var = scalar(line, key, v)?,
            "region_values" => self.region_values = list(line, key, v)?,
            "region_phase" => self.region_phase = scalar(line, key, v)?,
            _ => return Err(Error::Parse { line, detail: format!("unknown key {key:?}") }),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.sweep_config()?.validate()?;
        if self.workers == Some(0) {
            return Err(Error::InvalidParam("workers must be >= 1".into()));
        }
        if self.region_values.is_empty() || self.region_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("region_values must be finite and nonempty".into()));
        }
        if !self.region_phase.is_finite() {
            return Err(Error::InvalidParam("region_phase must be finite".into()));
        }
        Ok(())
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        Ok(SweepConfig {
            sweep_var: self.sweep_var,
            values: self.values.clone(),
            trials: self.trials,
            algorithms: self.algorithms.clone(),
            base: self.base.clone(),
            out_path: self.out_path.clone(),
        })
    }
}
