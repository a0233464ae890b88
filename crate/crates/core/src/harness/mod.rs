//! Monte Carlo sweeps, benchmark schemes, region tables and the self-test.

mod benchmark;
mod config;
mod region;
mod selftest;
mod sweep;

pub use benchmark::{run_benchmark, Benchmark};
pub use config::RunConfig;
pub use region::{ci_region_report, write_region_csv, RegionRow, REGION_HEADER};
pub use selftest::{selftest, SelfCheck};
pub use sweep::{run_sweep, run_trial, write_csv, SweepOutcome, SweepRecord, CSV_HEADER};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::params::SystemParams;

/// Parameter swept along the x-axis of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    SigmaS2,
    Rho,
    M,
    Q,
    ZetaMax,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            Self::SigmaS2 => "sigma_s2",
            Self::Rho => "rho",
            Self::M => "M",
            Self::Q => "Q",
            Self::ZetaMax => "zeta_max",
        }
    }

    /// `base` with this variable set to `value`.
    pub fn apply(self, base: &SystemParams, value: f64) -> Result<SystemParams> {
        let mut p = base.clone();
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 && value <= 4096.0 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidParam(format!("{} = {value} must be a positive integer", self.name())))
            }
        };
        match self {
            Self::SigmaS2 => p.sigma_s2 = value,
            Self::Rho => p.rho = value,
            Self::M => p.rx_antennas = count()?,
            Self::Q => p.tx_antennas = count()?,
            Self::ZetaMax => p.zeta_max = value,
        }
        p.validate()?;
        Ok(p)
    }
}

impl FromStr for SweepVar {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sigma_s2" => Self::SigmaS2,
            "rho" => Self::Rho,
            "M" => Self::M,
            "Q" => Self::Q,
            "zeta_max" => Self::ZetaMax,
            _ => return Err(Error::InvalidParam(format!("unknown sweep variable {s:?}"))),
        })
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Scheme run for every (value, trial) pair. Records sort in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Consensual,
    Evolved,
    HarmfulDli,
    CanceledDli,
    RandomSel,
}

impl Algorithm {
    pub const ALL: [Self; 5] = [Self::Consensual, Self::Evolved, Self::HarmfulDli, Self::CanceledDli, Self::RandomSel];

    pub fn name(self) -> &'static str {
        match self {
            Self::Consensual => "consensual",
            Self::Evolved => "evolved",
            Self::HarmfulDli => "harmful_dli",
            Self::CanceledDli => "canceled_dli",
            Self::RandomSel => "random_sel",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown algorithm {s:?}")))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameter scanned by the region report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionVar {
    ZetaMax,
    Rho,
}

impl RegionVar {
    pub fn name(self) -> &'static str {
        match self {
            Self::ZetaMax => "zeta_max",
            Self::Rho => "rho",
        }
    }
}

impl FromStr for RegionVar {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zeta_max" => Ok(Self::ZetaMax),
            "rho" => Ok(Self::Rho),
            _ => Err(Error::InvalidParam(format!("unknown region variable {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub sweep_var: SweepVar,
    pub values: Vec<f64>,
    pub trials: usize,
    pub algorithms: Vec<Algorithm>,
    pub base: SystemParams,
    pub out_path: Option<PathBuf>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if self.values.is_empty() {
            return bad("sweep needs at least one value".into());
        }
        let up = self.values.windows(2).all(|w| w[0] < w[1]);
        let down = self.values.windows(2).all(|w| w[0] > w[1]);
        if !(up || down) {
            return bad(format!("sweep values {:?} are not strictly monotone", self.values));
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms requested".into());
        }
        let mut sorted = self.algorithms.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.algorithms.len() {
            return bad("algorithm listed twice".into());
        }
        for &v in &self.values {
            self.sweep_var.apply(&self.base, v)?;
        }
        Ok(())
    }
}
