//! Scalar system configuration shared by every layer.

use crate::detection::kld_threshold;
use crate::error::{Error, Result};
use crate::numerics::big_f;

/// All scalar configuration of one backscatter scenario.
///
/// Field names follow the usual notation of the system model: `K` tags, `M`
/// reader antennas, `N` samples per detection interval, `Q` source antennas.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// `K`, number of candidate tags.
    pub num_tags: usize,
    /// `M`, reader antennas.
    pub rx_antennas: usize,
    /// `N`, samples per detection interval.
    pub samples: usize,
    /// `Q`, power-source antennas (1 for the single-antenna source).
    pub tx_antennas: usize,
    /// Tag attenuation `α` in `[0, 1]`.
    pub alpha: f64,
    /// Transmit power `σ_s²` in watts.
    pub sigma_s2: f64,
    /// Reader noise power `σ_w²` in watts.
    pub sigma_w2: f64,
    /// DEP tolerance with the direct link.
    pub xi_max: f64,
    /// DEP tolerance without the direct link.
    pub zeta_max: f64,
    /// Rician factor `κ` (may be infinite for pure line of sight).
    pub kappa: f64,
    /// Path-loss exponent `ρ`.
    pub rho: f64,
    /// Rank-one penalty weight; `None` picks `10·γ·λ_max(H1)` per tag.
    pub chi: Option<f64>,
    /// `T`, number of slack grid intervals in the evolved solver.
    pub t_grid: usize,
    /// `J`, penalty SCA iteration budget.
    pub penalty_iters: usize,
    /// `L`, SCA iteration budget (also the alternation budget).
    pub sca_iters: usize,
    /// `ω`, relative convergence tolerance of the SCA loops.
    pub omega: f64,
    pub seed: u64,
    /// Fixed link distances in meters; `None` draws uniformly from `dist_range`.
    pub d_st: Option<f64>,
    pub d_sr: Option<f64>,
    pub d_tr: Option<f64>,
    pub dist_range: (f64, f64),
    /// Fixed line-of-sight angle in radians for every link; `None` draws
    /// uniformly from `[-π/2, π/2]`.
    pub los_angle: Option<f64>,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            num_tags: 5,
            rx_antennas: 4,
            samples: 10,
            tx_antennas: 1,
            alpha: 0.8,
            sigma_s2: 0.6,
            sigma_w2: 0.03,
            xi_max: 0.5,
            zeta_max: 0.5,
            kappa: 2.8,
            rho: 3.0,
            chi: None,
            t_grid: 100,
            penalty_iters: 100,
            sca_iters: 100,
            omega: 1e-6,
            seed: 1,
            d_st: None,
            d_sr: None,
            d_tr: None,
            dist_range: (1.0, 5.0),
            los_angle: None,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParam(msg));
        for (name, v) in [
            ("K", self.num_tags),
            ("M", self.rx_antennas),
            ("N", self.samples),
            ("Q", self.tx_antennas),
            ("T", self.t_grid),
            ("J", self.penalty_iters),
            ("L", self.sca_iters),
        ] {
            if v == 0 {
                return bad(format!("{name} must be >= 1"));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha = {} outside [0, 1]", self.alpha));
        }
        for (name, v) in [("sigma_s2", self.sigma_s2), ("sigma_w2", self.sigma_w2), ("rho", self.rho)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive and finite"));
            }
        }
        for (name, v) in [("xi_max", self.xi_max), ("zeta_max", self.zeta_max)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} = {v} outside (0, 1]"));
            }
        }
        if !(self.kappa >= 0.0) {
            return bad(format!("kappa = {} must be >= 0", self.kappa));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return bad(format!("omega = {} must be positive", self.omega));
        }
        if let Some(chi) = self.chi {
            if !(chi > 0.0 && chi.is_finite()) {
                return bad(format!("chi = {chi} must be positive"));
            }
        }
        for (name, d) in [("d_st", self.d_st), ("d_sr", self.d_sr), ("d_tr", self.d_tr)] {
            if let Some(d) = d {
                if !(d > 0.0 && d.is_finite()) {
                    return bad(format!("{name} = {d} must be positive"));
                }
            }
        }
        let (lo, hi) = self.dist_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("dist_range ({lo}, {hi}) is not a positive interval"));
        }
        Ok(())
    }

    /// Input SNR `γ = σ_s²/σ_w²`.
    pub fn gamma(&self) -> f64 {
        self.sigma_s2 / self.sigma_w2
    }

    /// KLD floor with the direct link, `D^min`.
    pub fn d_min(&self) -> Result<f64> {
        kld_threshold(self.xi_max)
    }

    /// KLD floor without the direct link, `E^min`.
    pub fn e_min(&self) -> Result<f64> {
        kld_threshold(self.zeta_max)
    }

    /// Per-sample KLD argument with the direct link, `f^min = D^min/N + 1`.
    pub fn f_min(&self) -> Result<f64> {
        Ok(self.d_min()? / self.samples as f64 + 1.0)
    }

    /// Per-sample KLD argument without the direct link, `g^min = E^min/N + 1`.
    pub fn g_min(&self) -> Result<f64> {
        Ok(self.e_min()? / self.samples as f64 + 1.0)
    }

    /// `F(f^min)`: the minimum ratio `δ1/δ0` with the direct link.
    pub fn ratio_floor_with(&self) -> Result<f64> {
        big_f(self.f_min()?)
    }

    /// `F(g^min)`: the minimum ratio `δ̄1/δ̄0` without the direct link.
    pub fn ratio_floor_without(&self) -> Result<f64> {
        big_f(self.g_min()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = SystemParams::default();
        p.validate().unwrap();
        assert!((p.gamma() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range() {
        let mut p = SystemParams::default();
        p.alpha = 1.5;
        assert!(p.validate().is_err());
        let mut p = SystemParams::default();
        p.zeta_max = 0.0;
        assert!(p.validate().is_err());
        let mut p = SystemParams::default();
        p.num_tags = 0;
        assert!(p.validate().is_err());
        let mut p = SystemParams::default();
        p.kappa = f64::INFINITY;
        assert!(p.validate().is_ok());
    }

    #[test]
    fn trivial_tolerances_give_unit_ratio_floors() {
        let p = SystemParams {
            xi_max: 1.0,
            zeta_max: 1.0,
            ..Default::default()
        };
        assert_eq!(p.ratio_floor_with().unwrap(), 1.0);
        assert_eq!(p.ratio_floor_without().unwrap(), 1.0);
    }
}
