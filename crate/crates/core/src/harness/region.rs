use std::io::Write;

use num_complex::Complex64;

use super::{RegionVar, RunConfig};
use crate::error::{Error, Result};
use crate::siso::snr_interval;

pub const REGION_HEADER: [&str; 9] = [
    "region_var",
    "value",
    "gamma_lo",
    "gamma_hi",
    "power_lo",
    "power_hi",
    "nonempty",
    "theta_max",
    "theta_max_at_min_snr",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RegionRow {
    pub region_var: RegionVar,
    pub value: f64,
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    /// Transmit power bounds `γ·σ_w²` in watts.
    pub power_lo: f64,
    pub power_hi: f64,
    pub nonempty: bool,
    pub theta_max: Option<f64>,
    pub theta_max_at_min_snr: Option<f64>,
}

/// Scalar-reader CI region across the configured grid.
///
/// The links are mean path-loss amplitudes at the configured distances (the
/// middle of `dist_range` when a distance is not fixed), with the backscatter
/// link rotated by `region_phase` against the direct link.
pub fn ci_region_report(cfg: &RunConfig) -> Result<Vec<RegionRow>> {
    cfg.region_values
        .iter()
        .map(|&value| {
            let mut p = cfg.base.clone();
            match cfg.region_var {
                RegionVar::ZetaMax => p.zeta_max = value,
                RegionVar::Rho => p.rho = value,
            }
            p.validate()?;
            let mid = 0.5 * (p.dist_range.0 + p.dist_range.1);
            let amp = |d: Option<f64>| d.unwrap_or(mid).powf(-p.rho / 2.0);
            let h_sr = Complex64::new(amp(p.d_sr), 0.0);
            let h_str = Complex64::from_polar(p.alpha * amp(p.d_st) * amp(p.d_tr), cfg.region_phase);
            let r = snr_interval(h_sr, h_str, p.g_min()?)?;
            Ok(RegionRow {
                region_var: cfg.region_var,
                value,
                gamma_lo: r.gamma_lo,
                gamma_hi: r.gamma_hi,
                power_lo: r.gamma_lo * p.sigma_w2,
                power_hi: r.gamma_hi * p.sigma_w2,
                nonempty: r.nonempty,
                theta_max: r.theta_max,
                theta_max_at_min_snr: r.theta_max_at_min_snr,
            })
        })
        .collect()
}

pub fn write_region_csv<W: Write>(rows: &[RegionRow], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Io(format!("writing CSV: {e}"));
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REGION_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.region_var.name().to_string(),
            r.value.to_string(),
            r.gamma_lo.to_string(),
            r.gamma_hi.to_string(),
            r.power_lo.to_string(),
            r.power_hi.to_string(),
            r.nonempty.to_string(),
            opt(r.theta_max),
            opt(r.theta_max_at_min_snr),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(format!("writing CSV: {e}")))?;
    Ok(())
}
