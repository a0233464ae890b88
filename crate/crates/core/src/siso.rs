//! Closed-form CI region of a single-antenna reader.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::big_f;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiRegion {
    /// Smallest input SNR meeting the no-direct-link detection floor.
    pub gamma_lo: f64,
    /// Largest input SNR keeping the direct link constructive; `+∞` without
    /// a direct link.
    pub gamma_hi: f64,
    pub nonempty: bool,
    /// Widest constructive angle over the region, reached at `gamma_lo`;
    /// `None` when the region is empty or no angle is constructive there.
    pub theta_max: Option<f64>,
    /// Remark-style closed form `arccos(|h_sr|(F(g^min) - 1)/(2|h_str|))`,
    /// evaluated whether or not the region is empty.
    pub theta_max_at_min_snr: Option<f64>,
}

/// Input-SNR interval on which the evolved CI holds for scalar links:
/// `(F(g^min) - 1)/|h_str|² <= γ <= 2Re(h_sr^* h_str)/(|h_sr|²|h_str|²)`.
///
/// `g_min` is the per-sample argument `E^min/N + 1`.
pub fn snr_interval(h_sr: Complex64, h_str: Complex64, g_min: f64) -> Result<CiRegion> {
    let (a, b) = (h_sr.norm_sqr(), h_str.norm_sqr());
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::domain("snr_interval", "backscatter link must be nonzero and finite"));
    }
    if !a.is_finite() {
        return Err(Error::domain("snr_interval", "direct link must be finite"));
    }
    let floor = big_f(g_min)? - 1.0;
    let gamma_lo = floor / b;
    let gamma_hi = if a == 0.0 {
        f64::INFINITY
    } else {
        2.0 * (h_sr.conj() * h_str).re / (a * b)
    };
    let nonempty = gamma_lo <= gamma_hi;
    let theta_max_at_min_snr = theta_max_at_min_snr(a.sqrt(), b.sqrt(), g_min)?;
    Ok(CiRegion {
        gamma_lo,
        gamma_hi,
        nonempty,
        theta_max: if nonempty { theta_max_at_min_snr } else { None },
        theta_max_at_min_snr,
    })
}

/// Largest angle between the direct and backscatter links for which the
/// direct link is constructive: `min(π/2, arccos(γ|h_sr||h_str|/2))`.
///
/// `None` when the arccos argument exceeds one, i.e. no angle works.
pub fn ci_angle(h_sr_mag: f64, h_str_mag: f64, gamma: f64) -> Option<f64> {
    capped_arccos(gamma * h_sr_mag * h_str_mag / 2.0)
}

/// `ci_angle` at the smallest admissible SNR `γ = (F(g^min) - 1)/|h_str|²`.
pub fn theta_max_at_min_snr(h_sr_mag: f64, h_str_mag: f64, g_min: f64) -> Result<Option<f64>> {
    if !(h_str_mag > 0.0) {
        return Err(Error::domain("theta_max_at_min_snr", "backscatter gain must be positive"));
    }
    let floor = big_f(g_min)? - 1.0;
    Ok(capped_arccos(h_sr_mag * floor / (2.0 * h_str_mag)))
}

fn capped_arccos(arg: f64) -> Option<f64> {
    if arg.is_nan() || arg > 1.0 {
        None
    } else {
        Some(arg.max(-1.0).acos().min(FRAC_PI_2))
    }
}

/// Angle in `[0, π]` between two scalar links, from `Re(a^* b) = |a||b|cos θ`.
pub fn link_angle(h_sr: Complex64, h_str: Complex64) -> f64 {
    let den = h_sr.norm() * h_str.norm();
    if den == 0.0 {
        return 0.0;
    }
    ((h_sr.conj() * h_str).re / den).clamp(-1.0, 1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_3;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn real_links_interval() {
        let r = snr_interval(c(1.0), c(0.5), 1.0).unwrap();
        assert_eq!(r.gamma_lo, 0.0);
        assert!((r.gamma_hi - 4.0).abs() < 1e-15);
        assert!(r.nonempty);
    }

    #[test]
    fn orthogonal_phases_close_the_region() {
        let r = snr_interval(c(1.0), Complex64::new(0.0, 0.7), 1.2).unwrap();
        assert_eq!(r.gamma_hi, 0.0);
        assert!(!r.nonempty && r.theta_max.is_none());
    }

    #[test]
    fn no_direct_link_is_unbounded() {
        let r = snr_interval(c(0.0), c(0.3), 1.1).unwrap();
        assert_eq!(r.gamma_hi, f64::INFINITY);
        assert!(r.nonempty);
        assert_eq!(r.theta_max, Some(FRAC_PI_2));
    }

    #[test]
    fn zero_backscatter_link_is_an_error() {
        assert!(snr_interval(c(1.0), c(0.0), 1.0).is_err());
        assert!(theta_max_at_min_snr(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn angle_anchors() {
        assert!((ci_angle(1.0, 1.0, 1.0).unwrap() - FRAC_PI_3).abs() < 1e-12);
        assert_eq!(ci_angle(2.0, 3.0, 0.0), Some(FRAC_PI_2));
        assert_eq!(ci_angle(1.0, 1.0, 2.5), None);
        assert_eq!(theta_max_at_min_snr(1.0, 1.0, 1.0).unwrap(), Some(FRAC_PI_2));
    }

    #[test]
    fn link_angle_of_rotated_links() {
        let a = Complex64::from_polar(2.0, 0.3);
        let b = Complex64::from_polar(0.5, 1.3);
        assert!((link_angle(a, b) - 1.0).abs() < 1e-12);
    }
}
