use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::ComplexVector;

/// MMSE receive beamformer treating the direct link as interference:
/// `normalize((h_sr h_sr^H + h_str h_str^H + (σ_w²/σ_s²)·I)^{-1} h_str)`.
pub fn mmse_beamformer(
    h_sr: &ComplexVector,
    h_str: &ComplexVector,
    sigma_s2: f64,
    sigma_w2: f64,
) -> Result<ComplexVector> {
    let m = h_str.len();
    if h_sr.len() != m || m == 0 {
        return Err(Error::Dimension(format!(
            "direct link has {} entries, backscatter link {m}",
            h_sr.len()
        )));
    }
    if !(sigma_s2 > 0.0 && sigma_w2 > 0.0) {
        return Err(Error::domain("mmse_beamformer", "powers must be positive"));
    }
    if h_str.norm() == 0.0 {
        return Err(Error::domain("mmse_beamformer", "backscatter link is zero"));
    }
    let mut r = h_sr * h_sr.adjoint() + h_str * h_str.adjoint();
    for i in 0..m {
        r[(i, i)] += Complex64::new(sigma_w2 / sigma_s2, 0.0);
    }
    let sol = r
        .lu()
        .solve(h_str)
        .ok_or_else(|| Error::domain("mmse_beamformer", "regularized covariance is singular"))?;
    let n = sol.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::domain("mmse_beamformer", "degenerate solution"));
    }
    Ok(sol / Complex64::new(n, 0.0))
}
