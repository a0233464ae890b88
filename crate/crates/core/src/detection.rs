//! Hypothesis-testing layer for on/off tag detection.
//!
//! Under either hypothesis the beamformed samples are i.i.d. circular Gaussian
//! with variance `δ_0` (tag silent) or `δ_1` (tag backscattering), so every
//! detection quantity is a function of the variance pair and the sample count.

use crate::error::{Error, Result};
use crate::numerics::{abs_inner_sq, norm, ComplexVector};

/// Detection statistics of one (tag, beamformer) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionStats {
    pub delta0: f64,
    pub delta1: f64,
    pub delta0_bar: f64,
    pub delta1_bar: f64,
    /// `D_KL(p0 || p1)` with the direct link, in nats.
    pub kld_with: f64,
    /// `D_KL(p̄0 || p̄1)` without the direct link, in nats.
    pub kld_without: f64,
    /// `kld_with - kld_without`.
    pub delta_kld: f64,
    /// Bretagnolle-Huber DEP lower bound with the direct link.
    pub dep_bound_with: f64,
    /// Bretagnolle-Huber DEP lower bound without the direct link.
    pub dep_bound_without: f64,
}

impl DetectionStats {
    /// Statistics for receive beamformer `v` against the composite channels
    /// `h0` (direct link), `h1 = h0 + hbar1`, and `hbar1` (backscatter link).
    pub fn compute(
        v: &ComplexVector,
        h0: &ComplexVector,
        h1: &ComplexVector,
        hbar1: &ComplexVector,
        sigma_s2: f64,
        sigma_w2: f64,
        samples: usize,
    ) -> Result<Self> {
        let (delta0, delta1) = hypothesis_variances(v, h0, h1, sigma_s2, sigma_w2)?;
        let zero = ComplexVector::zeros(v.len());
        let (delta0_bar, delta1_bar) = hypothesis_variances(v, &zero, hbar1, sigma_s2, sigma_w2)?;
        let kld_with = kld(delta0, delta1, samples)?;
        let kld_without = kld(delta0_bar, delta1_bar, samples)?;
        Ok(Self {
            delta0,
            delta1,
            delta0_bar,
            delta1_bar,
            kld_with,
            kld_without,
            delta_kld: kld_with - kld_without,
            dep_bound_with: dep_lower_bound(kld_with)?,
            dep_bound_without: dep_lower_bound(kld_without)?,
        })
    }
}

/// `δ_i = |v^H h_i|²·σ_s² + σ_w²·‖v‖²` for `i = 0, 1`.
pub fn hypothesis_variances(
    v: &ComplexVector,
    h0: &ComplexVector,
    h1: &ComplexVector,
    sigma_s2: f64,
    sigma_w2: f64,
) -> Result<(f64, f64)> {
    if v.len() != h0.len() || v.len() != h1.len() {
        return Err(Error::Dimension(format!(
            "beamformer has {} entries, channels have {} and {}",
            v.len(),
            h0.len(),
            h1.len()
        )));
    }
    if !(sigma_s2 > 0.0 && sigma_w2 > 0.0) {
        return Err(Error::domain("hypothesis_variances", "powers must be positive"));
    }
    let noise = sigma_w2 * norm(v).powi(2);
    Ok((
        abs_inner_sq(v, h0) * sigma_s2 + noise,
        abs_inner_sq(v, h1) * sigma_s2 + noise,
    ))
}

/// `D_KL(p0 || p1) = N·(ln(δ1/δ0) + δ0/δ1 - 1)` for `N` i.i.d. samples.
pub fn kld(delta0: f64, delta1: f64, samples: usize) -> Result<f64> {
    if !(delta0 > 0.0 && delta1 > 0.0) || samples == 0 {
        return Err(Error::domain(
            "kld",
            format!("variances ({delta0}, {delta1}) must be positive and N >= 1"),
        ));
    }
    let r = delta0 / delta1;
    // ln(1/r) + r - 1 loses everything to cancellation near r = 1.
    let per_sample = if (r - 1.0).abs() < 1e-4 {
        let u = r - 1.0;
        u * u / 2.0 - u * u * u / 3.0 + u.powi(4) / 4.0 - u.powi(5) / 5.0
    } else {
        -r.ln() + r - 1.0
    };
    Ok(samples as f64 * per_sample.max(0.0))
}

/// KLD floor `-ln(1 - (1 - ε)²)` implied by a DEP tolerance `ε`.
pub fn kld_threshold(eps_max: f64) -> Result<f64> {
    if !(eps_max > 0.0 && eps_max <= 1.0) {
        return Err(Error::domain(
            "kld_threshold",
            format!("tolerance {eps_max} outside (0, 1]"),
        ));
    }
    let slack = 1.0 - eps_max;
    Ok(-(-(slack * slack)).ln_1p())
}

/// Bretagnolle-Huber lower bound `1 - sqrt(1 - exp(-D))` on the optimal DEP.
pub fn dep_lower_bound(d: f64) -> Result<f64> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::domain("dep_lower_bound", format!("KLD {d} < 0")));
    }
    Ok(1.0 - (-(-d).exp_m1()).sqrt())
}

/// Exact optimal DEP `1 - V_T(p0, p1)` for `N` i.i.d. circular Gaussian
/// samples with variances `δ0`, `δ1`.
///
/// The energy `T = Σ|y_n|²` is sufficient and Gamma(`N`, `δ_i`) distributed;
/// the likelihood ratio is monotone in `T`, so the total variation is attained
/// by thresholding at the density crossing `τ`.
pub fn dep_oracle(delta0: f64, delta1: f64, samples: usize) -> Result<f64> {
    if !(delta0 > 0.0 && delta1 > 0.0) || samples == 0 {
        return Err(Error::domain(
            "dep_oracle",
            format!("variances ({delta0}, {delta1}) must be positive and N >= 1"),
        ));
    }
    if delta0 == delta1 {
        return Ok(1.0);
    }
    let (lo, hi) = if delta0 < delta1 { (delta0, delta1) } else { (delta1, delta0) };
    let n = samples as f64;
    let tau = n * (hi / lo).ln() / (1.0 / lo - 1.0 / hi);
    // 1 - [P(N, τ/lo) - P(N, τ/hi)] = Q(N, τ/lo) + P(N, τ/hi).
    let err = gamma_upper_regularized(samples, tau / lo) + gamma_lower_regularized(samples, tau / hi);
    Ok(err.clamp(0.0, 1.0))
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Regularized lower incomplete gamma `P(n, z)` for integer shape `n`.
fn gamma_lower_regularized(n: usize, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z < n as f64 + 1.0 {
        lower_series(n, z)
    } else {
        1.0 - upper_sum(n, z)
    }
}

/// Regularized upper incomplete gamma `Q(n, z) = 1 - P(n, z)`.
fn gamma_upper_regularized(n: usize, z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    if z < n as f64 + 1.0 {
        1.0 - lower_series(n, z)
    } else {
        upper_sum(n, z)
    }
}

// P(n, z) = e^{-z} z^n / n! · Σ_j z^j / ((n+1)…(n+j)).
fn lower_series(n: usize, z: f64) -> f64 {
    let nf = n as f64;
    let lead = (-z + nf * z.ln() - ln_factorial(n)).exp();
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..10_000 {
        term *= z / (nf + j as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    (lead * sum).min(1.0)
}

// Q(n, z) = e^{-z} Σ_{k<n} z^k / k!, exact for integer shape.
fn upper_sum(n: usize, z: f64) -> f64 {
    let lz = z.ln();
    let mut lfact = 0.0;
    let mut sum = 0.0;
    for k in 0..n {
        if k > 0 {
            lfact += (k as f64).ln();
        }
        sum += (-z + k as f64 * lz - lfact).exp();
    }
    sum.min(1.0)
}

/// Left side minus right side of the evolved-CI inequality
/// `|v^H h1|² - |v^H h0|² - |v^H h̄1|² >= γ·|v^H h0|²·|v^H h̄1|²`
/// for a unit-norm `v`; nonnegative exactly when the KLD gap is nonnegative
/// on the constructive branch `δ1 >= δ0`.
pub fn evolved_margin(
    v: &ComplexVector,
    h0: &ComplexVector,
    h1: &ComplexVector,
    hbar1: &ComplexVector,
    gamma: f64,
) -> f64 {
    let a = abs_inner_sq(v, h0);
    let b = abs_inner_sq(v, hbar1);
    abs_inner_sq(v, h1) - a - b - gamma * a * b
}
