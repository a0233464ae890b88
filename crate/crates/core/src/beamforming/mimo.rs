use num_complex::Complex64;

use super::{solve_tag, BeamformerSolution, Mode, Targets};
use crate::channel::MimoLinks;
use crate::error::Result;
use crate::numerics::{dominant_right_singular, ComplexVector};
use crate::params::SystemParams;

/// Receive step: best `v` for a fixed transmit beam `x`.
fn receive_step(links: &MimoLinks, x: &ComplexVector, p: &SystemParams, mode: Mode) -> Result<BeamformerSolution> {
    let sigma_s = p.sigma_s2.sqrt();
    let mut sol = solve_tag(&links.for_transmit(x, sigma_s), p, mode)?;
    sol.x = Some(x.clone());
    Ok(sol)
}

/// Transmit step: best `x` for a fixed unit receive beam `v`.
///
/// With `x = σ_s·u` and `g_i = G_i^H v`, the variances are
/// `σ_s²|g_i^H u|² + σ_w²`, the receive problem's form at unit norm, so the
/// same per-tag engine solves it.
fn transmit_step(links: &MimoLinks, v: &ComplexVector, p: &SystemParams, mode: Mode) -> Result<Option<ComplexVector>> {
    let sol = solve_tag(&links.for_receive(v), p, mode)?;
    Ok(sol
        .feasible
        .then(|| sol.v * Complex64::new(p.sigma_s2.sqrt(), 0.0)))
}

/// Alternating transmit/receive beamforming for a multi-antenna source.
///
/// Starts from the better of the dominant right singular vector of `G1` and
/// the first source antenna, then alternates transmit and receive steps,
/// accepting a round only if it raises the SNR, until the relative gain
/// drops below `ω` or `L` rounds have run.
pub fn alternating_mimo(links: &MimoLinks, p: &SystemParams, mode: Mode) -> Result<BeamformerSolution> {
    Targets::new(p)?;
    let (m, q) = (links.rx_dim(), links.tx_dim());
    let sigma_s = Complex64::new(p.sigma_s2.sqrt(), 0.0);
    let mut starts = Vec::new();
    if let Some(u) = dominant_right_singular(&links.g1) {
        starts.push(u * sigma_s);
    }
    let mut e1 = ComplexVector::zeros(q);
    e1[0] = sigma_s;
    starts.push(e1);

    let mut best: Option<BeamformerSolution> = None;
    let mut converged = true;
    for x in &starts {
        let sol = receive_step(links, x, p, mode)?;
        converged &= sol.converged;
        if sol.feasible && best.as_ref().is_none_or(|b| sol.snr > b.snr) {
            best = Some(sol);
        }
    }
    let Some(mut best) = best else {
        let mut sol = BeamformerSolution::infeasible(m, converged);
        sol.x = Some(starts.swap_remove(0));
        return Ok(sol);
    };

    let mut trace = vec![best.snr];
    let mut rounds = 0;
    if q > 1 {
        for _ in 0..p.sca_iters {
            rounds += 1;
            let Some(x) = transmit_step(links, &best.v, p, mode)? else { break };
            let cand = receive_step(links, &x, p, mode)?;
            if !cand.feasible || cand.snr <= best.snr {
                break;
            }
            let gain = (cand.snr - best.snr) / best.snr;
            best = cand;
            trace.push(best.snr);
            if gain < p.omega {
                break;
            }
        }
    }
    best.iterations = rounds;
    best.objective_trace = trace;
    Ok(best)
}
