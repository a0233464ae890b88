use num_complex::Complex64;

use super::{mmse_beamformer, BeamformerSolution, Targets, KLD_TOL};
use crate::channel::SimoLinks;
use crate::convex::{solve_ball_qcqp, QcqpProblem, QuadConstraint, SolveError, DEFAULT_TOL};
use crate::error::Result;
use crate::numerics::{abs_inner_sq, normalized, ComplexVector, HermitianMatrix};
use crate::params::SystemParams;

/// Left sides minus right sides of the two consensual constraints at unit `v`:
/// `γ|v^H h1|² - F_f·γ|v^H h0|² - (F_f - 1)` and `γ|v^H h̄1|² - (F_g - 1)`.
pub(crate) fn consensual_margins(v: &ComplexVector, l: &SimoLinks, tg: &Targets) -> (f64, f64) {
    let g = tg.gamma;
    let with = g * abs_inner_sq(v, &l.h1) - tg.ratio_with * g * abs_inner_sq(v, &l.h0) - (tg.ratio_with - 1.0);
    let without = g * abs_inner_sq(v, &l.hbar1) - (tg.ratio_without - 1.0);
    (with, without)
}

/// Convex restriction of the consensual problem around `vbar`: both
/// `|v^H h1|²` and `|v^H h̄1|²` are replaced by their tangent underestimators.
pub(crate) fn restriction(vbar: &ComplexVector, l: &SimoLinks, tg: &Targets) -> QcqpProblem {
    let g = tg.gamma;
    let c = &l.h1 * l.h1.dotc(vbar);
    let cbar = &l.hbar1 * l.hbar1.dotc(vbar);
    let p1 = abs_inner_sq(vbar, &l.h1);
    let pbar = abs_inner_sq(vbar, &l.hbar1);
    let neg_g = Complex64::new(-g, 0.0);
    QcqpProblem {
        objective: c.clone(),
        constraints: vec![
            QuadConstraint {
                a: HermitianMatrix::outer(&l.h0).scaled(tg.ratio_with * g),
                g: &c * neg_g,
                b: -g * p1 - (tg.ratio_with - 1.0),
            },
            QuadConstraint {
                a: HermitianMatrix::zeros(l.dim()),
                g: &cbar * neg_g,
                b: -g * pbar - (tg.ratio_without - 1.0),
            },
        ],
        ball_radius: 1.0,
    }
}

/// Candidate starting beams in the order they are tried.
fn starting_points(l: &SimoLinks, tg: &Targets) -> Vec<ComplexVector> {
    let mut out = Vec::new();
    out.extend(normalized(&l.h1));
    if let Ok(v) = mmse_beamformer(&l.h0, &l.hbar1, tg.sigma_s2, tg.sigma_w2) {
        out.push(v);
    }
    out.extend(normalized(&l.hbar1));
    // Dominant eigenvectors of γ(H1 - F_f·H0) + λ·γ·H̄1 trade the two
    // constraints off; keep those that satisfy both strictly.
    let base = HermitianMatrix::outer(&l.h1).sub(&HermitianMatrix::outer(&l.h0).scaled(tg.ratio_with));
    let hb = HermitianMatrix::outer(&l.hbar1);
    for lam in [0.0, 0.1, 0.3, 1.0, 3.0, 10.0, 100.0] {
        let v = base.add(&hb.scaled(lam)).eig().vectors[0].clone();
        let (a, b) = consensual_margins(&v, l, tg);
        if a > 0.0 && b > 0.0 {
            out.push(v);
        }
    }
    out
}

enum Run {
    Solved(BeamformerSolution),
    /// The first restriction had no interior.
    NoStart,
}

fn run_sca(l: &SimoLinks, tg: &Targets, p: &SystemParams, start: ComplexVector) -> std::result::Result<Run, SolveError> {
    let mut vbar = start;
    let mut current: Option<ComplexVector> = None;
    let mut trace = Vec::new();
    let mut prev_mu: Option<f64> = None;
    let mut iterations = 0;
    for _ in 0..p.sca_iters {
        let sub = restriction(&vbar, l, tg);
        match solve_ball_qcqp(&sub, DEFAULT_TOL) {
            Ok(sol) => {
                // Tangent value γ·μ at the raw subproblem solution.
                let mu = tg.gamma * (2.0 * sol.objective - abs_inner_sq(&vbar, &l.h1));
                let Some(v) = normalized(&sol.v) else { break };
                debug_assert!(tg.gamma * abs_inner_sq(&sol.v, &l.h1) >= mu - 1e-9 * mu.abs().max(1.0));
                iterations += 1;
                trace.push(tg.snr(&v, l));
                vbar = v.clone();
                current = Some(v);
                if let Some(prev) = prev_mu {
                    if (mu - prev).abs() < p.omega * mu.abs().max(1e-300) {
                        break;
                    }
                }
                prev_mu = Some(mu);
            }
            Err(SolveError::Infeasible { .. }) if current.is_none() => return Ok(Run::NoStart),
            Err(SolveError::Invalid(e)) => return Err(SolveError::Invalid(e)),
            Err(e) if current.is_none() => return Err(e),
            // A later restriction failing leaves the last iterate as the answer.
            Err(_) => break,
        }
    }
    let Some(v) = current else {
        return Ok(Run::NoStart);
    };
    let stats = tg.stats(&v, l)?;
    let feasible = stats.kld_with >= tg.d_min - KLD_TOL && stats.kld_without >= tg.e_min - KLD_TOL;
    if !feasible {
        return Ok(Run::NoStart);
    }
    Ok(Run::Solved(BeamformerSolution {
        snr: tg.snr(&v, l),
        v,
        x: None,
        feasible: true,
        converged: true,
        iterations,
        objective_trace: trace,
        rank_residual: None,
        stats: Some(stats),
    }))
}

/// Consensual-CI receive beamforming by successive convex approximation.
///
/// Maximizes `γ|v^H h1|²` over unit `v` subject to `D_KL >= D^min` and
/// `D̄_KL >= E^min`, written through the ratio floors as
/// `γ|v^H h1|² >= F_f·γ|v^H h0|² + F_f - 1` and `γ|v^H h̄1|² >= F_g - 1`.
pub fn consensual_sca(l: &SimoLinks, p: &SystemParams) -> Result<BeamformerSolution> {
    let tg = Targets::new(p)?;
    let m = l.dim();
    if !tg.backscatter_can_reach(l) {
        return Ok(BeamformerSolution::infeasible(m, true));
    }
    let mut converged = true;
    for start in starting_points(l, &tg) {
        match run_sca(l, &tg, p, start) {
            Ok(Run::Solved(sol)) => return Ok(sol),
            Ok(Run::NoStart) => {}
            Err(SolveError::NotConverged { .. }) => converged = false,
            Err(SolveError::Infeasible { .. }) => {}
            Err(SolveError::Invalid(e)) => return Err(e),
        }
    }
    Ok(BeamformerSolution::infeasible(m, converged))
}
