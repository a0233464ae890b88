use std::cmp::Ordering;

use super::{recover_rank_one, BeamformerSolution, Targets, KLD_TOL};
use crate::channel::SimoLinks;
use crate::convex::{solve_small_sdp, Relation, SdpConstraint, SdpProblem, SolveError, DEFAULT_TOL};
use crate::detection::evolved_margin;
use crate::error::Result;
use crate::numerics::{ComplexVector, HermitianMatrix};
use crate::params::SystemParams;

/// Rank residual accepted as rank one before the penalty weight is doubled.
pub const RANK_TOL: f64 = 1e-3;
const MAX_DOUBLINGS: usize = 6;

struct Lifted {
    h0: HermitianMatrix,
    h1: HermitianMatrix,
    hbar1: HermitianMatrix,
}

impl Lifted {
    /// Feasible set at slack `t`: `Tr W = 1`, `W ⪰ 0`,
    /// `Tr((H1 - (1+γt)H̄1)W) >= t`, `γ·Tr(H̄1 W) >= F_g - 1`, `Tr(H0 W) <= t`.
    fn problem(&self, t: f64, objective: HermitianMatrix, tg: &Targets) -> SdpProblem {
        let m = self.h0.dim();
        SdpProblem {
            objective,
            constraints: vec![
                SdpConstraint::new(HermitianMatrix::identity(m), Relation::Eq, 1.0),
                SdpConstraint::new(
                    self.h1.sub(&self.hbar1.scaled(1.0 + tg.gamma * t)),
                    Relation::Ge,
                    t,
                ),
                SdpConstraint::new(self.hbar1.scaled(tg.gamma), Relation::Ge, tg.ratio_without - 1.0),
                SdpConstraint::new(self.h0.clone(), Relation::Le, t),
            ],
        }
    }
}

/// Evenly spaced slack values over `[lo, hi]`, collapsed to one point when
/// the interval is degenerate.
fn slack_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 || hi - lo <= 1e-15 * hi.abs().max(1e-300) {
        return vec![hi];
    }
    (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect()
}

struct Relaxed {
    t: f64,
    bound: f64,
    w: HermitianMatrix,
}

struct Penalized {
    w: HermitianMatrix,
    trace: Vec<f64>,
    iterations: usize,
    rank_residual: f64,
}

/// Difference-of-convex penalty loop at fixed `t`: maximize
/// `γ·Tr(H1 W) - χ·(Tr W - λ_max(W))` with `λ_max` linearized at the current
/// iterate's dominant eigenvector.
fn penalty_loop(
    lifted: &Lifted,
    t: f64,
    start: HermitianMatrix,
    tg: &Targets,
    p: &SystemParams,
) -> std::result::Result<Penalized, SolveError> {
    let mut chi = p.chi.unwrap_or(10.0 * tg.gamma * lifted.h1.lambda_max());
    let objective = |w: &HermitianMatrix, chi: f64| tg.gamma * lifted.h1.inner(w) - chi * (w.trace() - w.lambda_max());
    let mut w = start;
    let mut iterations = 0;
    let mut trace;
    let mut doublings = 0;
    loop {
        trace = vec![objective(&w, chi)];
        for _ in 0..p.penalty_iters {
            let (u, _) = recover_rank_one(&w);
            let c = lifted.h1.scaled(tg.gamma).add(&HermitianMatrix::outer(&u).scaled(chi));
            let next = match solve_small_sdp(&lifted.problem(t, c, tg), DEFAULT_TOL) {
                Ok(sol) => sol.w,
                Err(e) if iterations == 0 => return Err(e),
                Err(_) => break,
            };
            iterations += 1;
            let prev = *trace.last().unwrap();
            let obj = objective(&next, chi);
            trace.push(obj);
            w = next;
            if (obj - prev).abs() < p.omega * obj.abs().max(1e-300) {
                break;
            }
        }
        let (_, residual) = recover_rank_one(&w);
        if residual <= RANK_TOL || doublings == MAX_DOUBLINGS {
            return Ok(Penalized {
                w,
                trace,
                iterations,
                rank_residual: residual,
            });
        }
        chi *= 2.0;
        doublings += 1;
    }
}

/// Checks the evolved-CI contract at unit `v` straight from the KLDs.
fn verified(v: &ComplexVector, l: &SimoLinks, tg: &Targets) -> Result<bool> {
    let s = tg.stats(v, l)?;
    let scale = crate::numerics::abs_inner_sq(v, &l.h1).max(1e-300);
    Ok(s.delta_kld >= -KLD_TOL
        && s.kld_without >= tg.e_min - KLD_TOL
        && evolved_margin(v, &l.h0, &l.h1, &l.hbar1, tg.gamma) >= -KLD_TOL * scale)
}

/// Evolved-CI receive beamforming by a slack grid over `t >= |v^H h0|²`
/// with a rank-one-penalized SDP at each grid point.
///
/// The SDP relaxation at each `t` bounds what the penalized problem can reach
/// there, so grid points are refined in order of decreasing bound and the
/// search stops once no remaining bound can beat the incumbent. The result is
/// the same as refining every grid point.
pub fn evolved_sdp(l: &SimoLinks, p: &SystemParams) -> Result<BeamformerSolution> {
    let tg = Targets::new(p)?;
    let m = l.dim();
    if !tg.backscatter_can_reach(l) {
        return Ok(BeamformerSolution::infeasible(m, true));
    }
    let lifted = Lifted {
        h0: HermitianMatrix::outer(&l.h0),
        h1: HermitianMatrix::outer(&l.h1),
        hbar1: HermitianMatrix::outer(&l.hbar1),
    };
    let lo = lifted.h0.lambda_min().max(0.0);
    let hi = lifted.h0.lambda_max().max(lo);
    let mut converged = true;

    let mut relaxed = Vec::new();
    for t in slack_grid(lo, hi, p.t_grid) {
        match solve_small_sdp(&lifted.problem(t, lifted.h1.scaled(tg.gamma), &tg), DEFAULT_TOL) {
            Ok(sol) => relaxed.push(Relaxed { t, bound: sol.dual_bound, w: sol.w }),
            Err(SolveError::Infeasible { .. }) => {}
            Err(SolveError::NotConverged { .. }) => converged = false,
            Err(SolveError::Invalid(e)) => return Err(e),
        }
    }
    relaxed.sort_by(|a, b| b.bound.partial_cmp(&a.bound).unwrap_or(Ordering::Equal).then(a.t.total_cmp(&b.t)));

    let tie = |x: f64| 1e-9 * x.abs().max(1.0);
    let mut best: Option<(f64, BeamformerSolution)> = None;
    for r in relaxed {
        if let Some((_, b)) = &best {
            if r.bound < b.snr - tie(b.snr) {
                break;
            }
        }
        let run = match penalty_loop(&lifted, r.t, r.w, &tg, p) {
            Ok(run) => run,
            Err(SolveError::NotConverged { .. }) => {
                converged = false;
                continue;
            }
            Err(SolveError::Infeasible { .. }) => continue,
            Err(SolveError::Invalid(e)) => return Err(e),
        };
        let (v, _) = recover_rank_one(&run.w);
        if !verified(&v, l, &tg)? {
            continue;
        }
        let snr = tg.snr(&v, l);
        let better = match &best {
            None => true,
            Some((bt, b)) => snr > b.snr + tie(b.snr) || ((snr - b.snr).abs() <= tie(b.snr) && r.t < *bt),
        };
        if better {
            let stats = tg.stats(&v, l)?;
            best = Some((
                r.t,
                BeamformerSolution {
                    v,
                    x: None,
                    snr,
                    feasible: true,
                    converged: true,
                    iterations: run.iterations,
                    objective_trace: run.trace,
                    rank_residual: Some(run.rank_residual),
                    stats: Some(stats),
                },
            ));
        }
    }
    Ok(match best {
        Some((_, sol)) => sol,
        None => BeamformerSolution::infeasible(m, converged),
    })
}
