//! Receive (and transmit) beamforming under the CI detection constraints.

mod consensual;
mod evolved;
mod mimo;
mod mmse;

pub use consensual::consensual_sca;
pub use evolved::evolved_sdp;
pub use mimo::alternating_mimo;
pub use mmse::mmse_beamformer;

use crate::channel::SimoLinks;
use crate::detection::DetectionStats;
use crate::error::Result;
use crate::numerics::{abs_inner_sq, ComplexVector, HermitianMatrix};
use crate::params::SystemParams;

/// Slack allowed when re-verifying KLD constraints at a returned beamformer.
pub const KLD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Consensual,
    Evolved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSolution {
    /// Unit-norm receive beamformer.
    pub v: ComplexVector,
    /// Transmit beamformer with `‖x‖² = σ_s²` (multi-antenna source only).
    pub x: Option<ComplexVector>,
    /// Received SNR `γ·|v^H h1|²`, linear.
    pub snr: f64,
    pub feasible: bool,
    /// False when a convex subproblem exhausted its Newton budget and no
    /// feasible point was found, so infeasibility is not certified.
    pub converged: bool,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    /// `λ2/λ1` of the final lifted matrix (evolved mode only).
    pub rank_residual: Option<f64>,
    pub stats: Option<DetectionStats>,
}

impl BeamformerSolution {
    pub(crate) fn infeasible(dim: usize, converged: bool) -> Self {
        Self {
            v: ComplexVector::zeros(dim),
            x: None,
            snr: 0.0,
            feasible: false,
            converged,
            iterations: 0,
            objective_trace: Vec::new(),
            rank_residual: None,
            stats: None,
        }
    }
}

/// Scalar targets derived once per problem.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Targets {
    pub gamma: f64,
    pub sigma_s2: f64,
    pub sigma_w2: f64,
    pub samples: usize,
    pub d_min: f64,
    pub e_min: f64,
    /// `F(D^min/N + 1)`, the floor on `δ1/δ0`.
    pub ratio_with: f64,
    /// `F(E^min/N + 1)`, the floor on `δ̄1/δ̄0`.
    pub ratio_without: f64,
}

impl Targets {
    pub fn new(p: &SystemParams) -> Result<Self> {
        p.validate()?;
        Ok(Self {
            gamma: p.gamma(),
            sigma_s2: p.sigma_s2,
            sigma_w2: p.sigma_w2,
            samples: p.samples,
            d_min: p.d_min()?,
            e_min: p.e_min()?,
            ratio_with: p.ratio_floor_with()?,
            ratio_without: p.ratio_floor_without()?,
        })
    }

    pub fn stats(&self, v: &ComplexVector, l: &SimoLinks) -> Result<DetectionStats> {
        DetectionStats::compute(v, &l.h0, &l.h1, &l.hbar1, self.sigma_s2, self.sigma_w2, self.samples)
    }

    /// Whether the backscatter link alone can meet the no-direct-link floor:
    /// `max_v γ|v^H h̄1|² = γ‖h̄1‖²`.
    pub fn backscatter_can_reach(&self, l: &SimoLinks) -> bool {
        self.gamma * l.hbar1.norm_squared() >= self.ratio_without - 1.0
    }

    pub fn snr(&self, v: &ComplexVector, l: &SimoLinks) -> f64 {
        self.gamma * abs_inner_sq(v, &l.h1)
    }
}

/// Dominant unit eigenvector of `w` and `λ2/λ1` (0 when exactly rank one).
pub fn recover_rank_one(w: &HermitianMatrix) -> (ComplexVector, f64) {
    let eig = w.eig();
    let v = eig.vectors[0].clone();
    let l1 = eig.values[0];
    let residual = if eig.values.len() < 2 || l1 <= 0.0 {
        0.0
    } else {
        (eig.values[1].max(0.0) / l1).min(1.0)
    };
    (v, residual)
}

/// Per-tag solver for the given mode.
pub fn solve_tag(links: &SimoLinks, params: &SystemParams, mode: Mode) -> Result<BeamformerSolution> {
    match mode {
        Mode::Consensual => consensual_sca(links, params),
        Mode::Evolved => evolved_sdp(links, params),
    }
}
