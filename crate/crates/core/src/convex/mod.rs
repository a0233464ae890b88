//! Small dense convex solvers used as the per-iteration engines of the
//! beamforming algorithms.

mod barrier;
mod qcqp;
mod sdp;

pub use qcqp::{solve_ball_qcqp, QcqpProblem, QcqpSolution, QuadConstraint};
pub use sdp::{solve_small_sdp, Relation, SdpConstraint, SdpProblem, SdpSolution};

/// Default barrier stopping tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    /// No strictly feasible point; `violation` is the smallest uniform
    /// violation phase one reached, in units of each constraint's scale.
    #[error("infeasible (residual violation {violation:.3e})")]
    Infeasible { violation: f64 },

    #[error("barrier method did not converge after {newton_steps} Newton steps")]
    NotConverged { newton_steps: usize },

    #[error(transparent)]
    Invalid(#[from] crate::error::Error),
}
