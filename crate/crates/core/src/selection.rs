//! Single-tag selection across the candidates of one realization.

use rand::Rng;
use rayon::prelude::*;

use crate::beamforming::{alternating_mimo, solve_tag, BeamformerSolution, Mode};
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::params::SystemParams;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// One-based index of the chosen tag; `None` when nothing is feasible.
    pub selected_tag: Option<usize>,
    /// Per-tag solutions in tag order; `None` for tags that were not solved.
    pub per_tag: Vec<Option<BeamformerSolution>>,
    pub best: Option<BeamformerSolution>,
}

impl SelectionResult {
    /// Whether every solved tag reported infeasibility without certifying it.
    pub fn solver_gave_up(&self) -> bool {
        self.best.is_none() && self.per_tag.iter().flatten().any(|s| !s.converged)
    }

    /// Argmax of SNR over feasible solved tags, ties to the smallest index.
    pub fn from_candidates(per_tag: Vec<Option<BeamformerSolution>>) -> Self {
        let mut pick: Option<usize> = None;
        for (k, sol) in per_tag.iter().enumerate() {
            let Some(sol) = sol.as_ref().filter(|s| s.feasible) else { continue };
            if pick.is_none_or(|j| sol.snr > per_tag[j].as_ref().unwrap().snr) {
                pick = Some(k);
            }
        }
        Self {
            selected_tag: pick.map(|k| k + 1),
            best: pick.and_then(|k| per_tag[k].clone()),
            per_tag,
        }
    }
}

/// Solves tag `k` (zero-based) of `ch`, alternating over transmit beams when
/// the source has more than one antenna.
pub fn solve_tag_in(ch: &ChannelRealization, k: usize, p: &SystemParams, mode: Mode) -> Result<BeamformerSolution> {
    if k >= ch.num_tags() {
        return Err(Error::InvalidParam(format!("tag {} of {}", k + 1, ch.num_tags())));
    }
    if ch.tx_antennas() == 1 {
        let mut sol = solve_tag(&ch.simo_links(k), p, mode)?;
        sol.x = Some(nalgebra::dvector![num_complex::Complex64::new(p.sigma_s2.sqrt(), 0.0)]);
        Ok(sol)
    } else {
        alternating_mimo(&ch.mimo_links(k), p, mode)
    }
}

fn require_tags(ch: &ChannelRealization) -> Result<()> {
    if ch.num_tags() == 0 {
        return Err(Error::InvalidParam("no candidate tags".into()));
    }
    Ok(())
}

/// Solves every tag and keeps the feasible one with the highest SNR.
pub fn greedy_select(ch: &ChannelRealization, p: &SystemParams, mode: Mode) -> Result<SelectionResult> {
    require_tags(ch)?;
    let per_tag = (0..ch.num_tags())
        .into_par_iter()
        .map(|k| solve_tag_in(ch, k, p, mode).map(Some))
        .collect::<Result<Vec<_>>>()?;
    Ok(SelectionResult::from_candidates(per_tag))
}

/// Picks a tag uniformly at random and solves only that one; an infeasible
/// pick is reported as such, with no redraw.
pub fn random_select<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    p: &SystemParams,
    mode: Mode,
    rng: &mut R,
) -> Result<SelectionResult> {
    require_tags(ch)?;
    let k = rng.random_range(0..ch.num_tags());
    let mut per_tag = vec![None; ch.num_tags()];
    per_tag[k] = Some(solve_tag_in(ch, k, p, mode)?);
    Ok(SelectionResult::from_candidates(per_tag))
}
