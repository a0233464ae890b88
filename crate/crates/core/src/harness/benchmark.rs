use nalgebra::dvector;
use num_complex::Complex64;

use crate::beamforming::{mmse_beamformer, BeamformerSolution};
use crate::channel::{ChannelRealization, SimoLinks};
use crate::detection::DetectionStats;
use crate::error::Result;
use crate::numerics::{abs_inner_sq, dominant_right_singular, normalized, ComplexVector};
use crate::params::SystemParams;
use crate::selection::SelectionResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Benchmark {
    /// MMSE receiver treating the direct link as interference.
    HarmfulDli,
    /// Direct link removed; matched filter on the backscatter link.
    CanceledDli,
}

/// Single-source links of tag `k` and the transmit beam used for them. A
/// multi-antenna source points at the tag's backscatter link.
fn tag_links(ch: &ChannelRealization, k: usize, p: &SystemParams) -> (SimoLinks, ComplexVector) {
    let sigma_s = p.sigma_s2.sqrt();
    if ch.tx_antennas() == 1 {
        return (ch.simo_links(k), dvector![Complex64::new(sigma_s, 0.0)]);
    }
    let links = ch.mimo_links(k);
    let mut u = dominant_right_singular(&links.gbar1).unwrap_or_else(|| ComplexVector::zeros(ch.tx_antennas()));
    if u.norm() == 0.0 {
        u[0] = Complex64::new(1.0, 0.0);
    }
    let x = u * Complex64::new(sigma_s, 0.0);
    (links.for_transmit(&x, sigma_s), x)
}

fn solution(v: ComplexVector, x: ComplexVector, snr: f64, feasible: bool, stats: DetectionStats) -> BeamformerSolution {
    BeamformerSolution {
        v,
        x: Some(x),
        snr,
        feasible,
        converged: true,
        iterations: 0,
        objective_trace: vec![snr],
        rank_residual: None,
        stats: Some(stats),
    }
}

fn harmful(l: &SimoLinks, x: ComplexVector, p: &SystemParams, floor: f64) -> Result<BeamformerSolution> {
    let Ok(v) = mmse_beamformer(&l.h0, &l.hbar1, p.sigma_s2, p.sigma_w2) else {
        return Ok(BeamformerSolution::infeasible(l.dim(), true));
    };
    let signal = abs_inner_sq(&v, &l.hbar1);
    let sinr = signal * p.sigma_s2 / (abs_inner_sq(&v, &l.h0) * p.sigma_s2 + p.sigma_w2);
    let stats = DetectionStats::compute(&v, &l.h0, &l.h1, &l.hbar1, p.sigma_s2, p.sigma_w2, p.samples)?;
    let feasible = p.gamma() * signal >= floor;
    Ok(solution(v, x, sinr, feasible, stats))
}

fn canceled(l: &SimoLinks, x: ComplexVector, p: &SystemParams, floor: f64) -> Result<BeamformerSolution> {
    let Some(v) = normalized(&l.hbar1) else {
        return Ok(BeamformerSolution::infeasible(l.dim(), true));
    };
    let zero = ComplexVector::zeros(l.dim());
    let snr = p.gamma() * l.hbar1.norm_squared();
    let stats = DetectionStats::compute(&v, &zero, &l.hbar1, &l.hbar1, p.sigma_s2, p.sigma_w2, p.samples)?;
    Ok(solution(v, x, snr, snr >= floor, stats))
}

/// Runs a benchmark scheme on every tag and selects greedily.
///
/// Both schemes are feasible when `γ|v^H h̄1|² >= F(g^min) - 1`, the
/// no-direct-link detection floor. The harmful scheme reports the SINR of the
/// MMSE receiver; the canceled scheme reports `γ‖h̄1‖²` and statistics of the
/// channel with the direct link removed.
pub fn run_benchmark(ch: &ChannelRealization, p: &SystemParams, scheme: Benchmark) -> Result<SelectionResult> {
    p.validate()?;
    let floor = p.ratio_floor_without()? - 1.0;
    let per_tag = (0..ch.num_tags())
        .map(|k| {
            let (l, x) = tag_links(ch, k, p);
            match scheme {
                Benchmark::HarmfulDli => harmful(&l, x, p, floor),
                Benchmark::CanceledDli => canceled(&l, x, p, floor),
            }
            .map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SelectionResult::from_candidates(per_tag))
}
