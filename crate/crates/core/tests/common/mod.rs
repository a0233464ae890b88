//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use backcom_ci::channel::{gen_channel_set, SimoLinks};
use backcom_ci::detection::DetectionStats;
use backcom_ci::numerics::ComplexVector;
use backcom_ci::params::SystemParams;
use nalgebra::dvector;
use num_complex::Complex64;

/// Maximizes `f` over a box by repeated grid search, shrinking the box
/// around the incumbent each round. `None` marks infeasible points.
pub fn zoom_grid<const D: usize>(
    mut lo: [f64; D],
    mut hi: [f64; D],
    points: usize,
    rounds: usize,
    f: impl Fn(&[f64; D]) -> Option<f64>,
) -> Option<(f64, [f64; D])> {
    let (orig_lo, orig_hi) = (lo, hi);
    let mut best: Option<(f64, [f64; D])> = None;
    for _ in 0..rounds {
        for idx in 0..points.pow(D as u32) {
            let mut p = [0.0; D];
            let mut rem = idx;
            for d in 0..D {
                let k = rem % points;
                rem /= points;
                p[d] = lo[d] + (hi[d] - lo[d]) * k as f64 / (points - 1) as f64;
            }
            if let Some(v) = f(&p) {
                if best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, p));
                }
            }
        }
        let Some((_, centre)) = best else { return None };
        for d in 0..D {
            let half = (hi[d] - lo[d]) / 8.0;
            lo[d] = (centre[d] - half).max(orig_lo[d]);
            hi[d] = (centre[d] + half).min(orig_hi[d]);
        }
    }
    best
}

/// Unit vector `(cos a, sin a·e^{jφ})`; covers the unit sphere of `C²` up
/// to a global phase, which no detection quantity depends on.
pub fn circle_point(a: f64, phi: f64) -> ComplexVector {
    dvector![Complex64::new(a.cos(), 0.0), Complex64::from_polar(a.sin(), phi)]
}

pub fn stats(v: &ComplexVector, l: &SimoLinks, p: &SystemParams) -> DetectionStats {
    DetectionStats::compute(v, &l.h0, &l.h1, &l.hbar1, p.sigma_s2, p.sigma_w2, p.samples).unwrap()
}

fn grid_oracle(l: &SimoLinks, p: &SystemParams, ok: impl Fn(&DetectionStats) -> bool) -> Option<f64> {
    assert_eq!(l.dim(), 2);
    zoom_grid([0.0, 0.0], [FRAC_PI_2, 2.0 * PI], 500, 8, |x| {
        let v = circle_point(x[0], x[1]);
        let s = stats(&v, l, p);
        ok(&s).then(|| p.gamma() * v.dotc(&l.h1).norm_sqr())
    })
    .map(|(snr, _)| snr)
}

/// Best SNR over unit `v` with `δ1 >= δ0`, `D >= D^min` and `D̄ >= E^min`.
pub fn consensual_oracle(l: &SimoLinks, p: &SystemParams) -> Option<f64> {
    let (d, e) = (p.d_min().unwrap(), p.e_min().unwrap());
    grid_oracle(l, p, |s| s.delta1 >= s.delta0 && s.kld_with >= d && s.kld_without >= e)
}

/// Best SNR over unit `v` with `ΔD >= 0` and `D̄ >= E^min`.
pub fn evolved_oracle(l: &SimoLinks, p: &SystemParams) -> Option<f64> {
    let e = p.e_min().unwrap();
    grid_oracle(l, p, |s| s.delta1 >= s.delta0 && s.delta_kld >= 0.0 && s.kld_without >= e)
}

/// Every tag of trials `0..` under `p`, as single-source links.
pub fn tag_links(p: &SystemParams, trials: u64) -> impl Iterator<Item = SimoLinks> + '_ {
    (0..trials).flat_map(move |t| {
        let ch = gen_channel_set(p, t).unwrap();
        (0..ch.num_tags()).map(move |k| ch.simo_links(k))
    })
}
