//! Quick oracle checks runnable from the command line.

use std::f64::consts::{FRAC_PI_3, PI, TAU};

use nalgebra::dvector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{run_sweep, write_csv, Algorithm, SweepConfig, SweepVar};
use crate::beamforming::{consensual_sca, evolved_sdp};
use crate::channel::{gen_channel_set, keyed_rng, SimoLinks, Stream};
use crate::detection::{dep_lower_bound, kld_threshold, DetectionStats};
use crate::error::Result;
use crate::numerics::big_f;
use crate::params::SystemParams;
use crate::siso::{ci_angle, snr_interval};

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, run: impl FnOnce() -> Result<(bool, String)>) -> SelfCheck {
    match run() {
        Ok((passed, detail)) => SelfCheck { name, passed, detail },
        Err(e) => SelfCheck { name, passed: false, detail: e.to_string() },
    }
}

fn gaussian(rng: &mut impl Rng, scale: f64) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * scale
}

/// Root of `ln y + 1/y = x` on `y >= 1` by bisection.
fn bisect_ratio(x: f64) -> f64 {
    let g = |y: f64| y.ln() + 1.0 / y - x;
    let (mut lo, mut hi) = (1.0, 2.0);
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Best consensual SNR over a phase-reduced grid of the unit circle in `C²`.
fn consensual_grid(l: &SimoLinks, p: &SystemParams) -> Result<Option<f64>> {
    let (d, e) = (p.d_min()?, p.e_min()?);
    let n = 400;
    let mut best: Option<f64> = None;
    for i in 0..=n {
        let a = 0.5 * PI * i as f64 / n as f64;
        for j in 0..n {
            let phi = TAU * j as f64 / n as f64;
            let v = dvector![Complex64::new(a.cos(), 0.0), Complex64::from_polar(a.sin(), phi)];
            let s = DetectionStats::compute(&v, &l.h0, &l.h1, &l.hbar1, p.sigma_s2, p.sigma_w2, p.samples)?;
            if s.delta1 >= s.delta0 && s.kld_with >= d && s.kld_without >= e {
                let snr = p.gamma() * v.dotc(&l.h1).norm_sqr();
                best = Some(best.map_or(snr, |b: f64| b.max(snr)));
            }
        }
    }
    Ok(best)
}

/// Runs the built-in checks; each returns pass/fail with a short detail.
pub fn selftest() -> Vec<SelfCheck> {
    vec![
        check("threshold anchor", || {
            let d = kld_threshold(0.5)?;
            let round: f64 = [0.1, 0.3, 0.5, 0.9]
                .iter()
                .map(|&e| Ok((dep_lower_bound(kld_threshold(e)?)? - e).abs()))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            Ok(((d - 0.287_682_072_4).abs() <= 1e-9 && round <= 1e-12, format!("D(0.5) = {d:.10}, round trip {round:.1e}")))
        }),
        check("ratio function vs bisection", || {
            let mut worst: f64 = 0.0;
            for k in 0..50 {
                let x = 1.0 + 0.1 * k as f64;
                let want = bisect_ratio(x);
                worst = worst.max((big_f(x)? - want).abs() / want);
            }
            Ok((worst <= 1e-10, format!("max relative error {worst:.1e}")))
        }),
        check("scalar region vs KLD definitions", || {
            let p = SystemParams::default();
            let (e_min, g_min) = (p.e_min()?, p.g_min()?);
            let mut rng = keyed_rng(17, 0, 0, Stream::Geometry);
            let mut bad = 0;
            for _ in 0..300 {
                let (h_sr, h_str) = (gaussian(&mut rng, 0.5), gaussian(&mut rng, 0.5));
                let gamma = 10f64.powf(rng.random_range(-1.0..2.0));
                let r = snr_interval(h_sr, h_str, g_min)?;
                let near = |b: f64| b.is_finite() && (gamma - b).abs() <= 1e-9 * b.abs().max(1.0);
                if near(r.gamma_lo) || near(r.gamma_hi) {
                    continue;
                }
                let v = dvector![Complex64::new(1.0, 0.0)];
                let s = DetectionStats::compute(&v, &dvector![h_sr], &dvector![h_sr + h_str], &dvector![h_str], gamma, 1.0, p.samples)?;
                let direct = s.delta1 >= s.delta0 && s.delta_kld >= 0.0 && s.kld_without >= e_min;
                bad += (direct != (r.gamma_lo <= gamma && gamma <= r.gamma_hi)) as usize;
            }
            Ok((bad == 0, format!("{bad} disagreements in 300 draws")))
        }),
        check("constructive angle anchor", || {
            let t = ci_angle(1.0, 1.0, 1.0).unwrap_or(f64::NAN);
            Ok(((t - FRAC_PI_3).abs() <= 1e-9, format!("angle {t:.12}")))
        }),
        check("scalar evolved solver vs region", || {
            let p = SystemParams { rx_antennas: 1, ..Default::default() };
            let mut rng = keyed_rng(19, 0, 0, Stream::Geometry);
            let mut bad = 0;
            for _ in 0..100 {
                let (h_sr, h_str) = (gaussian(&mut rng, 0.3), gaussian(&mut rng, 0.3));
                let r = snr_interval(h_sr, h_str, p.g_min()?)?;
                let member = r.gamma_lo <= p.gamma() && p.gamma() <= r.gamma_hi;
                let sol = evolved_sdp(&SimoLinks::new(dvector![h_sr], dvector![h_str])?, &p)?;
                bad += (sol.feasible != member) as usize;
            }
            Ok((bad == 0, format!("{bad} disagreements in 100 draws")))
        }),
        check("two-antenna consensual vs grid", || {
            let p = SystemParams { rx_antennas: 2, ..Default::default() };
            let mut worst: f64 = 0.0;
            let mut seen = 0;
            'outer: for t in 0..50 {
                let ch = gen_channel_set(&p, t)?;
                for k in 0..ch.num_tags() {
                    let l = ch.simo_links(k);
                    let sol = consensual_sca(&l, &p)?;
                    if !sol.feasible {
                        continue;
                    }
                    let Some(grid) = consensual_grid(&l, &p)? else { continue };
                    // The solver may beat a finite grid, never lose to it by much.
                    worst = worst.max((grid - sol.snr) / grid);
                    seen += 1;
                    if seen == 3 {
                        break 'outer;
                    }
                }
            }
            Ok((seen > 0 && worst <= 1e-2, format!("{seen} instances, worst shortfall {worst:.1e}")))
        }),
        check("sweep determinism across workers", || {
            let cfg = SweepConfig {
                sweep_var: SweepVar::SigmaS2,
                values: vec![0.4, 0.8],
                trials: 3,
                algorithms: Algorithm::ALL.to_vec(),
                base: SystemParams { t_grid: 10, ..Default::default() },
                out_path: None,
            };
            let mut a = Vec::new();
            let mut b = Vec::new();
            write_csv(&run_sweep(&cfg, Some(1))?.records, &mut a)?;
            write_csv(&run_sweep(&cfg, Some(3))?.records, &mut b)?;
            Ok((a == b, format!("{} bytes", a.len())))
        }),
    ]
}
