//! Acceptance gate: one pass/fail line per criterion, then a hard assert.

mod common;

use std::f64::consts::{FRAC_PI_3, PI};
use std::io::Write;
use std::time::Instant;

use backcom_ci::beamforming::{evolved_sdp, Mode};
use backcom_ci::channel::{gen_channel_set, keyed_rng, SimoLinks, Stream};
use backcom_ci::detection::{dep_lower_bound, dep_oracle, evolved_margin, kld, kld_threshold, DetectionStats};
use backcom_ci::harness::{
    ci_region_report, run_sweep, write_csv, Algorithm, RegionRow, RunConfig, SweepConfig, SweepVar,
};
use backcom_ci::numerics::{big_f, ComplexVector};
use backcom_ci::params::SystemParams;
use backcom_ci::selection::greedy_select;
use backcom_ci::siso::{ci_angle, snr_interval};
use nalgebra::dvector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

type Verdict = (bool, String);

fn gaussian(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn random_unit(rng: &mut impl Rng, m: usize) -> ComplexVector {
    ComplexVector::from_fn(m, |_, _| gaussian(rng)).normalize()
}

fn monotone_within(trace: &[f64], omega: f64) -> bool {
    trace.windows(2).all(|w| w[1] >= w[0] - omega * w[0].abs())
}

fn threshold_anchor() -> Verdict {
    let d = kld_threshold(0.5).unwrap();
    let worst = [0.1, 0.3, 0.5, 0.9]
        .iter()
        .map(|&e| (dep_lower_bound(kld_threshold(e).unwrap()).unwrap() - e).abs())
        .fold(0.0, f64::max);
    (
        (d - 0.287_682_072_4).abs() <= 1e-9 && worst <= 1e-12,
        format!("threshold {d:.10}, worst round trip {worst:.1e}"),
    )
}

fn bound_validity() -> Verdict {
    let start = Instant::now();
    let mut rng = keyed_rng(2, 0, 0, Stream::Geometry);
    let mut violations = 0;
    for _ in 0..10_000 {
        let d0 = 10f64.powf(rng.random_range(-2.0..1.0));
        let d1 = 10f64.powf(rng.random_range(-2.0..1.0));
        let n = rng.random_range(1..=8);
        let bound = dep_lower_bound(kld(d0, d1, n).unwrap()).unwrap();
        if bound > dep_oracle(d0, d1, n).unwrap() + 1e-9 {
            violations += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (violations == 0 && secs < 5.0, format!("{violations} violations in 10^4 draws, {secs:.2} s"))
}

fn ratio_equivalence() -> Verdict {
    let mut rng = keyed_rng(3, 0, 0, Stream::Geometry);
    let (mut violations, mut banded) = (0, 0);
    for _ in 0..10_000 {
        let f = rng.random_range(1.0..5.0);
        let x = 10f64.powf(rng.random_range(0.0..2.5));
        let lhs = x.ln() + 1.0 / x - f;
        let floor = big_f(f).unwrap();
        if lhs.abs() <= 1e-9 || (x - floor).abs() <= 1e-9 * floor {
            banded += 1;
            continue;
        }
        violations += ((lhs >= 0.0) != (x >= floor)) as usize;
    }
    (violations == 0, format!("{violations} violations, {banded} draws in the boundary band"))
}

fn evolved_inequality_equivalence() -> Verdict {
    let p = SystemParams::default();
    let mut rng = keyed_rng(4, 0, 0, Stream::Geometry);
    let (mut checked, mut violations, mut off_branch, mut off_branch_disagree) = (0, 0, 0, 0);
    for l in common::tag_links(&p, 10_000) {
        if checked == 10_000 {
            break;
        }
        let v = random_unit(&mut rng, 4);
        let s = common::stats(&v, &l, &p);
        let margin = evolved_margin(&v, &l.h0, &l.h1, &l.hbar1, p.gamma());
        let scale = v.dotc(&l.h1).norm_sqr().max(1e-300);
        if s.delta_kld.abs() <= 1e-9 || margin.abs() <= 1e-9 * scale {
            continue;
        }
        let agree = (s.delta_kld >= 0.0) == (margin >= 0.0);
        // The equivalence is stated on the constructive branch δ1 >= δ0.
        if s.delta1 < s.delta0 {
            off_branch += 1;
            off_branch_disagree += !agree as usize;
            continue;
        }
        checked += 1;
        violations += !agree as usize;
    }
    (
        violations == 0 && checked == 10_000,
        format!(
            "{violations} violations in {checked} on-branch draws ({off_branch} off-branch draws skipped, {off_branch_disagree} of them disagree)"
        ),
    )
}

fn feasible_selections(p: &SystemParams, mode: Mode, wanted: usize) -> Vec<(SimoLinks, backcom_ci::beamforming::BeamformerSolution)> {
    let mut out = Vec::new();
    for trial in 0..2000 {
        let ch = gen_channel_set(p, trial).unwrap();
        let r = greedy_select(&ch, p, mode).unwrap();
        if let (Some(k), Some(best)) = (r.selected_tag, r.best) {
            out.push((ch.simo_links(k - 1), best));
            if out.len() == wanted {
                break;
            }
        }
    }
    out
}

fn sca_contract() -> Verdict {
    let p = SystemParams::default();
    let (d_min, e_min) = (p.d_min().unwrap(), p.e_min().unwrap());
    let runs = feasible_selections(&p, Mode::Consensual, 100);
    let good = runs
        .iter()
        .filter(|(l, sol)| {
            let s = common::stats(&sol.v, l, &p);
            monotone_within(&sol.objective_trace, p.omega) && s.kld_with >= d_min - 1e-6 && s.kld_without >= e_min - 1e-6
        })
        .count();
    (runs.len() == 100 && good == 100, format!("{good}/{} feasible seeds meet the contract", runs.len()))
}

fn evolved_contract() -> Verdict {
    let p = SystemParams::default();
    let runs = feasible_selections(&p, Mode::Evolved, 100);
    let rank_ok = runs.iter().filter(|(_, s)| s.rank_residual.is_some_and(|r| r <= 1e-3)).count();
    let gap_ok = runs.iter().filter(|(l, s)| common::stats(&s.v, l, &p).delta_kld >= -1e-6).count();
    let worst = runs.iter().filter_map(|(_, s)| s.rank_residual).fold(0.0, f64::max);
    let n = runs.len();
    (
        n == 100 && rank_ok * 100 >= 95 * n && gap_ok == n,
        format!("rank one on {rank_ok}/{n} (worst residual {worst:.1e}), KLD gap held on {gap_ok}/{n}"),
    )
}

fn small_instance_oracles() -> Verdict {
    let p = SystemParams { rx_antennas: 2, ..Default::default() };
    let mut worst = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for (i, mode) in [Mode::Consensual, Mode::Evolved].into_iter().enumerate() {
        for (l, sol) in feasible_selections(&p, mode, 20) {
            let oracle = match mode {
                Mode::Consensual => common::consensual_oracle(&l, &p),
                Mode::Evolved => common::evolved_oracle(&l, &p),
            };
            let Some(oracle) = oracle else {
                worst[i] = f64::INFINITY;
                continue;
            };
            worst[i] = worst[i].max((sol.snr - oracle).abs() / oracle);
            counts[i] += 1;
        }
    }

    let p1 = SystemParams { rx_antennas: 1, ..Default::default() };
    let g_min = p1.g_min().unwrap();
    let (mut draws, mut disagree) = (0, 0);
    for l in common::tag_links(&p1, 100).take(500) {
        let r = snr_interval(l.h0[0], l.hbar1[0], g_min).unwrap();
        let member = r.gamma_lo <= p1.gamma() && p1.gamma() <= r.gamma_hi;
        disagree += (evolved_sdp(&l, &p1).unwrap().feasible != member) as usize;
        draws += 1;
    }
    (
        counts == [20, 20] && worst.iter().all(|&w| w <= 1e-2) && draws == 500 && disagree == 0,
        format!(
            "M = 2 worst relative gap: consensual {:.1e} ({} seeds), evolved {:.1e} ({} seeds); M = 1 {disagree} disagreements in {draws} draws",
            worst[0], counts[0], worst[1], counts[1]
        ),
    )
}

fn angle_anchor() -> Verdict {
    let anchor = ci_angle(0.5, 1.0, 2.0).unwrap();
    let mut bad = 0;
    let mut sweeps = 0;
    // |h_str| >= 2|h_sr| keeps every phase on the constructive branch.
    for (a, b, gamma) in [(0.5, 1.0, 2.0), (0.3, 0.9, 3.0), (0.2, 1.5, 1.0), (0.4, 0.8, 5.0)] {
        let Some(theta) = ci_angle(a, b, gamma) else { continue };
        sweeps += 1;
        let h_sr = Complex64::new(a, 0.0);
        for i in 0..=100_000 {
            let phase = PI * i as f64 / 100_000.0;
            if (phase - theta).abs() <= 1e-4 {
                continue;
            }
            let h_str = Complex64::from_polar(b, phase);
            let v = dvector![Complex64::new(1.0, 0.0)];
            let s = DetectionStats::compute(&v, &dvector![h_sr], &dvector![h_sr + h_str], &dvector![h_str], gamma, 1.0, 10)
                .unwrap();
            bad += ((s.delta_kld >= 0.0) != (phase <= theta)) as usize;
        }
    }
    (
        (anchor - FRAC_PI_3).abs() <= 1e-9 && bad == 0 && sweeps == 4,
        format!("angle {anchor:.12}, {bad} sign errors outside the 1e-4 band over {sweeps} sweeps"),
    )
}

fn trend_reproduction() -> Verdict {
    let cfg = SweepConfig {
        sweep_var: SweepVar::SigmaS2,
        values: vec![0.2, 0.4, 0.6, 0.8],
        trials: 200,
        algorithms: vec![Algorithm::Consensual, Algorithm::HarmfulDli, Algorithm::CanceledDli],
        base: SystemParams { rx_antennas: 4, num_tags: 5, rho: 3.0, ..Default::default() },
        out_path: None,
    };
    let recs = run_sweep(&cfg, None).unwrap().records;
    let mean = |v: f64, alg: Algorithm| {
        let xs: Vec<f64> = recs.iter().filter(|r| r.value == v && r.algorithm == alg).filter_map(|r| r.snr_db).collect();
        (xs.iter().sum::<f64>() / xs.len().max(1) as f64, xs.len())
    };
    let mut ok = true;
    let mut judged = 0;
    let mut parts = Vec::new();
    for &v in &cfg.values {
        let (c, n) = mean(v, Algorithm::Consensual);
        let (h, _) = mean(v, Algorithm::HarmfulDli);
        let (k, _) = mean(v, Algorithm::CanceledDli);
        if 2 * n >= cfg.trials {
            judged += 1;
            ok &= c >= h && c >= k;
        }
        parts.push(format!("{v}: gap {:+.2} dB over canceled, {:+.2} dB over harmful ({n}/200 feasible)", c - k, c - h));
    }
    (ok && judged > 0, format!("{judged} values judged; {}", parts.join("; ")))
}

fn region_monotonicity() -> Verdict {
    let cfg = RunConfig::default();
    let rows = ci_region_report(&cfg).unwrap();
    // The empty marker (no constructive angle) ranks below every angle.
    let theta = |r: &RegionRow| r.theta_max_at_min_snr.unwrap_or(-1.0);
    let show = |r: &RegionRow| r.theta_max_at_min_snr.map_or("empty".to_string(), |t| format!("{t:.4}"));
    let lo_ok = rows.windows(2).all(|w| w[1].gamma_lo <= w[0].gamma_lo);
    let theta_ok = rows.windows(2).all(|w| theta(&w[0]) <= theta(&w[1]));
    let hi_ok = rows.iter().all(|r| r.gamma_hi.to_bits() == rows[0].gamma_hi.to_bits());
    (
        rows.len() == 10 && lo_ok && theta_ok && hi_ok,
        format!(
            "zeta_max 0.1 -> 1.0: gamma_lo {:.4} -> {:.4}, theta_max {} -> {}, gamma_hi fixed at {:.4}",
            rows[0].gamma_lo,
            rows[9].gamma_lo,
            show(&rows[0]),
            show(&rows[9]),
            rows[0].gamma_hi
        ),
    )
}

fn determinism() -> Verdict {
    let cfg = SweepConfig {
        sweep_var: SweepVar::SigmaS2,
        values: vec![0.2, 0.6],
        trials: 6,
        algorithms: Algorithm::ALL.to_vec(),
        base: SystemParams::default(),
        out_path: None,
    };
    let csv = |workers| {
        let mut out = Vec::new();
        write_csv(&run_sweep(&cfg, Some(workers)).unwrap().records, &mut out).unwrap();
        out
    };
    let first = csv(1);
    let same = [1, 2, 4].into_iter().all(|w| csv(w) == first);
    (same, format!("{} bytes, compared at 1, 2 and 4 workers", first.len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("threshold anchor", threshold_anchor),
        ("bound validity", bound_validity),
        ("ratio-floor equivalence", ratio_equivalence),
        ("evolved inequality equivalence", evolved_inequality_equivalence),
        ("SCA contract", sca_contract),
        ("evolved SDP contract", evolved_contract),
        ("small-instance oracles", small_instance_oracles),
        ("angle anchor", angle_anchor),
        ("trend reproduction", trend_reproduction),
        ("monotone region reports", region_monotonicity),
        ("determinism", determinism),
    ];
    // Straight to stdout so the report shows up even when output is captured.
    let mut out = std::io::stdout();
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = run();
        writeln!(
            out,
            "criterion {:>2} {}: {name}: {detail} [{:.1} s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        )
        .unwrap();
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
