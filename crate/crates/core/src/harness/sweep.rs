use std::io::Write;

use rayon::prelude::*;

use super::{run_benchmark, Algorithm, Benchmark, SweepConfig};
use crate::beamforming::Mode;
use crate::channel::{gen_channel_set, keyed_rng, Stream};
use crate::error::{Error, Result};
use crate::selection::{greedy_select, random_select, SelectionResult};

pub const CSV_HEADER: [&str; 12] = [
    "sweep_var",
    "value",
    "trial",
    "algorithm",
    "selected_tag",
    "snr_db",
    "kld_with",
    "kld_without",
    "dep_bound_with",
    "dep_bound_without",
    "feasible",
    "iterations",
];

/// One CSV row. Statistics are empty when no tag was feasible.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub sweep_var: String,
    pub value: f64,
    pub trial: u64,
    pub algorithm: Algorithm,
    pub selected_tag: Option<usize>,
    pub snr_db: Option<f64>,
    pub kld_with: Option<f64>,
    pub kld_without: Option<f64>,
    pub dep_bound_with: Option<f64>,
    pub dep_bound_without: Option<f64>,
    pub feasible: bool,
    pub iterations: usize,
}

impl SweepRecord {
    fn from_selection(var: &str, value: f64, trial: u64, algorithm: Algorithm, sel: &SelectionResult) -> Self {
        let best = sel.best.as_ref();
        let stats = best.and_then(|b| b.stats.as_ref());
        Self {
            sweep_var: var.to_string(),
            value,
            trial,
            algorithm,
            selected_tag: sel.selected_tag,
            snr_db: best.map(|b| 10.0 * b.snr.log10()),
            kld_with: stats.map(|s| s.kld_with),
            kld_without: stats.map(|s| s.kld_without),
            dep_bound_with: stats.map(|s| s.dep_bound_with),
            dep_bound_without: stats.map(|s| s.dep_bound_without),
            feasible: best.is_some(),
            iterations: best.map_or(0, |b| b.iterations),
        }
    }

    pub fn row(&self) -> [String; 12] {
        fn opt<T: ToString>(x: Option<T>) -> String {
            x.map(|v| v.to_string()).unwrap_or_default()
        }
        [
            self.sweep_var.clone(),
            self.value.to_string(),
            self.trial.to_string(),
            self.algorithm.to_string(),
            opt(self.selected_tag),
            opt(self.snr_db),
            opt(self.kld_with),
            opt(self.kld_without),
            opt(self.dep_bound_with),
            opt(self.dep_bound_without),
            self.feasible.to_string(),
            self.iterations.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// Sorted by value, trial, then algorithm.
    pub records: Vec<SweepRecord>,
    /// Records whose every tag failed without a certificate of infeasibility.
    pub uncertified: usize,
}

impl SweepOutcome {
    pub fn all_infeasible(&self) -> bool {
        self.records.iter().all(|r| !r.feasible)
    }
}

/// Every requested algorithm on trial `trial` at sweep value `value`.
pub fn run_trial(cfg: &SweepConfig, value: f64, trial: u64) -> Result<Vec<(SweepRecord, bool)>> {
    let p = cfg.sweep_var.apply(&cfg.base, value)?;
    let ch = gen_channel_set(&p, trial)?;
    cfg.algorithms
        .iter()
        .map(|&alg| {
            let sel = match alg {
                Algorithm::Consensual => greedy_select(&ch, &p, Mode::Consensual)?,
                Algorithm::Evolved => greedy_select(&ch, &p, Mode::Evolved)?,
                Algorithm::HarmfulDli => run_benchmark(&ch, &p, Benchmark::HarmfulDli)?,
                Algorithm::CanceledDli => run_benchmark(&ch, &p, Benchmark::CanceledDli)?,
                Algorithm::RandomSel => {
                    let mut rng = keyed_rng(p.seed, trial, 0, Stream::Selection);
                    random_select(&ch, &p, Mode::Consensual, &mut rng)?
                }
            };
            let rec = SweepRecord::from_selection(cfg.sweep_var.name(), value, trial, alg, &sel);
            Ok((rec, sel.solver_gave_up()))
        })
        .collect()
}

/// Runs the sweep on `workers` threads (all cores when `None`).
///
/// Each (value, trial) pair draws its channels from keyed streams and the
/// records are sorted before returning, so the output does not depend on the
/// worker count or scheduling.
pub fn run_sweep(cfg: &SweepConfig, workers: Option<usize>) -> Result<SweepOutcome> {
    cfg.validate()?;
    let jobs: Vec<(f64, u64)> = cfg
        .values
        .iter()
        .flat_map(|&v| (0..cfg.trials as u64).map(move |t| (v, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))?;
    let results = pool.install(|| {
        jobs.par_iter()
            .map(|&(v, t)| run_trial(cfg, v, t))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut uncertified = 0;
    let mut records = Vec::with_capacity(jobs.len() * cfg.algorithms.len());
    for (rec, gave_up) in results.into_iter().flatten() {
        uncertified += gave_up as usize;
        records.push(rec);
    }
    records.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.trial.cmp(&b.trial))
            .then(a.algorithm.cmp(&b.algorithm))
    });
    Ok(SweepOutcome { records, uncertified })
}

/// Writes the header and every record as CSV.
pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Io(format!("writing CSV: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record(r.row()).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(format!("writing CSV: {e}")))?;
    Ok(())
}
