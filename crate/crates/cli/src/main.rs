use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use backcom_ci::beamforming::Mode;
use backcom_ci::channel::{gen_channel_set, parse_channel_text, write_channel_text, ChannelRealization};
use backcom_ci::harness::{ci_region_report, run_sweep, selftest, write_csv, write_region_csv, RunConfig};
use backcom_ci::params::SystemParams;
use backcom_ci::selection::greedy_select;
use backcom_ci::Error;
use clap::{Parser, Subcommand, ValueEnum};

const EXIT_CONFIG: u8 = 1;
const EXIT_ALL_INFEASIBLE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_SELFTEST_FAILED: u8 = 4;

#[derive(Parser)]
#[command(version, about = "Constructive-interference beamforming and tag selection for backscatter links")]
struct Cli {
    /// Key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for channel draws and random selection.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path (CSV for sweep and ci-region); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo trials per sweep value.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads (all cores by default).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one channel realization and print a report.
    Solve {
        /// Trial index of the drawn realization.
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Read the realization from a channel text file instead of drawing it.
        #[arg(long)]
        channels: Option<PathBuf>,
        /// Write the realization used to a channel text file.
        #[arg(long)]
        save_channels: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::Both)]
        mode: ModeArg,
    },
    /// Monte Carlo sweep over one parameter, written as CSV.
    Sweep,
    /// Scalar-reader CI region table, written as CSV.
    CiRegion,
    /// Run the built-in oracle checks.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Consensual,
    Evolved,
    Both,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self { code: EXIT_CONFIG, message: e.to_string() }
    }
}

fn io_failure(e: io::Error) -> Failure {
    Failure { code: EXIT_CONFIG, message: e.to_string() }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.base.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    if let Some(out) = &cli.out {
        cfg.out_path = Some(out.clone());
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Failure {
            code: EXIT_CONFIG,
            message: format!("cannot create {}: {e}", p.display()),
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.6}"))
}

fn solve(
    cfg: &RunConfig,
    trial: u64,
    channels: Option<&Path>,
    save: Option<&Path>,
    mode: ModeArg,
    out: &mut dyn Write,
) -> Result<u8, Failure> {
    let ch: ChannelRealization = match channels {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(io_failure)?;
            parse_channel_text(&text)?
        }
        None => gen_channel_set(&cfg.base, trial)?,
    };
    if let Some(path) = save {
        std::fs::write(path, write_channel_text(&ch)).map_err(io_failure)?;
    }
    let p = SystemParams {
        rx_antennas: ch.rx_antennas(),
        tx_antennas: ch.tx_antennas(),
        num_tags: ch.num_tags().max(1),
        alpha: ch.alpha,
        ..cfg.base.clone()
    };
    let modes: &[Mode] = match mode {
        ModeArg::Consensual => &[Mode::Consensual],
        ModeArg::Evolved => &[Mode::Evolved],
        ModeArg::Both => &[Mode::Consensual, Mode::Evolved],
    };
    let (mut any_feasible, mut gave_up) = (false, false);
    let w = |e: io::Error| io_failure(e);
    writeln!(out, "M = {}, Q = {}, K = {}, gamma = {:.6}", p.rx_antennas, p.tx_antennas, ch.num_tags(), p.gamma()).map_err(w)?;
    for &m in modes {
        let r = greedy_select(&ch, &p, m)?;
        writeln!(out, "\n[{m:?}]").map_err(w)?;
        for (k, sol) in r.per_tag.iter().enumerate() {
            let Some(sol) = sol else { continue };
            let s = sol.stats.as_ref();
            writeln!(
                out,
                "  tag {:>2}: feasible={:<5} snr_db={:>10} kld_with={:>10} kld_without={:>10} iterations={} rank_residual={}",
                k + 1,
                sol.feasible,
                if sol.feasible { format!("{:.4}", 10.0 * sol.snr.log10()) } else { "-".into() },
                fmt_opt(s.map(|s| s.kld_with)),
                fmt_opt(s.map(|s| s.kld_without)),
                sol.iterations,
                sol.rank_residual.map_or_else(|| "-".into(), |r| format!("{r:.2e}")),
            )
            .map_err(w)?;
        }
        match (&r.selected_tag, &r.best) {
            (Some(t), Some(b)) => {
                any_feasible = true;
                let s = b.stats.as_ref().expect("feasible solutions carry statistics");
                writeln!(
                    out,
                    "  selected tag {t}: snr = {:.6} ({:.4} dB), DEP bounds {:.6} / {:.6}",
                    b.snr,
                    10.0 * b.snr.log10(),
                    s.dep_bound_with,
                    s.dep_bound_without
                )
                .map_err(w)?;
            }
            _ => {
                gave_up |= r.solver_gave_up();
                writeln!(out, "  no feasible tag").map_err(w)?;
            }
        }
    }
    out.flush().map_err(w)?;
    Ok(if gave_up {
        EXIT_NOT_CONVERGED
    } else if any_feasible {
        0
    } else {
        EXIT_ALL_INFEASIBLE
    })
}

fn sweep(cfg: &RunConfig) -> Result<u8, Failure> {
    let sc = cfg.sweep_config()?;
    let outcome = run_sweep(&sc, cfg.workers)?;
    write_csv(&outcome.records, output(sc.out_path.as_deref())?)?;
    for &v in &sc.values {
        for &alg in &sc.algorithms {
            let rows: Vec<_> = outcome.records.iter().filter(|r| r.value == v && r.algorithm == alg).collect();
            let snr: Vec<f64> = rows.iter().filter_map(|r| r.snr_db).collect();
            let mean = if snr.is_empty() { f64::NAN } else { snr.iter().sum::<f64>() / snr.len() as f64 };
            eprintln!(
                "{}={v} {:<13} feasible {:>4}/{:<4} mean snr_db {mean:.3}",
                sc.sweep_var,
                alg.name(),
                snr.len(),
                rows.len()
            );
        }
    }
    if outcome.uncertified > 0 {
        eprintln!("{} records had no converged solve", outcome.uncertified);
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(if outcome.all_infeasible() { EXIT_ALL_INFEASIBLE } else { 0 })
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Solve { trial, channels, save_channels, mode } => {
            let mut out = output(cfg.out_path.as_deref())?;
            solve(&cfg, trial, channels.as_deref(), save_channels.as_deref(), mode, &mut out)
        }
        Command::Sweep => sweep(&cfg),
        Command::CiRegion => {
            write_region_csv(&ci_region_report(&cfg)?, output(cfg.out_path.as_deref())?)?;
            Ok(0)
        }
        Command::Selftest => {
            let checks = selftest();
            let mut out = output(cfg.out_path.as_deref())?;
            for c in &checks {
                writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail).map_err(io_failure)?;
            }
            out.flush().map_err(io_failure)?;
            Ok(if checks.iter().all(|c| c.passed) { 0 } else { EXIT_SELFTEST_FAILED })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
