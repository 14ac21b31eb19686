//! `qsim`: command-line front end for the two-qutrit photonic chip simulator.
//!
//! Every subcommand reads an optional JSON run configuration, writes CSV data
//! files plus a JSON report into the output directory, and prints a one-line
//! summary. Runs are deterministic given (config, seed): repeating a command
//! with the same inputs produces byte-identical files.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 for
//! numerical failures.

#![allow(clippy::needless_range_loop)]

mod cmd;
mod config;
mod gnuplot;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};

use qsim_core::experiment::FringeKind;
use qsim_core::ring::RingParams;
use qsim_core::tomography::Estimator;

use config::RunConfig;

/// Prints a summary line, ignoring a closed stdout so that piping into
/// `head` cannot crash a run.
macro_rules! sayln {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}
pub(crate) use sayln;

/// A failed run, split by exit code.
#[derive(Debug)]
pub enum Failure {
    /// The command line or configuration is wrong: exit 2.
    Usage(anyhow::Error),
    /// The computation itself failed: exit 3.
    Fatal(anyhow::Error),
}

pub type CmdResult<T = ()> = Result<T, Failure>;

pub fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

/// Core errors raised while validating user input map to exit 2; anything
/// that goes wrong past validation is a numerical failure.
impl From<qsim_core::Error> for Failure {
    fn from(e: qsim_core::Error) -> Self {
        match e {
            qsim_core::Error::Domain(_) | qsim_core::Error::Graph(_) => Failure::Usage(e.into()),
            _ => Failure::Fatal(e.into()),
        }
    }
}

/// Marks a fallible step as a numerical failure regardless of error kind,
/// used once inputs are validated and outputs are being produced.
pub fn fatal<T>(r: qsim_core::Result<T>) -> CmdResult<T> {
    r.map_err(|e| Failure::Fatal(e.into()))
}

#[derive(Parser)]
#[command(
    name = "qsim",
    version,
    about = "Simulates a silicon-photonic two-qutrit entanglement chip",
    propagate_version = true
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Run configuration JSON (schema 1); without it the calibrated chip
    /// defaults apply
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// RNG seed; wins over QSIM_SEED and the config "seed" field
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory, created when missing [default: .]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Cap the worker-thread count
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Write a gnuplot script next to each curve or grid CSV
    #[arg(long, global = true)]
    gnuplot_stub: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep one ring source and report resonances, FSR, linewidth, coupling
    Spectrum {
        /// Source index, 1 to 3
        #[arg(long, default_value_t = 1, value_name = "N")]
        source: usize,
        /// Sweep start, nm
        #[arg(long, default_value_t = 1536.0, value_name = "NM")]
        start_nm: f64,
        /// Sweep stop, nm
        #[arg(long, default_value_t = 1568.0, value_name = "NM")]
        stop_nm: f64,
        /// Number of wavelength samples
        #[arg(long, default_value_t = 8001, value_name = "N")]
        points: usize,
    },
    /// Scan an interference fringe and fit its visibility
    Fringes {
        /// Which fringe to scan
        #[arg(long, value_enum, default_value_t = FringeArg::Rhom)]
        kind: FringeArg,
        /// Pumped source pair as 1-based indices, e.g. 1,2
        #[arg(long, default_value = "1,2", value_name = "A,B")]
        pair: String,
        /// Number of phase samples over the scan
        #[arg(long, default_value_t = 161, value_name = "N")]
        points: usize,
    },
    /// Simulate the 81-setting schedule and reconstruct the state
    Tomography {
        /// Reconstruction method
        #[arg(long, value_enum, default_value_t = EstimatorArg::Mle)]
        estimator: EstimatorArg,
    },
    /// Nonlocality, contextuality, and key-rate tests on the configured state
    Inequalities {
        /// Which test to run
        #[arg(value_enum, value_name = "TEST")]
        which: TestArg,
    },
    /// Pump-phase metrology: response grid and sensitivity along the cut
    Metrology {
        /// Grid points per pump-phase axis
        #[arg(long, default_value_t = 61, value_name = "N")]
        grid_points: usize,
        /// Samples along the sensitivity cut
        #[arg(long, default_value_t = 1201, value_name = "N")]
        cut_points: usize,
    },
    /// Count perfect matchings of a source graph and list its ket terms
    Graph {
        /// Graph description JSON
        #[arg(value_name = "FILE")]
        file: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FringeArg {
    /// Pump-phase scan, period pi
    Rhom,
    /// Idler analysis-phase scan, period 2*pi
    Qubit,
}

impl From<FringeArg> for FringeKind {
    fn from(k: FringeArg) -> Self {
        match k {
            FringeArg::Rhom => FringeKind::Rhom,
            FringeArg::Qubit => FringeKind::Qubit,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    /// Direct linear inversion; unbiased only at high counts
    Linear,
    /// Maximum-likelihood refinement of the linear estimate
    Mle,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Linear => Estimator::Linear,
            EstimatorArg::Mle => Estimator::Mle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    /// Three-outcome Bell test
    Cglmp,
    /// State-dependent contextuality test
    Ks,
    /// Entanglement-based key-distribution error rate
    Qkd,
}

/// Everything a subcommand needs besides its own arguments.
pub struct Ctx {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub gnuplot: bool,
}

impl Ctx {
    /// Seed for a stochastic command, from flag, environment, or config.
    pub fn require_seed(&self) -> CmdResult<u64> {
        self.seed.ok_or_else(|| {
            usage(anyhow!(
                "this command is stochastic; pass --seed, set QSIM_SEED, or put \"seed\" in the config"
            ))
        })
    }

    /// Ring parameters of the 1-based source index.
    pub fn source(&self, n: usize) -> CmdResult<&RingParams> {
        self.config.sources.get(n.wrapping_sub(1)).ok_or_else(|| {
            usage(anyhow!(
                "source index {n} outside 1..={}",
                self.config.sources.len()
            ))
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn resolve_seed(flag: Option<u64>, cfg: &RunConfig) -> CmdResult<Option<u64>> {
    if flag.is_some() {
        return Ok(flag);
    }
    if let Ok(v) = std::env::var("QSIM_SEED") {
        let s = v
            .trim()
            .parse::<u64>()
            .map_err(|_| usage(anyhow!("QSIM_SEED must be an unsigned integer, got {v:?}")))?;
        return Ok(Some(s));
    }
    Ok(cfg.seed)
}

fn run(cli: Cli) -> CmdResult<()> {
    let cfg = config::load(cli.global.config.as_deref())?;
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(usage(anyhow!("--threads must be at least 1")));
        }
        qsim_core::exec::set_thread_cap(n);
    }
    let seed = resolve_seed(cli.global.seed, &cfg)?;
    let out_dir = cli
        .global
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir).map_err(|e| {
        usage(
            anyhow::Error::new(e)
                .context(format!("creating output directory {}", out_dir.display())),
        )
    })?;
    let ctx = Ctx {
        config: cfg,
        out_dir,
        seed,
        gnuplot: cli.global.gnuplot_stub,
    };

    match cli.command {
        Command::Spectrum {
            source,
            start_nm,
            stop_nm,
            points,
        } => cmd::spectrum::run(&ctx, source, start_nm, stop_nm, points),
        Command::Fringes { kind, pair, points } => {
            cmd::fringes::run(&ctx, kind.into(), &pair, points)
        }
        Command::Tomography { estimator } => cmd::tomography::run(&ctx, estimator.into()),
        Command::Inequalities { which } => match which {
            TestArg::Cglmp => cmd::inequalities::run_cglmp(&ctx),
            TestArg::Ks => cmd::inequalities::run_ks(&ctx),
            TestArg::Qkd => cmd::inequalities::run_qkd(&ctx),
        },
        Command::Metrology {
            grid_points,
            cut_points,
        } => cmd::metrology::run(&ctx, grid_points, cut_points),
        Command::Graph { file } => cmd::graph::run(&ctx, &file),
    }
}

/// Relative display of an output path for the summary line.
pub fn shown(path: &Path) -> String {
    path.display().to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            let _ = writeln!(std::io::stderr(), "error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Fatal(e)) => {
            let _ = writeln!(std::io::stderr(), "error: {e:#}");
            ExitCode::from(3)
        }
    }
}
