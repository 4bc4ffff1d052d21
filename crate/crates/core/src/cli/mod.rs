//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 estimator or I/O failure,
//! 3 self-test failure.

pub mod config;
pub mod selftest;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::bounds::{Components, TrackerChoice};
use crate::error::{Error, Result};
use crate::harness::{self, ResultRow, Split};
use crate::model::{ChannelParams, Modulation};
use crate::oracle::{self, AwgnMethod, Fixtures, TrellisConfig};
use config::{FileConfig, ModelKind, OneOrMany};
use selftest::Fault;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_SELFTEST: i32 = 3;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "PNRATE_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "pnrate",
    version,
    about = "Information-rate bounds for channels with ARMA phase noise"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bounds at a single (modulation, SNR, gamma) point.
    Simulate(RunArgs),
    /// Bounds over a parameter grid, written as CSV.
    Sweep(RunArgs),
    /// Reference rates for memoryless and Wiener phase noise.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
    /// Fast consistency checks.
    Selftest {
        /// Deliberately break one check to confirm it can fail.
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<Fault>,
    },
}

/// Every flag has a config-file key of the same name (with underscores).
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// TOML config file; flags override its values.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Label written to the `model_id` column.
    #[arg(long)]
    pub model_id: Option<String>,
    /// qam4 or qam16; comma-separated for sweeps.
    #[arg(long, value_delimiter = ',')]
    pub modulation: Vec<Modulation>,
    /// SNR per symbol in dB; comma-separated for sweeps.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub snr_db: Vec<f64>,
    /// Innovation standard deviation in radians; comma-separated for sweeps.
    #[arg(long, value_delimiter = ',')]
    pub gamma: Vec<f64>,
    /// `kalman` or `particle:<count>`; comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub tracker: Vec<TrackerChoice>,
    /// Channel uses per trace (accepts `2e5`).
    #[arg(long, value_parser = parse_count)]
    pub n: Option<usize>,
    /// Leading samples excluded from every average.
    #[arg(long, value_parser = parse_count)]
    pub burn_in: Option<usize>,
    /// Batch length for batch-means standard errors.
    #[arg(long, value_parser = parse_count)]
    pub batch: Option<usize>,
    /// Particles in the blind filter for the output entropy.
    #[arg(long, value_parser = parse_count)]
    pub np_blind: Option<usize>,
    /// Gauss-Hermite nodes for the lower bound.
    #[arg(long)]
    pub quad_nodes: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent traces per grid point.
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Worker threads [default: $PNRATE_WORKERS, else all cores].
    #[arg(long)]
    pub workers: Option<usize>,
    /// CSV destination [default: stdout].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Fill the `wall_ms` column (makes the CSV non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Mutual information of the AWGN channel without phase noise.
    Awgn {
        #[arg(long)]
        modulation: Modulation,
        #[arg(long, allow_negative_numbers = true)]
        snr_db: f64,
        #[arg(long, default_value_t = 128)]
        nodes: usize,
        /// Also run a Monte Carlo estimate with this many samples.
        #[arg(long, value_parser = parse_count)]
        mc_samples: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Quantized-phase trellis rate for Wiener phase noise.
    Trellis {
        #[arg(long)]
        modulation: Modulation,
        #[arg(long, allow_negative_numbers = true)]
        snr_db: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1024)]
        bins: usize,
        #[arg(long, default_value = "1e5", value_parser = parse_count)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        burn_in: usize,
        #[arg(long, default_value_t = 1000)]
        batch: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Check the stored oracle fixtures against a fresh computation, or rewrite them.
    Fixtures {
        /// Recompute and overwrite instead of checking.
        #[arg(long)]
        write: bool,
        #[arg(long)]
        path: Option<PathBuf>,
    },
}

/// Accepts plain integers, `_` separators and exact scientific notation (`2e5`).
pub fn parse_count(s: &str) -> std::result::Result<usize, String> {
    let t = s.replace('_', "");
    if let Ok(v) = t.parse::<usize>() {
        return Ok(v);
    }
    match t.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 1e18 => Ok(v as usize),
        _ => Err(format!("`{s}` is not a non-negative integer")),
    }
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: format!("error: {e}"),
        }
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: format!("error: {e}"),
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose);
    match run(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{}", f.message);
            f.code
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

pub fn run(command: Command) -> std::result::Result<i32, Failure> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Sweep(args) => sweep(args),
        Command::Oracle { command } => run_oracle(command),
        Command::Selftest { inject_fault } => Ok(run_selftest(inject_fault)),
    }
}

impl RunArgs {
    fn overrides(&self) -> FileConfig {
        fn many<T: Clone>(v: &[T]) -> Option<OneOrMany<T>> {
            (!v.is_empty()).then(|| OneOrMany::Many(v.to_vec()))
        }
        FileConfig {
            model: self.model,
            model_id: self.model_id.clone(),
            zeros: None,
            poles: None,
            modulation: many(&self.modulation),
            snr_db: many(&self.snr_db),
            gamma: many(&self.gamma),
            tracker: many(&self.tracker),
            n: self.n,
            burn_in: self.burn_in,
            batch: self.batch,
            np_blind: self.np_blind,
            quad_nodes: self.quad_nodes,
            seed: self.seed,
            repeats: self.repeats,
            workers: self.workers,
            output: self.output.clone(),
            timing: self.timing.then_some(true),
        }
    }

    /// Config file merged with flag overrides.
    pub fn resolve(&self) -> Result<FileConfig> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Ok(file.merge(self.overrides()))
    }
}

fn workers(cfg: &FileConfig) -> std::result::Result<usize, Failure> {
    if let Some(w) = cfg.workers {
        return Ok(w.max(1));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|w| w.max(1))
            .map_err(|_| Failure::config(format!("{WORKERS_ENV}=`{v}` is not a worker count"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn open_output(cfg: &FileConfig) -> std::result::Result<Box<dyn Write>, Failure> {
    match &cfg.output {
        Some(p) => File::create(p)
            .map(|f| Box::new(io::BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| Failure::config(format!("cannot write {}: {e}", p.display()))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn simulate(args: RunArgs) -> std::result::Result<i32, Failure> {
    let cfg = args.resolve().map_err(Failure::config)?;
    let sweep = cfg.point_config().map_err(Failure::config)?;
    let workers = workers(&cfg)?;
    let out = open_output(&cfg)?;
    let rows = harness::run_sweep(&sweep, workers).map_err(Failure::config)?;
    for r in &rows {
        print_summary(r);
    }
    emit(&rows, out, cfg.timing.unwrap_or(false))
}

fn sweep(args: RunArgs) -> std::result::Result<i32, Failure> {
    let cfg = args.resolve().map_err(Failure::config)?;
    let sweep = cfg.sweep_config().map_err(Failure::config)?;
    let workers = workers(&cfg)?;
    let out = open_output(&cfg)?;
    log::info!(
        "{} grid points x {} trackers on {workers} workers",
        sweep.points().len(),
        sweep.trackers.len()
    );
    let rows = harness::run_sweep(&sweep, workers).map_err(Failure::config)?;
    for r in rows.iter().filter(|r| r.is_ok()) {
        if let Ok(rep) = harness::convergence_report(&[r], Split::Halves) {
            if rep.flagged() {
                log::warn!(
                    "{} {} snr={} gamma={} {}: halves disagree by more than 3 sigma",
                    r.model_id,
                    r.modulation,
                    r.snr_db,
                    r.gamma,
                    r.tracker
                );
            }
        }
    }
    emit(&rows, out, cfg.timing.unwrap_or(false))
}

fn emit(rows: &[ResultRow], out: Box<dyn Write>, timing: bool) -> std::result::Result<i32, Failure> {
    harness::write_csv(rows, out, timing).map_err(Failure::runtime)?;
    let failed: Vec<&ResultRow> = rows.iter().filter(|r| !r.is_ok()).collect();
    for r in &failed {
        eprintln!(
            "failed: {} {} snr={} gamma={} {}: {}",
            r.model_id,
            r.modulation,
            r.snr_db,
            r.gamma,
            r.tracker,
            r.error.as_deref().unwrap_or("")
        );
    }
    Ok(if failed.is_empty() { EXIT_OK } else { EXIT_RUNTIME })
}

fn print_summary(r: &ResultRow) {
    eprintln!(
        "{} {} snr_db={} gamma={} tracker={} n={} seed={}",
        r.model_id, r.modulation, r.snr_db, r.gamma, r.tracker, r.n, r.seed
    );
    if let Some(b) = &r.lb {
        eprint!("  LB = {:.4} ± {:.4} bits", b.value, b.stderr);
        if let Components::Lower { hx, hx_given_y } = b.components {
            eprint!("   H(X) = {hx:.4}, H(X|Y) ≤ {hx_given_y:.4}");
        }
        eprintln!();
    }
    if let Some(b) = &r.ub {
        eprint!("  UB = {:.4} ± {:.4} bits", b.value, b.stderr);
        if let Components::Upper {
            h_y,
            h_y_given_xs,
            d_term,
        } = b.components
        {
            eprint!("   h(Y) = {h_y:.4}, h(Y|X,S) = {h_y_given_xs:.4}, d = {d_term:.4}");
        }
        eprintln!();
    }
    if !r.is_ok() {
        eprintln!("  status: {}", r.status);
    }
}

fn run_oracle(command: OracleCommand) -> std::result::Result<i32, Failure> {
    match command {
        OracleCommand::Awgn {
            modulation,
            snr_db,
            nodes,
            mc_samples,
            seed,
        } => {
            let ch = ChannelParams::from_db(snr_db).map_err(Failure::config)?;
            if !(1..=crate::quadrature::MAX_NODES).contains(&nodes) {
                return Err(Failure::config(format!(
                    "--nodes must be in 1..={}",
                    crate::quadrature::MAX_NODES
                )));
            }
            let c = modulation.constellation();
            let mi = oracle::awgn_mi(&c, &ch, AwgnMethod::Quadrature { nodes })
                .map_err(Failure::runtime)?;
            println!("{modulation} snr_db={snr_db} quadrature({nodes}) = {mi:.10} bits");
            if let Some(n) = mc_samples {
                let mc = oracle::awgn_mi_monte_carlo(&c, &ch, n, seed).map_err(Failure::config)?;
                println!(
                    "{modulation} snr_db={snr_db} monte_carlo({n}) = {:.6} ± {:.6} bits",
                    mc.mean, mc.stderr
                );
                if (mc.mean - mi).abs() > oracle::AGREEMENT_TOL {
                    return Err(Failure::runtime(Error::OracleDisagreement {
                        quadrature: mi,
                        monte_carlo: mc.mean,
                    }));
                }
            }
            Ok(EXIT_OK)
        }
        OracleCommand::Trellis {
            modulation,
            snr_db,
            gamma,
            bins,
            n,
            burn_in,
            batch,
            seed,
        } => {
            let ch = ChannelParams::from_db(snr_db).map_err(Failure::config)?;
            let cfg = TrellisConfig {
                bins,
                n,
                burn_in,
                batch,
                seed,
            };
            let s = oracle::trellis_rate(gamma, &modulation.constellation(), &ch, &cfg).map_err(
                |e| match e {
                    Error::InvalidParameter { .. } | Error::InsufficientSamples { .. } => {
                        Failure::config(e)
                    }
                    e => Failure::runtime(e),
                },
            )?;
            println!(
                "{modulation} snr_db={snr_db} gamma={gamma} bins={bins} n={n} seed={seed}: {:.6} ± {:.6} bits",
                s.mean, s.stderr
            );
            Ok(EXIT_OK)
        }
        OracleCommand::Fixtures { write, path } => {
            let path = path.unwrap_or_else(Fixtures::default_path);
            if write {
                let f = Fixtures::reference_set().compute().map_err(Failure::runtime)?;
                f.save(&path).map_err(Failure::runtime)?;
                eprintln!("wrote {}", path.display());
                return Ok(EXIT_OK);
            }
            let stored = Fixtures::load(&path).map_err(Failure::config)?;
            let mut bad = 0;
            for a in &stored.awgn {
                let fresh = a.recompute().map_err(Failure::runtime)?;
                let ok = close(a.mi, fresh.mi) && close(a.mc_mi, fresh.mc_mi);
                bad += usize::from(!ok);
                println!(
                    "awgn {} snr={}: stored {:.10}, fresh {:.10} {}",
                    a.modulation,
                    a.snr,
                    a.mi,
                    fresh.mi,
                    if ok { "ok" } else { "MISMATCH" }
                );
            }
            for t in &stored.trellis {
                let fresh = t.recompute().map_err(Failure::runtime)?;
                let ok = close(t.rate, fresh.rate);
                bad += usize::from(!ok);
                println!(
                    "trellis {} gamma={} snr_db={}: stored {:.6}, fresh {:.6} {}",
                    t.modulation,
                    t.gamma,
                    t.snr_db,
                    t.rate,
                    fresh.rate,
                    if ok { "ok" } else { "MISMATCH" }
                );
            }
            Ok(if bad == 0 { EXIT_OK } else { EXIT_RUNTIME })
        }
    }
}

/// Fixture values are deterministic; the slack only absorbs libm differences
/// across platforms.
fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(1.0)
}

fn run_selftest(fault: Option<Fault>) -> i32 {
    let outcomes = selftest::run(fault);
    let mut failed = 0;
    for o in &outcomes {
        println!(
            "{} {:<22} {:>6.2}s  {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.seconds,
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    if failed == 0 {
        EXIT_OK
    } else {
        eprintln!("{failed} of {} checks failed", outcomes.len());
        EXIT_SELFTEST
    }
}
