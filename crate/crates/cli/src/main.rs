//! `lamb` — scenario runner for the nonlinear Lamb system toolkit.

mod config;
mod io;
mod runner;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lamb_core::incoming::CounterexampleKind;

use crate::config::Config;
use crate::runner::{EXIT_CONFIG, EXIT_SOLVER};

#[derive(Parser)]
#[command(name = "lamb", version, about = "Nonlinear Lamb system scattering scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Scenario configuration files (JSON).
    #[arg(required = true)]
    configs: Vec<PathBuf>,
    /// Override the grid step of every configuration.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Override the time window of every configuration.
    #[arg(long)]
    t_max: Option<f64>,
    /// Override the Picard tolerance of every configuration.
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory (per-config subdirectories when several configs run).
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Run this many scenarios concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Forward evolution of reconstructed data plus scattering extraction.
    Forward(CommonArgs),
    /// Incoming-trajectory construction and initial-data reconstruction.
    Construct(CommonArgs),
    /// Construct, reconstruct, evolve forward, extract, and compare.
    Roundtrip(CommonArgs),
    /// Nonhyperbolic counterexample runs.
    Counterexample {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Initial value (flat/quadratic runs must start inside the core).
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        y0: f64,
        #[arg(long, default_value_t = 1e-3)]
        grid_step: f64,
        #[arg(long, default_value_t = 40.0)]
        t_max: f64,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Flat,
    Quadratic,
    HyperbolicControl,
}

impl From<Kind> for CounterexampleKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Flat => CounterexampleKind::Flat,
            Kind::Quadratic => CounterexampleKind::Quadratic,
            Kind::HyperbolicControl => CounterexampleKind::HyperbolicControl,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Forward(args) => run_batch(&args, runner::run_forward),
        Command::Construct(args) => run_batch(&args, runner::run_construct),
        Command::Roundtrip(args) => run_batch(&args, runner::run_roundtrip),
        Command::Counterexample { kind, y0, grid_step, t_max, out_dir } => {
            if matches!(kind, Kind::Flat | Kind::Quadratic) && y0.abs() >= 0.5 {
                eprintln!("error: |y0| must be below 1/2 for core counterexamples");
                return ExitCode::from(EXIT_CONFIG as u8);
            }
            if std::fs::create_dir_all(&out_dir).is_err() {
                eprintln!("error: cannot create {}", out_dir.display());
                return ExitCode::from(EXIT_CONFIG as u8);
            }
            match runner::run_counterexample_cmd(kind.into(), y0, grid_step, t_max, &out_dir) {
                Ok(out) => out.exit,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    EXIT_SOLVER
                }
            }
        }
    };
    ExitCode::from(code as u8)
}

fn run_batch(
    args: &CommonArgs,
    run: fn(&Config, &Path) -> anyhow::Result<runner::Outcome>,
) -> i32 {
    // load everything first: configuration problems exit before any solver runs
    let mut jobs = Vec::new();
    for path in &args.configs {
        let mut cfg = match Config::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e:#}");
                return EXIT_CONFIG;
            }
        };
        if let Some(h) = args.grid_step {
            cfg.grid.h = h;
        }
        if let Some(t) = args.t_max {
            cfg.grid.t_max = t;
        }
        if let Some(tol) = args.tol {
            cfg.tolerances.picard_tol = tol;
        }
        if let Err(e) = cfg.validate() {
            eprintln!("error: {}: {e:#}", path.display());
            return EXIT_CONFIG;
        }
        let dir = if args.configs.len() == 1 {
            args.out_dir.clone()
        } else {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
            args.out_dir.join(stem.unwrap_or_else(|| "scenario".into()))
        };
        if let Err(e) = std::fs::create_dir_all(&dir) {
            eprintln!("error: cannot create {}: {e}", dir.display());
            return EXIT_CONFIG;
        }
        jobs.push((cfg, dir));
    }

    let workers = args.jobs.max(1);
    let mut exit = 0;
    if workers == 1 {
        for (cfg, dir) in &jobs {
            exit = exit.max(run_one(run, cfg, dir));
        }
    } else {
        let results = std::sync::Mutex::new(Vec::new());
        let queue = std::sync::Mutex::new(jobs.iter());
        std::thread::scope(|scope| {
            for _ in 0..workers.min(jobs.len()) {
                scope.spawn(|| loop {
                    let job = { queue.lock().unwrap().next() };
                    match job {
                        Some((cfg, dir)) => {
                            let code = run_one(run, cfg, dir);
                            results.lock().unwrap().push(code);
                        }
                        None => break,
                    }
                });
            }
        });
        exit = results.into_inner().unwrap().into_iter().max().unwrap_or(0);
    }
    exit
}

fn run_one(
    run: fn(&Config, &Path) -> anyhow::Result<runner::Outcome>,
    cfg: &Config,
    dir: &Path,
) -> i32 {
    match run(cfg, dir) {
        Ok(out) => out.exit,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_SOLVER
        }
    }
}
