//! `hbl`: command-line front end for the experiments.
//!
//! Exit codes: 0 success, 1 regime violation or failed self-test, 2 usage error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heston_barrier::config::{Command, Overrides, RunConfig, SchemeChoice, Tier};
use heston_barrier::experiments::run_with_threads;
use heston_barrier::model::Preset;
use heston_barrier::LabError;

#[derive(Parser)]
#[command(name = "hbl", version, about = "Strong-error and order-barrier experiments for the log-Heston SDE")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Euler strong L1 errors over a range of N, with rate fits.
    Rates(Common),
    /// Euler err_x against the lower bound c N^{-1/2}.
    Barrier(Common),
    /// Law of the bridge iterated integral against W_1 sqrt(Q).
    BridgeCheck(Common),
    /// Clark-Cameron RMS errors against N^{-1/2} / 2.
    Cc(Common),
    /// Reconstruction gaps of the X_T decomposition.
    Decompose(Common),
    /// Law of V_T: exact sampler, closed form and fine reference.
    Moments(Common),
    /// Runs the acceptance checks and prints a pass/fail table.
    Selftest(Selftest),
}

#[derive(Args)]
struct Selftest {
    /// M = 10^4 with tolerances widened accordingly (default).
    #[arg(long, conflicts_with = "full")]
    quick: bool,
    /// Stated sample sizes and tolerances.
    #[arg(long)]
    full: bool,
    #[arg(long, env = "HBL_THREADS")]
    threads: Option<usize>,
    /// Also write the results as CSV.
    #[arg(long, env = "HBL_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    /// Parameter preset: high, unit or low.
    #[arg(long, env = "HBL_PRESET", conflicts_with = "config")]
    preset: Option<Preset>,
    /// key = value parameter file (keys mu, kappa, theta, sigma, rho, x0, v0, T).
    #[arg(long, env = "HBL_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "HBL_MU", allow_negative_numbers = true)]
    mu: Option<f64>,
    #[arg(long, env = "HBL_KAPPA", allow_negative_numbers = true)]
    kappa: Option<f64>,
    #[arg(long, env = "HBL_THETA", allow_negative_numbers = true)]
    theta: Option<f64>,
    #[arg(long, env = "HBL_SIGMA", allow_negative_numbers = true)]
    sigma: Option<f64>,
    #[arg(long, env = "HBL_RHO", allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long, env = "HBL_X0", allow_negative_numbers = true)]
    x0: Option<f64>,
    #[arg(long, env = "HBL_V0", allow_negative_numbers = true)]
    v0: Option<f64>,
    /// Horizon T.
    #[arg(long = "T", env = "HBL_T", allow_negative_numbers = true)]
    horizon: Option<f64>,
    /// Comma-separated coarse step counts.
    #[arg(long, env = "HBL_STEPS", value_delimiter = ',', value_parser = positive_step)]
    steps: Option<Vec<usize>>,
    #[arg(long, env = "HBL_STEPS_FINE")]
    steps_fine: Option<usize>,
    #[arg(long, env = "HBL_PATHS")]
    paths: Option<usize>,
    /// Dyadic refinement level n of the bridge check.
    #[arg(long, env = "HBL_REFINE")]
    refine: Option<u32>,
    #[arg(long, env = "HBL_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "HBL_THREADS")]
    threads: Option<usize>,
    /// Output CSV (stdout when absent).
    #[arg(long, env = "HBL_OUT")]
    out: Option<PathBuf>,
    /// Coarse scheme: euler or reference.
    #[arg(long, env = "HBL_SCHEME")]
    scheme: Option<SchemeChoice>,
    /// Write coarse trajectories of the first paths to this CSV (rates only).
    #[arg(long, env = "HBL_DUMP_PATHS")]
    dump_paths: Option<PathBuf>,
}

fn positive_step(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("`{s}` is not a positive step count")),
    }
}

impl Common {
    fn overrides(self) -> Overrides {
        Overrides {
            preset: self.preset,
            config: self.config,
            mu: self.mu,
            kappa: self.kappa,
            theta: self.theta,
            sigma: self.sigma,
            rho: self.rho,
            x0: self.x0,
            v0: self.v0,
            horizon: self.horizon,
            steps: self.steps,
            steps_fine: self.steps_fine,
            paths: self.paths,
            refine: self.refine,
            seed: self.seed,
            threads: self.threads,
            scheme: self.scheme,
            tier: None,
            out: self.out,
            dump_paths: self.dump_paths,
        }
    }
}

fn resolve(sub: Sub) -> Result<RunConfig, LabError> {
    let (command, overrides) = match sub {
        Sub::Rates(c) => (Command::Rates, c.overrides()),
        Sub::Barrier(c) => (Command::Barrier, c.overrides()),
        Sub::BridgeCheck(c) => (Command::BridgeCheck, c.overrides()),
        Sub::Cc(c) => (Command::Cc, c.overrides()),
        Sub::Decompose(c) => (Command::Decompose, c.overrides()),
        Sub::Moments(c) => (Command::Moments, c.overrides()),
        Sub::Selftest(s) => (
            Command::Selftest,
            Overrides {
                tier: Some(if s.full { Tier::Full } else { Tier::Quick }),
                threads: s.threads,
                out: s.out,
                ..Overrides::default()
            },
        ),
    };
    RunConfig::resolve(command, &overrides)
}

fn execute(cfg: &RunConfig) -> Result<bool, LabError> {
    let out = run_with_threads(cfg)?;
    if let (Some(path), Some(dump)) = (&cfg.dump_paths, &out.dump) {
        std::fs::write(path, dump)?;
    }
    if cfg.command == Command::Selftest {
        print!("{}", out.summary);
        println!("{}", if out.ok { "all checks passed" } else { "SOME CHECKS FAILED" });
        if let Some(path) = &cfg.out {
            std::fs::write(path, &out.csv)?;
        }
        return Ok(out.ok);
    }
    match &cfg.out {
        Some(path) => std::fs::write(path, &out.csv)?,
        None => std::io::stdout().write_all(&out.csv)?,
    }
    eprint!("{}", out.summary);
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(cli.command).and_then(|cfg| execute(&cfg));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("hbl: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
