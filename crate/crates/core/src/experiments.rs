//! One function per subcommand. Each returns a CSV document whose leading
//! `#` lines carry the crate version, the seed and the JSON config.

use std::fmt::Write as _;

use serde::Serialize;

use crate::acceptance;
use crate::bridge_lab::{distribution_identity_test, scaled_mean_ceiling, BridgeCheck, SCALED_MEAN_FLOOR};
use crate::config::{Command, RunConfig};
use crate::error::{LabError, Result};
use crate::error_lab::{barrier_constant, barrier_rows, error_sweep, fit_rate, Component, SweepSpec};
use crate::grid_paths::{sample_path, TimeGrid};
use crate::model::HestonParams;
use crate::optimal_estimators::{clark_cameron_table, decomposition_study};
use crate::schemes::{cir_law_check, run_euler, run_reference, SchemeKind};
use crate::stats;

/// Result of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub csv: Vec<u8>,
    /// Optional trajectory dump (`--dump-paths`).
    pub dump: Option<Vec<u8>>,
    /// Human-readable summary for the terminal.
    pub summary: String,
    /// False when a self-test check failed.
    pub ok: bool,
}

/// Runs `cfg` on a dedicated pool when a thread count is given.
pub fn run_with_threads(cfg: &RunConfig) -> Result<RunOutput> {
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| LabError::Config(format!("cannot build thread pool: {e}")))?
            .install(|| run(cfg)),
        None => run(cfg),
    }
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    match cfg.command {
        Command::Rates => rates(cfg),
        Command::Barrier => barrier(cfg),
        Command::BridgeCheck => bridge_check(cfg),
        Command::Cc => cc(cfg),
        Command::Decompose => decompose(cfg),
        Command::Moments => moments(cfg),
        Command::Selftest => selftest(cfg),
    }
}

/// Serialises `rows` below the provenance header.
pub fn csv_document<R: Serialize>(cfg: &RunConfig, rows: &[R]) -> Result<Vec<u8>> {
    let mut buf = format!(
        "# {} {}\n# command = {}\n# seed = {}\n# config = {}\n",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        cfg.command,
        cfg.seed,
        cfg.to_json()
    )
    .into_bytes();
    let mut w = csv::Writer::from_writer(&mut buf);
    for r in rows {
        w.serialize(r).map_err(|e| LabError::Io(e.to_string()))?;
    }
    w.flush()?;
    drop(w);
    Ok(buf)
}

fn output(csv: Vec<u8>, summary: String) -> RunOutput {
    RunOutput { csv, dump: None, summary, ok: true }
}

#[derive(Serialize)]
struct RateRow<'a> {
    preset: &'a str,
    nu: f64,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "N_f")]
    n_f: usize,
    #[serde(rename = "M")]
    m: usize,
    err_x: f64,
    se_x: f64,
    err_v: f64,
    se_v: f64,
    err_l1: f64,
    se_l1: f64,
    #[serde(rename = "floor_c_over_sqrtN")]
    floor: f64,
    slope_running: f64,
}

fn sweep_spec(cfg: &RunConfig) -> SweepSpec {
    SweepSpec {
        steps: cfg.steps.clone(),
        steps_fine: cfg.steps_fine,
        paths: cfg.paths,
        seed: cfg.seed,
        coarse_scheme: cfg.scheme.kind(),
    }
}

fn rates(cfg: &RunConfig) -> Result<RunOutput> {
    let p = cfg.heston()?;
    let sweep = error_sweep(&p, &sweep_spec(cfg))?;
    let c = barrier_constant(&p);
    let mut pts = Vec::new();
    let rows: Vec<RateRow> = sweep
        .reports
        .iter()
        .map(|r| {
            pts.push(((r.steps as f64).ln(), r.err_l1.ln()));
            let slope_running = if pts.len() < 2 { f64::NAN } else { -stats::least_squares(&pts).slope };
            RateRow {
                preset: &cfg.preset,
                nu: r.nu,
                n: r.steps,
                n_f: r.steps_fine,
                m: r.paths,
                err_x: r.err_x,
                se_x: r.se_x,
                err_v: r.err_v,
                se_v: r.se_v,
                err_l1: r.err_l1,
                se_l1: r.se_l1,
                floor: c / (r.steps as f64).sqrt(),
                slope_running,
            }
        })
        .collect();
    let mut summary = format!("nu = {:.4}, reference = {}\n", p.feller_index(), sweep.reference_scheme.tag());
    if sweep.reports.len() >= 4 {
        for (name, comp) in [("x", Component::X), ("v", Component::V), ("l1", Component::L1)] {
            let fit = fit_rate(&sweep.reports, comp)?;
            let _ = writeln!(
                summary,
                "order({name}) = {:.4}  r^2 = {:.4}  (upper bound min(nu/2, 1/2) = {:.4})",
                fit.slope, fit.r_squared, fit.expected_order
            );
        }
    }
    let mut out = output(csv_document(cfg, &rows)?, summary);
    if cfg.dump_paths.is_some() {
        out.dump = Some(dump_trajectories(cfg, &p)?);
    }
    Ok(out)
}

#[derive(Serialize)]
struct DumpRow {
    path_id: u64,
    k: usize,
    t_k: f64,
    xhat: f64,
    vhat: f64,
}

/// Paths dumped by `--dump-paths`.
pub const DUMPED_PATHS: u64 = 8;

/// Trajectories of the selected scheme at the first coarse resolution for the
/// first [`DUMPED_PATHS`] paths, driven by the aggregated fine increments.
fn dump_trajectories(cfg: &RunConfig, p: &HestonParams) -> Result<Vec<u8>> {
    let fine = TimeGrid::new(p.horizon(), cfg.steps_fine)?;
    let n = cfg.steps[0];
    let coarse = TimeGrid::new(p.horizon(), n)?;
    coarse.refinement_ratio(&fine)?;
    let mut rows = Vec::new();
    for id in 0..DUMPED_PATHS.min(cfg.paths as u64) {
        let (dw, db) = crate::grid_paths::coarsen_increments(&sample_path(&fine, cfg.seed, id), n)?;
        let traj = match cfg.scheme.kind() {
            SchemeKind::EulerFullTruncation => run_euler(p, &coarse, &dw, &db)?,
            SchemeKind::DriftImplicitSqrt => run_reference(p, &coarse, &dw, &db)?,
        };
        for k in 0..=n {
            rows.push(DumpRow { path_id: id, k, t_k: coarse.knot(k), xhat: traj.xhat[k], vhat: traj.vhat[k] });
        }
    }
    csv_document(cfg, &rows)
}

#[derive(Serialize)]
struct BarrierCsvRow<'a> {
    preset: &'a str,
    nu: f64,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "N_f")]
    n_f: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "floor_c_over_sqrtN")]
    floor: f64,
    err_x: f64,
    se_x: f64,
    ratio: f64,
    ratio_threshold: f64,
    above_floor: bool,
    bridge_scaled_mean: f64,
    bridge_scaled_se: f64,
    lower_bound: f64,
    upper_bound: f64,
}

fn barrier(cfg: &RunConfig) -> Result<RunOutput> {
    let p = cfg.heston()?;
    p.require_decomposable("the barrier comparison")?;
    p.require_non_degenerate_correlation("the barrier comparison")?;
    let sweep = error_sweep(&p, &sweep_spec(cfg))?;
    let table = barrier_rows(&p, &sweep)?;
    let rows: Vec<BarrierCsvRow> = table
        .iter()
        .map(|r| BarrierCsvRow {
            preset: &cfg.preset,
            nu: p.feller_index(),
            n: r.steps,
            n_f: cfg.steps_fine,
            m: cfg.paths,
            floor: r.floor,
            err_x: r.err_x,
            se_x: r.se_x,
            ratio: r.ratio,
            ratio_threshold: r.ratio_threshold,
            above_floor: r.above_floor(),
            bridge_scaled_mean: r.bridge_scaled_mean,
            bridge_scaled_se: r.bridge_scaled_se,
            lower_bound: SCALED_MEAN_FLOOR,
            upper_bound: scaled_mean_ceiling(),
        })
        .collect();
    let below = table.iter().filter(|r| !r.above_floor()).count();
    let summary = format!(
        "c = sigma T / 8 sqrt(1 - rho^2) = {:.6}; {} of {} resolutions below the floor\n",
        barrier_constant(&p),
        below,
        table.len()
    );
    Ok(output(csv_document(cfg, &rows)?, summary))
}

#[derive(Serialize)]
struct BridgeRow {
    #[serde(rename = "N")]
    steps: usize,
    #[serde(rename = "n")]
    refine: u32,
    #[serde(rename = "M")]
    m: usize,
    ks_stat: f64,
    #[serde(rename = "mean_abs_I")]
    mean_abs_i: f64,
    scaled_mean: f64,
    lower_bound: f64,
    upper_bound: f64,
}

fn bridge_check(cfg: &RunConfig) -> Result<RunOutput> {
    let mut rows = Vec::new();
    let mut summary = String::new();
    for &n in &cfg.steps {
        let check = BridgeCheck { paths: cfg.paths, steps: n, refine: cfg.refine, seed: cfg.seed, horizon: cfg.params.horizon };
        let r = distribution_identity_test(check)?;
        let _ = writeln!(
            summary,
            "N = {n}: KS = {:.5} (1% critical value {:.5}), sqrt(N) E|I| / T = {:.5} +- {:.5}",
            r.ks_stat,
            stats::ks_critical_1pct(cfg.paths, cfg.paths),
            r.scaled_mean(),
            r.scaled_se()
        );
        rows.push(BridgeRow {
            steps: n,
            refine: cfg.refine,
            m: cfg.paths,
            ks_stat: r.ks_stat,
            mean_abs_i: r.mean_abs_i,
            scaled_mean: r.scaled_mean(),
            lower_bound: SCALED_MEAN_FLOOR,
            upper_bound: scaled_mean_ceiling(),
        });
    }
    Ok(output(csv_document(cfg, &rows)?, summary))
}

/// Rows of the `cc`, `decompose` and `moments` tables.
#[derive(Serialize)]
struct EstimateRow {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    estimate: f64,
    std_error: f64,
    target: f64,
    pass: bool,
}

#[derive(Serialize)]
struct DecomposeRow {
    quantity: &'static str,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    estimate: f64,
    std_error: f64,
    target: f64,
    pass: bool,
}

fn cc(cfg: &RunConfig) -> Result<RunOutput> {
    let table = clark_cameron_table(&cfg.steps, cfg.steps_fine, cfg.paths, cfg.seed)?;
    let mut summary = String::new();
    let rows: Vec<EstimateRow> = table
        .iter()
        .map(|r| {
            let _ = writeln!(
                summary,
                "N = {}: rms = {:.6} +- {:.6}, target = {:.6} ({:+.2}%), left-point rms = {:.6}",
                r.steps,
                r.rms,
                r.se,
                r.target,
                100.0 * (r.rms - r.target) / r.target,
                r.left_point_rms
            );
            EstimateRow {
                n: r.steps,
                m: r.paths,
                estimate: r.rms,
                std_error: r.se,
                target: r.target,
                pass: (r.rms - r.target).abs() <= 3.0 * r.se,
            }
        })
        .collect();
    Ok(output(csv_document(cfg, &rows)?, summary))
}

/// Fine resolutions of the reconstruction check for a largest one `n_f`.
pub fn reconstruction_levels(n_f: usize) -> Result<[usize; 3]> {
    if n_f < 16 || !n_f.is_multiple_of(16) {
        return Err(LabError::InvalidGrid(format!("--steps-fine {n_f} must be a positive multiple of 16")));
    }
    Ok([n_f / 16, n_f / 4, n_f])
}

fn decompose(cfg: &RunConfig) -> Result<RunOutput> {
    let p = cfg.heston()?;
    p.require_decomposable("the X_T decomposition")?;
    let levels = reconstruction_levels(cfg.steps_fine)?;
    let study = decomposition_study(&p, &levels, &cfg.steps, cfg.paths, cfg.seed)?;
    let mut rows = Vec::new();
    let mut prev = f64::NAN;
    for &(n, gap, se) in &study.reconstruction {
        rows.push(DecomposeRow {
            quantity: "reconstruction",
            n,
            m: cfg.paths,
            estimate: gap,
            std_error: se,
            target: prev,
            pass: prev.is_nan() || gap < prev,
        });
        prev = gap;
    }
    // envelope of slope -1/2 through the first Riemann gap
    let (n0, g0, _) = study.riemann[0];
    for &(n, gap, se) in &study.riemann {
        let target = g0 * (n as f64 / n0 as f64).powf(-0.5);
        rows.push(DecomposeRow {
            quantity: "riemann",
            n,
            m: cfg.paths,
            estimate: gap,
            std_error: se,
            target,
            pass: gap <= target + 3.0 * se,
        });
    }
    let mut summary = String::new();
    if study.riemann.len() >= 2 {
        let pts: Vec<(f64, f64)> = study.riemann.iter().map(|r| ((r.0 as f64).ln(), r.1.ln())).collect();
        let _ = writeln!(summary, "Riemann-gap slope = {:.4}", stats::least_squares(&pts).slope);
    }
    Ok(output(csv_document(cfg, &rows)?, summary))
}

/// First-order discretisation allowance `C / N_f` for the reference moments.
pub const REFERENCE_MOMENT_ALLOWANCE: f64 = 0.05;

#[derive(Serialize)]
struct MomentRow {
    quantity: &'static str,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N_f")]
    n_f: usize,
    estimate: f64,
    std_error: f64,
    target: f64,
    pass: bool,
}

fn moments(cfg: &RunConfig) -> Result<RunOutput> {
    let p = cfg.heston()?;
    let r = cir_law_check(&p, cfg.steps_fine, cfg.paths, cfg.seed)?;
    let allowance = REFERENCE_MOMENT_ALLOWANCE / cfg.steps_fine as f64;
    let row = |quantity, (est, se): (f64, f64), target: f64, slack: f64| MomentRow {
        quantity,
        m: cfg.paths,
        n_f: cfg.steps_fine,
        estimate: est,
        std_error: se,
        target,
        pass: (est - target).abs() <= 3.0 * se + slack,
    };
    let ks_tol = acceptance::ks_tolerance(cfg.paths);
    let rows = vec![
        row("exact_mean", r.exact_mean, r.closed_mean, 0.0),
        row("exact_variance", r.exact_variance, r.closed_variance, 0.0),
        row("reference_mean", r.reference_mean, r.closed_mean, allowance),
        row("reference_variance", r.reference_variance, r.closed_variance, allowance),
        MomentRow {
            quantity: "ks_exact_vs_reference",
            m: cfg.paths,
            n_f: cfg.steps_fine,
            estimate: r.ks,
            std_error: f64::NAN,
            target: ks_tol,
            pass: r.ks < ks_tol,
        },
    ];
    let summary = format!(
        "V_T: closed-form mean {:.6}, variance {:.6e}; reference = {}\n",
        r.closed_mean,
        r.closed_variance,
        if p.feller_index() > 0.5 { "drift-implicit sqrt" } else { "full-truncation Euler" }
    );
    Ok(output(csv_document(cfg, &rows)?, summary))
}

#[derive(Serialize)]
struct CheckRow<'a> {
    criterion: u8,
    name: &'a str,
    pass: bool,
    detail: &'a str,
}

fn selftest(cfg: &RunConfig) -> Result<RunOutput> {
    let checks = acceptance::run_all(cfg.tier);
    let rows: Vec<CheckRow> = checks
        .iter()
        .map(|c| CheckRow { criterion: c.id, name: c.name, pass: c.passed, detail: &c.detail })
        .collect();
    let summary: String = checks.iter().map(|c| format!("{}\n", c.line())).collect();
    let ok = checks.iter().all(|c| c.passed);
    Ok(RunOutput { csv: csv_document(cfg, &rows)?, dump: None, summary, ok })
}
