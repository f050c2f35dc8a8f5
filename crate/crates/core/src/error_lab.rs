//! Strong L1 error at `T` of a coarse scheme against a fine reference on
//! coupled paths, log-log rate fits, and the comparison with the lower bound
//! `c N^{-1/2}`, `c = sigma T / 8 sqrt(1 - rho^2)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::bridge_lab::{bridge_sums_from_increments, scaled_mean_ceiling, SCALED_MEAN_FLOOR};
use crate::error::{LabError, Result};
use crate::grid_paths::{brownian_increments, coarsen, TimeGrid};
use crate::model::HestonParams;
use crate::rng::Channel;
use crate::schemes::{euler_terminal, reference_terminal, SchemeKind};
use crate::stats::{self, BATCHES};

/// Minimum number of paths for an error estimate.
pub const MIN_PATHS: usize = 1000;
/// Minimum `N_f / N` when the coarse scheme differs from the reference.
pub const MIN_REFINEMENT: usize = 8;

/// Error estimate at one coarse resolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub steps: usize,
    pub paths: usize,
    pub steps_fine: usize,
    pub nu: f64,
    pub err_x: f64,
    pub err_v: f64,
    pub err_l1: f64,
    pub se_x: f64,
    pub se_v: f64,
    pub se_l1: f64,
}

/// Which error column a rate fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    X,
    V,
    L1,
}

impl ErrorReport {
    pub fn component(&self, c: Component) -> (f64, f64) {
        match c {
            Component::X => (self.err_x, self.se_x),
            Component::V => (self.err_v, self.se_v),
            Component::L1 => (self.err_l1, self.se_l1),
        }
    }
}

/// Settings shared by all resolutions of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub steps: Vec<usize>,
    pub steps_fine: usize,
    pub paths: usize,
    pub seed: u64,
    pub coarse_scheme: SchemeKind,
}

impl SweepSpec {
    pub fn euler(steps: Vec<usize>, steps_fine: usize, paths: usize, seed: u64) -> Self {
        SweepSpec { steps, steps_fine, paths, seed, coarse_scheme: SchemeKind::EulerFullTruncation }
    }

    fn validate(&self) -> Result<()> {
        if self.paths < MIN_PATHS {
            return Err(LabError::TooFew { what: "paths", required: MIN_PATHS, actual: self.paths });
        }
        if self.steps.is_empty() {
            return Err(LabError::TooFew { what: "coarse resolutions", required: 1, actual: 0 });
        }
        // same scheme on both sides: N = N_f is allowed and gives a zero error
        let min_ratio = if self.coarse_scheme == SchemeKind::DriftImplicitSqrt { 1 } else { MIN_REFINEMENT };
        for &n in &self.steps {
            if n == 0 || !self.steps_fine.is_multiple_of(n) {
                return Err(LabError::NotNested { coarse: n, fine: self.steps_fine });
            }
            if self.steps_fine / n < min_ratio {
                return Err(LabError::InvalidGrid(format!(
                    "N_f / N = {} / {n} is below {min_ratio}; the reference would be too coarse",
                    self.steps_fine
                )));
            }
        }
        Ok(())
    }
}

/// Reports per coarse resolution plus the bridge quantity `E|I^n|` with
/// `n = log2(N_f / N)` measured on the same paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSweep {
    pub reports: Vec<ErrorReport>,
    /// `(sqrt(N) E|I^n| / T, se)` per resolution.
    pub bridge_scaled: Vec<(f64, f64)>,
    /// Scheme the reference actually ran (Euler when nu <= 1/2).
    pub reference_scheme: SchemeKind,
}

/// Per path and resolution: `|dx|`, `|dv|`, `|I^n|`.
type PathErrors = Vec<[f64; 3]>;

fn path_errors(p: &HestonParams, spec: &SweepSpec, fine: &TimeGrid, id: u64) -> (PathErrors, SchemeKind) {
    let dw = brownian_increments(fine, spec.seed, id, Channel::W);
    let db = brownian_increments(fine, spec.seed, id, Channel::B);
    let (reference, ref_kind) = reference_terminal(p, fine.dt(), &dw, &db);
    let errs = spec
        .steps
        .iter()
        .map(|&n| {
            let dt = p.horizon() / n as f64;
            let cw = coarsen(&dw, n).expect("validated nesting");
            let cb = coarsen(&db, n).expect("validated nesting");
            let coarse = match spec.coarse_scheme {
                SchemeKind::EulerFullTruncation => euler_terminal(p, dt, &cw, &cb),
                SchemeKind::DriftImplicitSqrt => reference_terminal(p, dt, &cw, &cb).0,
            };
            let (i, _) = bridge_sums_from_increments(&db, &dw, n, fine.dt());
            [(coarse.x - reference.x).abs(), (coarse.v - reference.v).abs(), i.abs()]
        })
        .collect();
    (errs, ref_kind)
}

/// Runs every resolution of `spec` on the same `M` fine paths.
pub fn error_sweep(p: &HestonParams, spec: &SweepSpec) -> Result<ErrorSweep> {
    spec.validate()?;
    let fine = TimeGrid::new(p.horizon(), spec.steps_fine)?;
    let per_path: Vec<(PathErrors, SchemeKind)> =
        (0..spec.paths as u64).into_par_iter().map(|id| path_errors(p, spec, &fine, id)).collect();
    let reference_scheme = per_path[0].1;
    let column = |i: usize, f: &dyn Fn(&[f64; 3]) -> f64| -> (f64, f64) {
        let xs: Vec<f64> = per_path.iter().map(|(e, _)| f(&e[i])).collect();
        stats::batch_mean_se(&xs, BATCHES)
    };
    let mut reports = Vec::with_capacity(spec.steps.len());
    let mut bridge_scaled = Vec::with_capacity(spec.steps.len());
    for (i, &n) in spec.steps.iter().enumerate() {
        let (err_x, se_x) = column(i, &|e| e[0]);
        let (err_v, se_v) = column(i, &|e| e[1]);
        let (err_l1, se_l1) = column(i, &|e| e[0] + e[1]);
        let (abs_i, se_i) = column(i, &|e| e[2]);
        let scale = (n as f64).sqrt() / p.horizon();
        reports.push(ErrorReport {
            steps: n,
            paths: spec.paths,
            steps_fine: spec.steps_fine,
            nu: p.feller_index(),
            err_x,
            err_v,
            err_l1,
            se_x,
            se_v,
            se_l1,
        });
        bridge_scaled.push((scale * abs_i, scale * se_i));
    }
    Ok(ErrorSweep { reports, bridge_scaled, reference_scheme })
}

/// `E|x_N - X_T| + E|v_N - V_T|` for the full-truncation Euler scheme.
pub fn strong_error(p: &HestonParams, steps: usize, steps_fine: usize, paths: usize, seed: u64) -> Result<ErrorReport> {
    let sweep = error_sweep(p, &SweepSpec::euler(vec![steps], steps_fine, paths, seed))?;
    Ok(sweep.reports.into_iter().next().expect("one resolution"))
}

/// Least-squares fit of `log err` against `log N`; `slope` is the order,
/// i.e. minus the fitted log-log slope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub expected_order: f64,
}

impl RateFit {
    pub fn from_points(points: Vec<(f64, f64)>, expected_order: f64) -> Result<Self> {
        if points.len() < 4 {
            return Err(LabError::TooFew { what: "rate-fit points", required: 4, actual: points.len() });
        }
        let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        if xs.len() != points.len() {
            return Err(LabError::Domain("rate fit needs distinct resolutions".into()));
        }
        if points.iter().any(|p| !p.1.is_finite()) {
            return Err(LabError::Domain("rate fit needs positive errors".into()));
        }
        let line = stats::least_squares(&points);
        Ok(RateFit { points, slope: -line.slope, intercept: line.intercept, r_squared: line.r_squared, expected_order })
    }
}

/// Fits the order of one error component; annotated with `min(nu/2, 1/2)`.
pub fn fit_rate(reports: &[ErrorReport], component: Component) -> Result<RateFit> {
    let nu = reports.first().map_or(f64::NAN, |r| r.nu);
    let points = reports.iter().map(|r| ((r.steps as f64).ln(), r.component(component).0.ln())).collect();
    RateFit::from_points(points, (nu / 2.0).min(0.5))
}

/// `sigma T / 8 sqrt(1 - rho^2)`.
pub fn barrier_constant(p: &HestonParams) -> f64 {
    p.sigma() * p.horizon() / 8.0 * p.rho_perp()
}

/// One line of the barrier comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierRow {
    pub steps: usize,
    /// `c N^{-1/2}`.
    pub floor: f64,
    pub err_x: f64,
    pub se_x: f64,
    /// `err_x / floor`.
    pub ratio: f64,
    /// `1 - 3 se_x / err_x`.
    pub ratio_threshold: f64,
    pub bridge_scaled_mean: f64,
    pub bridge_scaled_se: f64,
}

impl BarrierRow {
    pub fn above_floor(&self) -> bool {
        self.ratio >= self.ratio_threshold
    }

    pub fn bridge_in_bracket(&self) -> bool {
        (SCALED_MEAN_FLOOR..=scaled_mean_ceiling()).contains(&self.bridge_scaled_mean)
    }
}

/// Barrier rows from an existing Euler sweep.
pub fn barrier_rows(p: &HestonParams, sweep: &ErrorSweep) -> Result<Vec<BarrierRow>> {
    p.require_decomposable("the barrier comparison")?;
    p.require_non_degenerate_correlation("the barrier comparison")?;
    let c = barrier_constant(p);
    Ok(sweep
        .reports
        .iter()
        .zip(&sweep.bridge_scaled)
        .map(|(r, &(bm, bse))| {
            let floor = c / (r.steps as f64).sqrt();
            BarrierRow {
                steps: r.steps,
                floor,
                err_x: r.err_x,
                se_x: r.se_x,
                ratio: r.err_x / floor,
                ratio_threshold: 1.0 - 3.0 * r.se_x / r.err_x,
                bridge_scaled_mean: bm,
                bridge_scaled_se: bse,
            }
        })
        .collect())
}

/// Runs an Euler sweep and compares each `err_x` with the floor.
pub fn barrier_table(p: &HestonParams, steps: &[usize], steps_fine: usize, paths: usize, seed: u64) -> Result<Vec<BarrierRow>> {
    p.require_decomposable("the barrier comparison")?;
    p.require_non_degenerate_correlation("the barrier comparison")?;
    let sweep = error_sweep(p, &SweepSpec::euler(steps.to_vec(), steps_fine, paths, seed))?;
    barrier_rows(p, &sweep)
}

/// Best known CIR approximation order `alpha(nu, eps)`.
pub fn alpha_table(nu: f64, eps: f64) -> Result<f64> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(LabError::InvalidParameter { name: "nu", value: nu, reason: "must be positive" });
    }
    if !(eps > 0.0 && eps < nu.min(0.5)) {
        return Err(LabError::InvalidParameter { name: "eps", value: eps, reason: "must lie in (0, min(nu, 1/2))" });
    }
    Ok(if nu > 2.0 {
        1.0
    } else if nu > 1.0 || nu == 0.5 {
        0.5
    } else {
        nu.min(0.5) - eps
    })
}
