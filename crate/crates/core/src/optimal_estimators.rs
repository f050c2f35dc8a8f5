//! Concrete grid-measurable estimators.
//!
//! * Clark-Cameron: for `dX = V dB, dV = dW` on `[0, 1]`, the conditional
//!   expectation of `X_1 = int W dB` given the grid values of `W` and `B`.
//! * `int Bbar dW`: the part of `int B dW` that is measurable with respect to
//!   the full path of `W` and the grid values of `B`.
//! * The decomposition of `X_T` into a part measurable in the same sense plus
//!   `sqrt(1 - rho^2) (int A dB - sigma/2 int B dW)`, where
//!
//! ```text
//! A_t = int_0^t a_u du,
//! a_u = ((kappa theta / 2 - sigma^2 / 8) / sqrt(V_u) - kappa/2 sqrt(V_u)) 1{V_u > 0}
//! ```
//!
//! All stochastic integrals are left-point (Ito) sums on the fine grid.

use rayon::prelude::*;

use crate::bridge_lab::BridgeEnsemble;
use crate::error::{LabError, Result};
use crate::grid_paths::{brownian_increments, coarsen, cumulative, TimeGrid};
use crate::model::HestonParams;
use crate::rng::Channel;
use crate::schemes::{euler_terminal, run_reference, SchemeTrajectory};
use crate::stats;

/// Below this variance the indicator `1{V > 0}` is taken to be zero.
pub const V_FLOOR: f64 = 1e-12;

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(LabError::LengthMismatch { expected: a.len(), actual: b.len() })
    }
}

/// `sum_k W_{t_k} dB_k + 1/2 dW_k dB_k` from `W_{t_1..t_N}`, `B_{t_1..t_N}`
/// (`W_0 = B_0 = 0`).
pub fn clark_cameron_estimate(w_knots: &[f64], b_knots: &[f64]) -> Result<f64> {
    same_len(w_knots, b_knots)?;
    let (mut w_prev, mut b_prev, mut acc) = (0.0, 0.0, 0.0);
    for (&w, &b) in w_knots.iter().zip(b_knots) {
        let db = b - b_prev;
        acc += w_prev * db + 0.5 * (w - w_prev) * db;
        w_prev = w;
        b_prev = b;
    }
    Ok(acc)
}

/// Plain left-point sum `sum_k W_{t_k} dB_k`; grid-measurable but suboptimal.
pub fn left_point_estimate(w_knots: &[f64], b_knots: &[f64]) -> Result<f64> {
    same_len(w_knots, b_knots)?;
    let (mut w_prev, mut b_prev, mut acc) = (0.0, 0.0, 0.0);
    for (&w, &b) in w_knots.iter().zip(b_knots) {
        acc += w_prev * (b - b_prev);
        w_prev = w;
        b_prev = b;
    }
    Ok(acc)
}

/// Left-point sum `sum_j f_j (g_{j+1} - g_j)` of knot values against increments.
pub fn ito_sum(integrand_knots: &[f64], driver_increments: &[f64]) -> f64 {
    integrand_knots.iter().zip(driver_increments).map(|(f, d)| f * d).sum()
}

/// One row of the Clark-Cameron table.
#[derive(Debug, Clone, PartialEq)]
pub struct ClarkCameronRow {
    pub steps: usize,
    pub paths: usize,
    pub rms: f64,
    pub se: f64,
    /// `N^{-1/2} / 2`.
    pub target: f64,
    pub left_point_rms: f64,
    pub left_point_se: f64,
}

impl ClarkCameronRow {
    pub fn relative_deviation(&self) -> f64 {
        (self.rms - self.target).abs() / self.target
    }
}

/// RMS error of the Clark-Cameron estimator and of the left-point sum against
/// the fine left-point sum of `int_0^1 W dB`, for every coarse `N` on shared paths.
pub fn clark_cameron_table(steps: &[usize], fine_steps: usize, paths: usize, seed: u64) -> Result<Vec<ClarkCameronRow>> {
    let fine = TimeGrid::new(1.0, fine_steps)?;
    for &n in steps {
        TimeGrid::new(1.0, n)?.refinement_ratio(&fine)?;
    }
    if paths < 2 {
        return Err(LabError::TooFew { what: "paths", required: 2, actual: paths });
    }
    let per_path: Vec<Vec<(f64, f64)>> = (0..paths as u64)
        .into_par_iter()
        .map(|id| {
            let dw = brownian_increments(&fine, seed, id, Channel::W);
            let db = brownian_increments(&fine, seed, id, Channel::B);
            let w = cumulative(&dw);
            let b = cumulative(&db);
            let exact = ito_sum(&w, &db);
            steps
                .iter()
                .map(|&n| {
                    let r = fine_steps / n;
                    let wk: Vec<f64> = (1..=n).map(|k| w[k * r]).collect();
                    let bk: Vec<f64> = (1..=n).map(|k| b[k * r]).collect();
                    let cc = clark_cameron_estimate(&wk, &bk).expect("equal lengths");
                    let lp = left_point_estimate(&wk, &bk).expect("equal lengths");
                    ((cc - exact).powi(2), (lp - exact).powi(2))
                })
                .collect()
        })
        .collect();
    Ok(steps
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let (cc_sq, lp_sq): (Vec<f64>, Vec<f64>) = per_path.iter().map(|r| r[i]).unzip();
            let (mse, mse_se) = stats::mean_se(&cc_sq);
            let (lp_mse, lp_mse_se) = stats::mean_se(&lp_sq);
            ClarkCameronRow {
                steps: n,
                paths,
                rms: mse.sqrt(),
                se: mse_se / (2.0 * mse.sqrt()),
                target: 0.5 / (n as f64).sqrt(),
                left_point_rms: lp_mse.sqrt(),
                left_point_se: lp_mse_se / (2.0 * lp_mse.sqrt()),
            }
        })
        .collect())
}

/// `int Bbar dW` on the fine grid:
/// `sum_k B_{t_k} dW_k + sum_k (dB_k / dt) int_{t_k}^{t_{k+1}} (t - t_k) dW_t`,
/// inner integrals as left-point sums.
pub fn linear_interp_integral(ens: &BridgeEnsemble, w_fine: &[f64]) -> f64 {
    assert_eq!(w_fine.len(), ens.b_fine.len(), "W must be given at the fine knots");
    let r = 1usize << ens.level;
    let b = &ens.b_fine;
    let mut acc = 0.0;
    for k in 0..ens.grid_coarse.steps() {
        let (lo, hi) = (k * r, (k + 1) * r);
        let coarse_dw = w_fine[hi] - w_fine[lo];
        let ramp: f64 = (0..r).map(|l| (l as f64 / r as f64) * (w_fine[lo + l + 1] - w_fine[lo + l])).sum();
        acc += b[lo] * coarse_dw + (b[hi] - b[lo]) * ramp;
    }
    acc
}

/// Pieces of the decomposition of `X_T` on one fine path.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionParts {
    pub grid: TimeGrid,
    pub y_t: f64,
    pub a_path: Vec<f64>,
    pub integrand: Vec<f64>,
    pub u_path: Vec<f64>,
    pub int_a_db: f64,
    pub int_b_dw: f64,
    pub int_v_du: f64,
    pub x_t_reconstructed: f64,
}

impl DecompositionParts {
    /// `Y_T + sqrt(1 - rho^2) int A dB - sigma/2 sqrt(1 - rho^2) int B dW`.
    pub fn reassemble(&self, p: &HestonParams) -> f64 {
        let perp = p.rho_perp();
        self.y_t + perp * self.int_a_db - 0.5 * p.sigma() * perp * self.int_b_dw
    }
}

/// Decomposes `X_T` along a fine positive trajectory of `V` and the fine
/// increments of `W` and `B`.
pub fn decompose_x(p: &HestonParams, fine_traj: &SchemeTrajectory, dw: &[f64], db: &[f64]) -> Result<DecompositionParts> {
    p.require_decomposable("the X_T decomposition")?;
    let grid = fine_traj.grid;
    let n = grid.steps();
    for len in [dw.len(), db.len()] {
        if len != n {
            return Err(LabError::LengthMismatch { expected: n, actual: len });
        }
    }
    let dt = grid.dt();
    let c = p.lamperti_constant();
    let half_kappa = 0.5 * p.kappa();
    let u_path: Vec<f64> = fine_traj.vhat.iter().map(|v| v.max(0.0).sqrt()).collect();
    let integrand: Vec<f64> = fine_traj
        .vhat
        .iter()
        .zip(&u_path)
        .map(|(&v, &u)| if v > V_FLOOR { c / u - half_kappa * u } else { 0.0 })
        .collect();
    let mut a_path = Vec::with_capacity(n + 1);
    a_path.push(0.0);
    let mut acc = 0.0;
    for pair in integrand.windows(2) {
        acc += 0.5 * (pair[0] + pair[1]) * dt;
        a_path.push(acc);
    }
    let int_v_du: f64 = fine_traj.vhat.windows(2).map(|v| 0.5 * (v[0] + v[1]) * dt).sum();
    let b = cumulative(db);
    let int_a_db = ito_sum(&a_path, db);
    let int_b_dw = ito_sum(&b, dw);

    let (rho, sigma, kappa) = (p.rho(), p.sigma(), p.kappa());
    let t = grid.horizon();
    let v_t = *fine_traj.vhat.last().unwrap();
    let b_t = b[n];
    let a_t = a_path[n];
    let y_t = p.x0()
        + (rho / sigma) * (v_t - p.v0() - kappa * p.theta() * t)
        + p.mu() * t
        + (rho * kappa / sigma - 0.5) * int_v_du
        + p.rho_perp() * (u_path[n] * b_t - a_t * b_t);
    let mut parts = DecompositionParts {
        grid,
        y_t,
        a_path,
        integrand,
        u_path,
        int_a_db,
        int_b_dw,
        int_v_du,
        x_t_reconstructed: 0.0,
    };
    parts.x_t_reconstructed = parts.reassemble(p);
    Ok(parts)
}

/// `sum_i A_{t_i} (B_{t_{i+1}} - B_{t_i})` over a coarse grid nested in the
/// decomposition's fine grid.
pub fn riemann_a_db(parts: &DecompositionParts, grid_coarse: &TimeGrid, db_coarse: &[f64]) -> Result<f64> {
    let r = grid_coarse.refinement_ratio(&parts.grid)?;
    if db_coarse.len() != grid_coarse.steps() {
        return Err(LabError::LengthMismatch { expected: grid_coarse.steps(), actual: db_coarse.len() });
    }
    Ok(db_coarse.iter().enumerate().map(|(i, d)| parts.a_path[i * r] * d).sum())
}

/// Results of [`decomposition_study`].
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionStudy {
    /// `(N_f, E|X_T^{Euler, N_f} - X_T^{reconstructed, N_f}|, se)`.
    pub reconstruction: Vec<(usize, f64, f64)>,
    /// `(N, E|int A dB - sum A_{t_i} dB_i|, se)` against the finest grid.
    pub riemann: Vec<(usize, f64, f64)>,
    pub paths: usize,
}

// Per path: reconstruction gaps by fine level, Riemann gaps by coarse level.
type PathGaps = (Vec<f64>, Vec<f64>);

/// Reconstruction gaps for each fine resolution and Riemann-sum gaps of
/// `int A dB` for each coarse resolution, on shared paths generated at the
/// largest fine resolution.
pub fn decomposition_study(
    p: &HestonParams,
    fine_steps: &[usize],
    coarse_steps: &[usize],
    paths: usize,
    seed: u64,
) -> Result<DecompositionStudy> {
    p.require_decomposable("the X_T decomposition")?;
    let finest = *fine_steps.iter().max().ok_or(LabError::TooFew { what: "fine resolutions", required: 1, actual: 0 })?;
    let top = TimeGrid::new(p.horizon(), finest)?;
    for &n in fine_steps.iter().chain(coarse_steps) {
        TimeGrid::new(p.horizon(), n)?.refinement_ratio(&top)?;
    }
    if paths < 2 {
        return Err(LabError::TooFew { what: "paths", required: 2, actual: paths });
    }
    let per_path: Vec<PathGaps> = (0..paths as u64)
        .into_par_iter()
        .map(|id| -> Result<(Vec<f64>, Vec<f64>)> {
            let dw = brownian_increments(&top, seed, id, Channel::W);
            let db = brownian_increments(&top, seed, id, Channel::B);
            let mut recon = Vec::with_capacity(fine_steps.len());
            let mut top_parts = None;
            for &nf in fine_steps {
                let g = TimeGrid::new(p.horizon(), nf)?;
                let (w, b) = (coarsen(&dw, nf)?, coarsen(&db, nf)?);
                let traj = run_reference(p, &g, &w, &b)?;
                let parts = decompose_x(p, &traj, &w, &b)?;
                let euler = euler_terminal(p, g.dt(), &w, &b);
                recon.push((euler.x - parts.x_t_reconstructed).abs());
                if nf == finest {
                    top_parts = Some(parts);
                }
            }
            let parts = top_parts.expect("finest resolution is in the list");
            let riemann = coarse_steps
                .iter()
                .map(|&n| -> Result<f64> {
                    let g = TimeGrid::new(p.horizon(), n)?;
                    let est = riemann_a_db(&parts, &g, &coarsen(&db, n)?)?;
                    Ok((parts.int_a_db - est).abs())
                })
                .collect::<Result<_>>()?;
            Ok((recon, riemann))
        })
        .collect::<Result<_>>()?;
    let column = |f: &dyn Fn(&PathGaps) -> f64| -> (f64, f64) {
        let xs: Vec<f64> = per_path.iter().map(f).collect();
        stats::mean_se(&xs)
    };
    let reconstruction = fine_steps
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let (m, se) = column(&|r| r.0[i]);
            (n, m, se)
        })
        .collect();
    let riemann = coarse_steps
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let (m, se) = column(&|r| r.1[i]);
            (n, m, se)
        })
        .collect();
    Ok(DecompositionStudy { reconstruction, riemann, paths })
}
