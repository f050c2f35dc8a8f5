//! Brownian-bridge machinery on a coarse observation grid.
//!
//! For a coarse grid `t_0 < ... < t_N` and a dyadic refinement with `2^n`
//! sub-steps per cell:
//!
//! ```text
//! Bbar_t = B_{t_k} + (t - t_k)/(t_{k+1} - t_k) (B_{t_{k+1}} - B_{t_k})
//! Bcirc_t = B_t - Bbar_t
//! I^n(Bcirc, W) = sum_k sum_l Bcirc_{t_k + tau_l} (W_{t_k + tau_{l+1}} - W_{t_k + tau_l})
//! Q^n = sum_k sum_l |Bcirc_{t_k + tau_l}|^2 (tau_{l+1} - tau_l)
//! ```
//!
//! Conditionally on the bridge, `I^n` is centred Gaussian with variance `Q^n`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::grid_paths::{brownian_increments, cumulative, TimeGrid};
use crate::rng::{Channel, PathRng};
use crate::stats;

/// Paired coarse/fine view of one path of `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeEnsemble {
    pub grid_coarse: TimeGrid,
    pub grid_fine: TimeGrid,
    /// Dyadic level `n`: `grid_fine.steps() = grid_coarse.steps() * 2^n`.
    pub level: u32,
    pub b_fine: Vec<f64>,
    pub bbar: Vec<f64>,
    pub bcirc: Vec<f64>,
}

/// Splits `B` (values at the fine knots) into its piecewise-linear
/// interpolant on the coarse grid and the bridge remainder.
pub fn bridge_decompose(b_fine: &[f64], grid_coarse: &TimeGrid, grid_fine: &TimeGrid) -> Result<BridgeEnsemble> {
    let level = grid_coarse.dyadic_level(grid_fine)?;
    if b_fine.len() != grid_fine.steps() + 1 {
        return Err(LabError::LengthMismatch { expected: grid_fine.steps() + 1, actual: b_fine.len() });
    }
    let r = 1usize << level;
    let mut bbar = Vec::with_capacity(b_fine.len());
    for k in 0..grid_coarse.steps() {
        let (left, right) = (b_fine[k * r], b_fine[(k + 1) * r]);
        for l in 0..r {
            bbar.push(left + (l as f64 / r as f64) * (right - left));
        }
    }
    bbar.push(*b_fine.last().unwrap());
    let bcirc = b_fine.iter().zip(&bbar).map(|(b, l)| b - l).collect();
    Ok(BridgeEnsemble {
        grid_coarse: *grid_coarse,
        grid_fine: *grid_fine,
        level,
        b_fine: b_fine.to_vec(),
        bbar,
        bcirc,
    })
}

impl BridgeEnsemble {
    fn stride(&self, level: u32) -> usize {
        assert!(level <= self.level, "level {level} exceeds ensemble level {}", self.level);
        1 << (self.level - level)
    }

    /// `I^m(Bcirc, W)` for `m <= n`, from `W` at the fine knots.
    pub fn iterated_integral_at_level(&self, w_fine: &[f64], level: u32) -> f64 {
        assert_eq!(w_fine.len(), self.bcirc.len(), "W must be given at the fine knots");
        let s = self.stride(level);
        (0..self.grid_fine.steps())
            .step_by(s)
            .map(|j| self.bcirc[j] * (w_fine[j + s] - w_fine[j]))
            .sum()
    }

    /// `Q^m`, the left-point Riemann sum of `|Bcirc|^2` at level `m <= n`.
    pub fn quadratic_sum_at_level(&self, level: u32) -> f64 {
        let s = self.stride(level);
        let h = self.grid_fine.dt() * s as f64;
        (0..self.grid_fine.steps()).step_by(s).map(|j| self.bcirc[j] * self.bcirc[j]).sum::<f64>() * h
    }

    pub fn quadratic_sum(&self) -> f64 {
        self.quadratic_sum_at_level(self.level)
    }
}

/// `I^n(Bcirc, W)` at the ensemble's own refinement level.
pub fn iterated_integral_dyadic(ens: &BridgeEnsemble, w_fine: &[f64]) -> f64 {
    ens.iterated_integral_at_level(w_fine, ens.level)
}

/// `(I^n, Q^n)` straight from fine increments, without materialising the
/// ensemble. `coarse_steps` must divide `db.len()`.
pub fn bridge_sums_from_increments(db: &[f64], dw: &[f64], coarse_steps: usize, dt_fine: f64) -> (f64, f64) {
    debug_assert_eq!(db.len(), dw.len());
    let r = db.len() / coarse_steps;
    let (mut i_sum, mut q_sum) = (0.0, 0.0);
    for (cell_b, cell_w) in db.chunks_exact(r).zip(dw.chunks_exact(r)) {
        let jump: f64 = cell_b.iter().sum();
        let mut local = 0.0;
        for (l, (&b, &w)) in cell_b.iter().zip(cell_w).enumerate() {
            let circ = local - (l as f64 / r as f64) * jump;
            i_sum += circ * w;
            q_sum += circ * circ;
            local += b;
        }
    }
    (i_sum, q_sum * dt_fine)
}

/// `E|Bcirc_t|^2 = (t - t_k)(t_{k+1} - t)/(t_{k+1} - t_k)` and its integrated
/// square root over `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeL2Profile {
    pub grid: TimeGrid,
}

pub fn bridge_l2_profile(grid: &TimeGrid) -> BridgeL2Profile {
    BridgeL2Profile { grid: *grid }
}

impl BridgeL2Profile {
    pub fn second_moment(&self, t: f64) -> f64 {
        let k = self.grid.index_of(t).min(self.grid.steps() - 1);
        let (a, b) = (self.grid.knot(k), self.grid.knot(k + 1));
        ((t - a) * (b - t) / (b - a)).max(0.0)
    }

    /// Closed form `sqrt(T^3 / N) * pi / 8`.
    pub fn integral_of_sqrt(&self) -> f64 {
        let t = self.grid.horizon();
        (t * t * t / self.grid.steps() as f64).sqrt() * PI / 8.0
    }

    /// Same integral by tanh-sinh quadrature, cell by cell.
    pub fn integral_of_sqrt_quadrature(&self) -> f64 {
        (0..self.grid.steps())
            .map(|k| {
                let (a, b) = (self.grid.knot(k), self.grid.knot(k + 1));
                let width = b - a;
                tanh_sinh(|left, right| (left * right / width).sqrt(), a, b)
            })
            .sum()
    }
}

/// Double-exponential quadrature on `[a, b]`. The integrand receives the
/// distances to both endpoints, so endpoint singularities stay accurate.
pub fn tanh_sinh(f: impl Fn(f64, f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let term = |t: f64| -> f64 {
        let s = 0.5 * PI * t.sinh();
        let c = s.cosh();
        let w = 0.5 * PI * t.cosh() / (c * c);
        // 1 +- tanh(s) without cancellation
        let left = 2.0 * half / (1.0 + (-2.0 * s).exp());
        let right = 2.0 * half / (1.0 + (2.0 * s).exp());
        if left <= 0.0 || right <= 0.0 || !w.is_finite() {
            0.0
        } else {
            w * f(left, right)
        }
    };
    let t_max = 4.0;
    let mut h = 0.5;
    let mut sum = term(0.0) + (1..=(t_max / h) as usize).map(|k| term(k as f64 * h) + term(-(k as f64) * h)).sum::<f64>();
    let mut estimate = half * h * sum;
    for _ in 0..12 {
        h *= 0.5;
        let n = (t_max / h) as usize;
        // add only the new odd abscissae
        sum += (1..=n).step_by(2).map(|k| term(k as f64 * h) + term(-(k as f64) * h)).sum::<f64>();
        let next = half * h * sum;
        let done = (next - estimate).abs() <= 1e-15 * next.abs();
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

/// Settings for the distributional-identity experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeCheck {
    pub paths: usize,
    pub steps: usize,
    pub refine: u32,
    pub seed: u64,
    pub horizon: f64,
}

/// Outcome of [`distribution_identity_test`].
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub check: BridgeCheck,
    /// Two-sample KS distance between `I^n` and `G sqrt(Q^n)`.
    pub ks_stat: f64,
    pub mean_abs_i: f64,
    pub se_abs_i: f64,
    pub mean_i: f64,
    pub se_i: f64,
    pub mean_comparison: f64,
    pub se_comparison: f64,
    /// KS distance between the `I^n` sample and its mirror image.
    pub ks_mirror: f64,
}

impl IdentityReport {
    /// `sqrt(N) E|I^n| / T`.
    pub fn scaled_mean(&self) -> f64 {
        (self.check.steps as f64).sqrt() * self.mean_abs_i / self.check.horizon
    }

    pub fn scaled_se(&self) -> f64 {
        (self.check.steps as f64).sqrt() * self.se_abs_i / self.check.horizon
    }
}

/// Lower end of the bracket for `sqrt(N) E|I| / T`.
pub const SCALED_MEAN_FLOOR: f64 = 0.25;

/// Upper end: `sqrt(2/pi) / sqrt(6)`, Lyapunov applied to `E int |Bcirc|^2 = T^2/(6N)`.
pub fn scaled_mean_ceiling() -> f64 {
    (2.0 / PI).sqrt() / 6f64.sqrt()
}

/// Draws `(I^n, Q^n, G)` for one path: `B` and `W` on the fine grid from the
/// path's own channels, `G` from the auxiliary channel.
pub fn sample_bridge_path(check: &BridgeCheck, path_id: u64) -> Result<(f64, f64, f64)> {
    let (i, q, g, _) = sample_bridge_path_with(check, path_id, &[])?;
    Ok((i, q, g))
}

/// As [`sample_bridge_path`], plus `|I|` for each coarse resolution in `also`
/// computed from the same fine increments.
fn sample_bridge_path_with(check: &BridgeCheck, path_id: u64, also: &[usize]) -> Result<(f64, f64, f64, Vec<f64>)> {
    let fine = TimeGrid::new(check.horizon, check.steps << check.refine)?;
    let db = brownian_increments(&fine, check.seed, path_id, Channel::B);
    let dw = brownian_increments(&fine, check.seed, path_id, Channel::W);
    let (i, q) = bridge_sums_from_increments(&db, &dw, check.steps, fine.dt());
    let extra = also.iter().map(|&n| bridge_sums_from_increments(&db, &dw, n, fine.dt()).0.abs()).collect();
    let g = PathRng::new(check.seed, path_id, Channel::Aux).normal();
    Ok((i, q, g, extra))
}

/// `sqrt(N) E|I^n| / T` at one coarse resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledMean {
    pub steps: usize,
    pub refine: u32,
    pub mean: f64,
    pub se: f64,
}

/// Samples `I^n(Bcirc, W)` and `G sqrt(Q^n)` over `paths` bridges and compares
/// their laws.
pub fn distribution_identity_test(check: BridgeCheck) -> Result<IdentityReport> {
    Ok(distribution_identity_study(check, &[])?.0)
}

/// [`distribution_identity_test`] together with the scaled mean of `|I|` for
/// further coarse resolutions `also`, measured on the same fine paths. Each of
/// them must be a power-of-two divisor of the fine resolution.
pub fn distribution_identity_study(check: BridgeCheck, also: &[usize]) -> Result<(IdentityReport, Vec<ScaledMean>)> {
    if check.paths < 1000 {
        return Err(LabError::TooFew { what: "bridge paths", required: 1000, actual: check.paths });
    }
    if check.refine < 6 {
        return Err(LabError::TooFew { what: "refinement level", required: 6, actual: check.refine as usize });
    }
    TimeGrid::new(check.horizon, check.steps)?;
    let fine = TimeGrid::new(check.horizon, check.steps << check.refine)?;
    let levels = also
        .iter()
        .map(|&n| TimeGrid::new(check.horizon, n)?.dyadic_level(&fine))
        .collect::<Result<Vec<u32>>>()?;
    let draws: Vec<(f64, f64, f64, Vec<f64>)> = (0..check.paths as u64)
        .into_par_iter()
        .map(|id| sample_bridge_path_with(&check, id, also))
        .collect::<Result<_>>()?;
    let integrals: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let comparison: Vec<f64> = draws.iter().map(|d| d.2 * d.1.sqrt()).collect();
    let abs: Vec<f64> = integrals.iter().map(|x| x.abs()).collect();
    let mirror: Vec<f64> = integrals.iter().map(|x| -x).collect();
    let (mean_abs_i, se_abs_i) = stats::mean_se(&abs);
    let (mean_i, se_i) = stats::mean_se(&integrals);
    let (mean_comparison, se_comparison) = stats::mean_se(&comparison);
    let report = IdentityReport {
        check,
        ks_stat: stats::ks_two_sample(&integrals, &comparison),
        mean_abs_i,
        se_abs_i,
        mean_i,
        se_i,
        mean_comparison,
        se_comparison,
        ks_mirror: stats::ks_two_sample(&integrals, &mirror),
    };
    let scaled = also
        .iter()
        .zip(levels)
        .enumerate()
        .map(|(j, (&n, refine))| {
            let xs: Vec<f64> = draws.iter().map(|d| d.3[j]).collect();
            let (m, se) = stats::mean_se(&xs);
            let scale = (n as f64).sqrt() / check.horizon;
            ScaledMean { steps: n, refine, mean: scale * m, se: scale * se }
        })
        .collect();
    Ok((report, scaled))
}

/// Mean square gap `E|I^{m+1} - I^m|^2` for `m = 1..max_level`, estimated on
/// shared paths refined to `max_level`. Returns `(m, gap, se)`.
pub fn refinement_profile(
    steps: usize,
    max_level: u32,
    paths: usize,
    seed: u64,
    horizon: f64,
) -> Result<Vec<(u32, f64, f64)>> {
    let coarse = TimeGrid::new(horizon, steps)?;
    let fine = TimeGrid::new(horizon, steps << max_level)?;
    let per_path: Vec<Vec<f64>> = (0..paths as u64)
        .into_par_iter()
        .map(|id| -> Result<Vec<f64>> {
            let b = cumulative(&brownian_increments(&fine, seed, id, Channel::B));
            let w = cumulative(&brownian_increments(&fine, seed, id, Channel::W));
            let ens = bridge_decompose(&b, &coarse, &fine)?;
            let levels: Vec<f64> = (1..=max_level).map(|m| ens.iterated_integral_at_level(&w, m)).collect();
            Ok(levels.windows(2).map(|p| (p[1] - p[0]).powi(2)).collect())
        })
        .collect::<Result<_>>()?;
    Ok((1..max_level)
        .map(|m| {
            let gaps: Vec<f64> = per_path.iter().map(|g| g[(m - 1) as usize]).collect();
            let (mean, se) = stats::mean_se(&gaps);
            (m, mean, se)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_paths::{make_grid, sample_path};
    use proptest::prelude::*;

    #[test]
    fn bridge_vanishes_at_coarse_knots() {
        let coarse = make_grid(1.0, 8).unwrap();
        let fine = make_grid(1.0, 8 * 16).unwrap();
        let b = sample_path(&fine, 1, 0).b_knots();
        let ens = bridge_decompose(&b, &coarse, &fine).unwrap();
        for k in 0..=8 {
            assert_eq!(ens.bcirc[k * 16], 0.0);
            assert_eq!(ens.bbar[k * 16], b[k * 16]);
        }
        assert_eq!(ens.level, 4);
    }

    #[test]
    fn linear_path_has_no_bridge() {
        let coarse = make_grid(2.0, 4).unwrap();
        let fine = make_grid(2.0, 64).unwrap();
        let b: Vec<f64> = fine.knots().iter().map(|t| 0.5 * t).collect();
        let ens = bridge_decompose(&b, &coarse, &fine).unwrap();
        assert!(ens.bcirc.iter().all(|c| c.abs() < 1e-15));
        let w = sample_path(&fine, 3, 3).w_knots();
        assert!(iterated_integral_dyadic(&ens, &w).abs() < 1e-14);
    }

    #[test]
    fn constant_w_gives_zero_integral() {
        let coarse = make_grid(1.0, 4).unwrap();
        let fine = make_grid(1.0, 64).unwrap();
        let b = sample_path(&fine, 2, 0).b_knots();
        let ens = bridge_decompose(&b, &coarse, &fine).unwrap();
        assert_eq!(iterated_integral_dyadic(&ens, &vec![0.7; 65]), 0.0);
    }

    #[test]
    fn decompose_rejects_bad_grids() {
        let coarse = make_grid(1.0, 4).unwrap();
        let b = vec![0.0; 13];
        assert!(bridge_decompose(&b, &coarse, &make_grid(1.0, 12).unwrap()).is_err());
        assert!(bridge_decompose(&b, &coarse, &make_grid(1.0, 6).unwrap()).is_err());
        assert!(bridge_decompose(&b[..10], &coarse, &make_grid(1.0, 16).unwrap()).is_err());
    }

    #[test]
    fn increment_shortcut_matches_ensemble() {
        let coarse = make_grid(1.0, 8).unwrap();
        let fine = make_grid(1.0, 8 << 5).unwrap();
        let p = sample_path(&fine, 42, 9);
        let ens = bridge_decompose(&p.b_knots(), &coarse, &fine).unwrap();
        let (i, q) = bridge_sums_from_increments(&p.db, &p.dw, 8, fine.dt());
        assert!((i - iterated_integral_dyadic(&ens, &p.w_knots())).abs() < 1e-13);
        assert!((q - ens.quadratic_sum()).abs() < 1e-14);
    }

    #[test]
    fn profile_examples() {
        let g = make_grid(1.0, 1).unwrap();
        let prof = bridge_l2_profile(&g);
        assert!((prof.integral_of_sqrt() - PI / 8.0).abs() < 1e-16);
        assert!((prof.second_moment(0.5) - 0.25).abs() < 1e-16);
        let g4 = make_grid(1.0, 4).unwrap();
        let prof4 = bridge_l2_profile(&g4);
        assert!((prof4.integral_of_sqrt() - PI / 16.0).abs() < 1e-16);
        // midpoint of a cell of width 1/4 -> 1/16
        assert!((prof4.second_moment(0.375) - 1.0 / 16.0).abs() < 1e-16);
        assert_eq!(prof4.second_moment(0.5), 0.0);
        assert_eq!(prof4.second_moment(1.0), 0.0);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for (t, n) in [(1.0, 1), (1.0, 4), (2.5, 7), (0.3, 64), (1.0, 1000)] {
            let prof = bridge_l2_profile(&make_grid(t, n).unwrap());
            let (closed, quad) = (prof.integral_of_sqrt(), prof.integral_of_sqrt_quadrature());
            assert!(((closed - quad) / closed).abs() <= 1e-10, "T={t} N={n}: {closed} vs {quad}");
        }
    }

    #[test]
    fn tanh_sinh_smooth_integrand() {
        let v = tanh_sinh(|l, _| l * l, 0.0, 3.0);
        assert!((v - 9.0).abs() < 1e-13);
    }

    #[test]
    fn bridge_second_moment_by_simulation() {
        // E|Bcirc_t|^2 at a few fine knots of a cell of width 1/4
        let coarse = make_grid(1.0, 4).unwrap();
        let fine = make_grid(1.0, 32).unwrap();
        let prof = bridge_l2_profile(&coarse);
        let m = 100_000;
        let mut sq = (0..9).map(|_| Vec::with_capacity(m)).collect::<Vec<_>>();
        for id in 0..m as u64 {
            let b = cumulative(&brownian_increments(&fine, 17, id, Channel::B));
            let ens = bridge_decompose(&b, &coarse, &fine).unwrap();
            for (j, s) in sq.iter_mut().enumerate() {
                s.push(ens.bcirc[8 + j].powi(2));
            }
        }
        for (j, s) in sq.iter().enumerate() {
            let t = fine.knot(8 + j);
            let (mean, se) = stats::mean_se(s);
            let target = prof.second_moment(t);
            if target == 0.0 {
                assert!(mean.abs() < 1e-20);
            } else {
                assert!((mean - target).abs() < 3.0 * se, "t={t}: {mean} vs {target} (se {se})");
            }
        }
    }

    #[test]
    fn variance_of_iterated_integral() {
        // Var I^n ~ E int |Bcirc|^2 dt = T^2 / (6N) at n = 8
        let check = BridgeCheck { paths: 100_000, steps: 4, refine: 8, seed: 5, horizon: 1.0 };
        let samples: Vec<f64> = (0..check.paths as u64)
            .map(|id| sample_bridge_path(&check, id).unwrap().0)
            .collect();
        let sq: Vec<f64> = samples.iter().map(|x| x * x).collect();
        let (var, se) = stats::mean_se(&sq);
        // integral of t (D - t) / D over [0, D] is D^2 / 6, summed over N cells
        let oracle = {
            let d = 0.25f64;
            let n_quad = 20_000;
            let h = d / n_quad as f64;
            4.0 * (0..n_quad).map(|i| { let t = (i as f64 + 0.5) * h; t * (d - t) / d * h }).sum::<f64>()
        };
        assert!((oracle - 1.0 / 24.0).abs() < 1e-9);
        assert!((var - oracle).abs() < 3.0 * se, "{var} vs {oracle} (se {se})");
    }

    #[test]
    fn identity_small_sample() {
        let check = BridgeCheck { paths: 20_000, steps: 8, refine: 6, seed: 3, horizon: 1.0 };
        let r = distribution_identity_test(check).unwrap();
        let crit = stats::ks_critical_1pct(20_000, 20_000);
        assert!(r.ks_stat < crit + 0.01, "ks {}", r.ks_stat);
        assert!(r.mean_i.abs() < 4.0 * r.se_i);
        assert!(r.mean_comparison.abs() < 4.0 * r.se_comparison);
        assert!(r.ks_mirror < crit, "mirror ks {}", r.ks_mirror);
        assert!(r.scaled_mean() > SCALED_MEAN_FLOOR && r.scaled_mean() < scaled_mean_ceiling());
    }

    #[test]
    fn extra_resolutions_share_paths() {
        let check = BridgeCheck { paths: 1000, steps: 4, refine: 8, seed: 5, horizon: 2.0 };
        let (base, extra) = distribution_identity_study(check, &[4, 16]).unwrap();
        assert_eq!(extra[0].mean, base.scaled_mean());
        assert_eq!(extra[1].refine, 6);
        // same fine grid, so the direct run at (16, 6) sees the same paths
        let direct = distribution_identity_test(BridgeCheck { steps: 16, refine: 6, ..check }).unwrap();
        assert_eq!(extra[1].mean, direct.scaled_mean());
        assert!(distribution_identity_study(check, &[12]).is_err());
    }

    #[test]
    fn identity_preconditions() {
        let ok = BridgeCheck { paths: 1000, steps: 2, refine: 6, seed: 0, horizon: 1.0 };
        assert!(distribution_identity_test(BridgeCheck { paths: 999, ..ok }).is_err());
        assert!(distribution_identity_test(BridgeCheck { refine: 5, ..ok }).is_err());
        assert!(distribution_identity_test(ok).is_ok());
    }

    #[test]
    fn refinement_gap_halves_per_level() {
        let prof = refinement_profile(4, 11, 4000, 8, 1.0).unwrap();
        let pts: Vec<(f64, f64)> =
            prof.iter().filter(|p| (4..=10).contains(&p.0)).map(|p| (p.0 as f64, p.1.log2())).collect();
        let fit = stats::least_squares(&pts);
        assert!((fit.slope + 1.0).abs() <= 0.2, "slope {}", fit.slope);
    }

    #[test]
    fn ceiling_value() {
        assert!((scaled_mean_ceiling() - 0.325_735).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn bcirc_zero_at_knots_for_any_path(seed in any::<u64>(), n in 1usize..10, level in 0u32..5) {
            let coarse = make_grid(1.3, n).unwrap();
            let fine = make_grid(1.3, n << level).unwrap();
            let b = sample_path(&fine, seed, 0).b_knots();
            let ens = bridge_decompose(&b, &coarse, &fine).unwrap();
            for k in 0..=n {
                prop_assert_eq!(ens.bcirc[k << level], 0.0);
            }
        }
    }
}
