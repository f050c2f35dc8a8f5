//! Equidistant grids, driving Brownian paths and coarse/fine coupling.
//!
//! Increments are rounded to a lattice of spacing 2^-40. Every partial sum of
//! lattice values of moderate size is exact in `f64`, so aggregating fine
//! increments onto a coarse grid telescopes bit-for-bit and the order of
//! summation never matters.

use crate::error::{LabError, Result};
use crate::rng::{Channel, PathRng};

/// Spacing of the increment lattice.
pub const LATTICE: f64 = 1.0 / (1u64 << 40) as f64;

/// `1.5 * 2^52`: adding and subtracting it rounds to the nearest integer for
/// magnitudes below 2^51, much cheaper than `f64::round` on baseline x86-64.
const ROUNDER: f64 = 6755399441055744.0;

#[inline]
fn to_lattice(x: f64) -> f64 {
    let y = x * (1u64 << 40) as f64;
    debug_assert!(y.abs() < (1u64 << 51) as f64);
    ((y + ROUNDER) - ROUNDER) * LATTICE
}

/// Equidistant grid `t_k = k T / N`, `k = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(LabError::InvalidGrid("step count must be at least 1".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(LabError::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        Ok(TimeGrid { horizon, steps, dt: horizon / steps as f64 })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `t_k`; the last knot is exactly the horizon.
    pub fn knot(&self, k: usize) -> f64 {
        debug_assert!(k <= self.steps);
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    pub fn knots(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.knot(k)).collect()
    }

    /// `n(t) = max{k : t_k <= t}`, clamped to `0..=N`.
    pub fn index_of(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        let mut k = ((t / self.dt).floor() as usize).min(self.steps);
        while k > 0 && self.knot(k) > t {
            k -= 1;
        }
        while k < self.steps && self.knot(k + 1) <= t {
            k += 1;
        }
        k
    }

    /// `eta(t) = t_{n(t)}`, the last knot at or before `t`.
    pub fn eta(&self, t: f64) -> f64 {
        self.knot(self.index_of(t))
    }

    /// Ratio `fine.steps / self.steps` when `fine` refines this grid.
    pub fn refinement_ratio(&self, fine: &TimeGrid) -> Result<usize> {
        let nested = fine.steps.is_multiple_of(self.steps)
            && ((fine.horizon - self.horizon).abs() <= 1e-12 * self.horizon);
        if nested {
            Ok(fine.steps / self.steps)
        } else {
            Err(LabError::NotNested { coarse: self.steps, fine: fine.steps })
        }
    }

    /// Dyadic refinement level `n` with `fine.steps = self.steps * 2^n`.
    pub fn dyadic_level(&self, fine: &TimeGrid) -> Result<u32> {
        let ratio = self.refinement_ratio(fine)?;
        if ratio.is_power_of_two() {
            Ok(ratio.trailing_zeros())
        } else {
            Err(LabError::NotNested { coarse: self.steps, fine: fine.steps })
        }
    }
}

pub fn make_grid(horizon: f64, steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(horizon, steps)
}

/// Increments of the two independent drivers `W` and `B` on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub grid: TimeGrid,
    pub dw: Vec<f64>,
    pub db: Vec<f64>,
    pub seed_id: u64,
}

impl PathBundle {
    /// `W_{t_k}`, `k = 0..=N`, starting at 0.
    pub fn w_knots(&self) -> Vec<f64> {
        cumulative(&self.dw)
    }

    pub fn b_knots(&self) -> Vec<f64> {
        cumulative(&self.db)
    }
}

/// Lattice Gaussian increments with variance `dt` for one channel of one path.
pub fn brownian_increments(grid: &TimeGrid, seed: u64, seed_id: u64, channel: Channel) -> Vec<f64> {
    let mut rng = PathRng::new(seed, seed_id, channel);
    let sd = grid.dt().sqrt();
    (0..grid.steps()).map(|_| to_lattice(sd * rng.normal())).collect()
}

/// The bundle for path `seed_id`: a pure function of `(grid, seed, seed_id)`.
pub fn sample_path(grid: &TimeGrid, seed: u64, seed_id: u64) -> PathBundle {
    PathBundle {
        grid: *grid,
        dw: brownian_increments(grid, seed, seed_id, Channel::W),
        db: brownian_increments(grid, seed, seed_id, Channel::B),
        seed_id,
    }
}

/// Bundles for path ids `0..path_count`, in order.
pub fn sample_paths(grid: TimeGrid, path_count: u64, seed: u64) -> impl Iterator<Item = PathBundle> {
    (0..path_count).map(move |id| sample_path(&grid, seed, id))
}

/// Prefix sums with a leading zero.
pub fn cumulative(increments: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(increments.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for &d in increments {
        acc += d;
        out.push(acc);
    }
    out
}

/// Sums consecutive blocks of `increments.len() / coarse_steps` values.
pub fn coarsen(increments: &[f64], coarse_steps: usize) -> Result<Vec<f64>> {
    if coarse_steps == 0 || !increments.len().is_multiple_of(coarse_steps) {
        return Err(LabError::NotNested { coarse: coarse_steps, fine: increments.len() });
    }
    let ratio = increments.len() / coarse_steps;
    Ok(increments.chunks_exact(ratio).map(|c| c.iter().sum()).collect())
}

/// Aggregates the bundle's increments onto a grid with `coarse_steps` steps.
pub fn coarsen_increments(bundle: &PathBundle, coarse_steps: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((coarsen(&bundle.dw, coarse_steps)?, coarsen(&bundle.db, coarse_steps)?))
}

/// Increments of `Z = rho W + sqrt(1 - rho^2) B`.
pub fn correlate(bundle: &PathBundle, rho: f64) -> Vec<f64> {
    let perp = (1.0 - rho * rho).max(0.0).sqrt();
    bundle.dw.iter().zip(&bundle.db).map(|(w, b)| rho * w + perp * b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_examples() {
        let g = make_grid(1.0, 4).unwrap();
        assert_eq!(g.knots(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.eta(0.3), 0.25);
        for k in 0..=4 {
            assert_eq!(g.eta(g.knot(k)), g.knot(k));
        }
        assert!(make_grid(1.0, 0).is_err());
        assert!(make_grid(0.0, 4).is_err());
        assert!(make_grid(-1.0, 4).is_err());
    }

    #[test]
    fn awkward_horizon_keeps_exact_endpoint() {
        let g = make_grid(0.7, 3).unwrap();
        assert_eq!(g.knot(3), 0.7);
        let k = g.knots();
        assert!(k.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(g.index_of(0.7), 3);
        assert_eq!(g.index_of(g.knot(1)), 1);
    }

    #[test]
    fn nesting() {
        let c = make_grid(1.0, 8).unwrap();
        assert_eq!(c.refinement_ratio(&make_grid(1.0, 24).unwrap()).unwrap(), 3);
        assert!(c.dyadic_level(&make_grid(1.0, 24).unwrap()).is_err());
        assert_eq!(c.dyadic_level(&make_grid(1.0, 64).unwrap()).unwrap(), 3);
        assert!(c.refinement_ratio(&make_grid(1.0, 12).unwrap()).is_err());
        assert!(c.refinement_ratio(&make_grid(2.0, 16).unwrap()).is_err());
    }

    #[test]
    fn paths_are_deterministic_per_id() {
        let g = make_grid(1.0, 64).unwrap();
        let a = sample_path(&g, 9, 123);
        let b = sample_path(&g, 9, 123);
        assert_eq!(a, b);
        let from_stream: Vec<_> = sample_paths(g, 5, 9).collect();
        assert_eq!(from_stream[3], sample_path(&g, 9, 3));
        assert_ne!(from_stream[3].dw, from_stream[4].dw);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.dw), bits(&b.dw));
    }

    #[test]
    fn ensemble_moments_of_terminal_values() {
        // W_T and B_T over 1e5 paths on a coarse grid
        let g = make_grid(1.0, 4).unwrap();
        let m = 100_000usize;
        let (mut sw, mut sw2, mut sw4, mut swb, mut sb2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for p in sample_paths(g, m as u64, 2024) {
            let w: f64 = p.dw.iter().sum();
            let b: f64 = p.db.iter().sum();
            sw += w;
            sw2 += w * w;
            sw4 += w.powi(4);
            swb += w * b;
            sb2 += b * b;
        }
        let mf = m as f64;
        let mean = sw / mf;
        assert!(mean.abs() < 3.0 * (1.0 / mf).sqrt(), "mean {mean}");
        let var = sw2 / mf - mean * mean;
        // SE of the variance estimator from the sample fourth moment
        let se_var = ((sw4 / mf - (sw2 / mf).powi(2)) / mf).sqrt();
        assert!((var - 1.0).abs() < 3.0 * se_var, "var {var} se {se_var}");
        // cross covariance of independent drivers, SE = sqrt(E[W^2 B^2]/M) = 1/sqrt(M)
        assert!((swb / mf).abs() < 4.0 / mf.sqrt());
        assert!((sb2 / mf - 1.0).abs() < 4.0 * (2.0 / mf).sqrt());
    }

    #[test]
    fn increment_mean_and_variance() {
        let g = make_grid(2.0, 16).unwrap();
        let m = 100_000;
        let dt = g.dt();
        let (mut s, mut s2, mut n) = (0.0, 0.0, 0.0);
        for p in sample_paths(g, m, 5) {
            let d = p.dw[7];
            s += d;
            s2 += d * d;
            n += 1.0;
        }
        let mean = s / n;
        assert!(mean.abs() < 4.0 * (dt / n).sqrt());
        // Var of d^2 for Gaussian is 2 dt^2
        assert!((s2 / n - dt).abs() < 4.0 * (2.0 * dt * dt / n).sqrt());
    }

    #[test]
    fn coarsening_examples() {
        let g = make_grid(1.0, 8).unwrap();
        let bundle = sample_path(&g, 1, 1);
        let (w, b) = coarsen_increments(&bundle, 8).unwrap();
        assert_eq!((w, b), (bundle.dw.clone(), bundle.db.clone()));

        let h = 0.125;
        let flat = PathBundle { grid: g, dw: vec![h; 8], db: vec![-h; 8], seed_id: 0 };
        let (w, b) = coarsen_increments(&flat, 2).unwrap();
        assert_eq!(w, vec![4.0 * h; 2]);
        assert_eq!(b, vec![-4.0 * h; 2]);

        assert!(coarsen_increments(&bundle, 3).is_err());
        assert!(coarsen_increments(&bundle, 0).is_err());
    }

    #[test]
    fn correlate_limits() {
        let g = make_grid(1.0, 32).unwrap();
        let p = sample_path(&g, 3, 0);
        assert_eq!(correlate(&p, 0.0), p.db);
        assert_eq!(correlate(&p, 1.0), p.dw);
        let neg: Vec<f64> = p.dw.iter().map(|x| -x).collect();
        assert_eq!(correlate(&p, -1.0), neg);
    }

    #[test]
    fn correlation_of_terminal_values() {
        let g = make_grid(1.0, 2).unwrap();
        let m = 100_000;
        let rho = 0.6;
        let mut xs = Vec::with_capacity(m);
        for p in sample_paths(g, m as u64, 77) {
            let z: f64 = correlate(&p, rho).iter().sum();
            let w: f64 = p.dw.iter().sum();
            xs.push((z, w));
        }
        let n = m as f64;
        let (mz, mw) = xs.iter().fold((0.0, 0.0), |a, (z, w)| (a.0 + z / n, a.1 + w / n));
        let (mut szz, mut sww, mut szw) = (0.0, 0.0, 0.0);
        for (z, w) in &xs {
            szz += (z - mz).powi(2);
            sww += (w - mw).powi(2);
            szw += (z - mz) * (w - mw);
        }
        let r = szw / (szz * sww).sqrt();
        // SE of a sample correlation: (1 - r^2) / sqrt(M)
        let se = (1.0 - rho * rho) / n.sqrt();
        assert!((r - rho).abs() < 3.0 * se, "r = {r}");
    }

    proptest! {
        #[test]
        fn coarse_cumulative_sums_agree_bitwise(seed in any::<u64>(), log_fine in 3u32..9, shift in 0u32..3) {
            let fine = 1usize << log_fine;
            let coarse = fine >> shift.min(log_fine);
            let g = make_grid(1.0, fine).unwrap();
            let p = sample_path(&g, seed, seed % 1000);
            let (w, _) = coarsen_increments(&p, coarse).unwrap();
            let fine_cum = cumulative(&p.dw);
            let coarse_cum = cumulative(&w);
            let r = fine / coarse;
            for k in 0..=coarse {
                prop_assert_eq!(coarse_cum[k].to_bits(), fine_cum[k * r].to_bits());
            }
        }

        #[test]
        fn coarsening_composes(seed in any::<u64>(), a in 0u32..3, b in 0u32..3) {
            let fine = 256usize;
            let mid = fine >> a;
            let coarse = mid >> b;
            let g = make_grid(1.5, fine).unwrap();
            let p = sample_path(&g, seed, 1);
            let two_step = coarsen(&coarsen(&p.db, mid).unwrap(), coarse).unwrap();
            let direct = coarsen(&p.db, coarse).unwrap();
            prop_assert_eq!(two_step, direct);
        }
    }
}
