//! Small statistics toolbox: sample moments, batch means, two-sample
//! Kolmogorov-Smirnov distance and least-squares lines.

use std::cmp::Ordering;

/// Number of batches used for batch-means standard errors.
pub const BATCHES: usize = 32;

/// Mean and standard error from the per-sample variance.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean and batch-means standard error: the sample is split into `batches`
/// contiguous, nearly equal blocks and the SE is `sd(block means) / sqrt(batches)`.
pub fn batch_mean_se(xs: &[f64], batches: usize) -> (f64, f64) {
    let n = xs.len();
    let batches = batches.min(n).max(1);
    let mean = xs.iter().sum::<f64>() / n as f64;
    if batches < 2 {
        return (mean, f64::NAN);
    }
    let block_means: Vec<f64> = (0..batches)
        .map(|b| {
            let (lo, hi) = (b * n / batches, (b + 1) * n / batches);
            xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let (_, se) = mean_se(&block_means);
    (mean, se)
}

/// Unbiased sample variance and its standard error from the fourth central
/// moment, `se^2 = (m4 - (n-3)/(n-1) s^4) / n`.
pub fn variance_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in xs {
        let d2 = (x - mean) * (x - mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    let s2 = m2 / (n - 1.0);
    let m4 = m4 / n;
    (s2, ((m4 - (n - 3.0) / (n - 1.0) * s2 * s2) / n).max(0.0).sqrt())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    v
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_x - F_y|`. Ties across
/// samples are stepped over together.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> f64 {
    assert!(!xs.is_empty() && !ys.is_empty(), "empty sample");
    let (xs, ys) = (sorted(xs), sorted(ys));
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / nx - j as f64 / ny).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level 1%.
pub fn ks_critical_1pct(n: usize, m: usize) -> f64 {
    const C_ALPHA: f64 = 1.628;
    C_ALPHA * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Ordinary least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn least_squares(points: &[(f64, f64)]) -> LineFit {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LineFit { slope, intercept: my - slope * mx, r_squared }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ks_known_values() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        // F_x jumps to 1/2 at 1, F_y still 0 -> 1/2
        assert_eq!(ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]), 0.5);
        assert_eq!(ks_two_sample(&[0.0, 0.0, 1.0, 1.0], &[0.0, 1.0]), 0.0);
    }

    /// Brute force: evaluate both ECDFs at every pooled point.
    fn ks_brute(xs: &[f64], ys: &[f64]) -> f64 {
        let ecdf = |s: &[f64], t: f64| s.iter().filter(|&&v| v <= t).count() as f64 / s.len() as f64;
        xs.iter()
            .chain(ys)
            .map(|&t| (ecdf(xs, t) - ecdf(ys, t)).abs())
            .fold(0.0, f64::max)
    }

    proptest! {
        #[test]
        fn ks_matches_brute_force_and_is_symmetric(
            xs in proptest::collection::vec(-5i32..5, 1..40),
            ys in proptest::collection::vec(-5i32..5, 1..40),
        ) {
            let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
            let ys: Vec<f64> = ys.into_iter().map(f64::from).collect();
            let d = ks_two_sample(&xs, &ys);
            prop_assert!((d - ks_brute(&xs, &ys)).abs() < 1e-15);
            prop_assert_eq!(d, ks_two_sample(&ys, &xs));
        }
    }

    #[test]
    fn line_fit_exact() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, 2.0 - 0.5 * i as f64)).collect();
        let f = least_squares(&pts);
        assert!((f.slope + 0.5).abs() < 1e-15);
        assert!((f.intercept - 2.0).abs() < 1e-15);
        assert!((f.r_squared - 1.0).abs() < 1e-15);
    }

    #[test]
    fn batch_means() {
        let xs: Vec<f64> = (0..64).map(|i| (i % 2) as f64).collect();
        let (m, se) = batch_mean_se(&xs, 32);
        assert_eq!(m, 0.5);
        assert_eq!(se, 0.0);
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
        assert!((ks_critical_1pct(100_000, 100_000) - 0.00728).abs() < 1e-5);
        let (v, se) = variance_se(&[1.0, 3.0, 1.0, 3.0]);
        assert!((v - 4.0 / 3.0).abs() < 1e-15);
        assert!((se - (11.0f64 / 108.0).sqrt()).abs() < 1e-15);
    }
}
