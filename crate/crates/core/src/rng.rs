//! Counter-addressable random streams.
//!
//! Every variate is addressed by `(seed, path_id, channel, index)`. A stream
//! for one `(seed, path_id, channel)` triple is a ChaCha8 keystream with the
//! stream id derived from `(path_id, channel)`; the `index`-th uniform sits at
//! a fixed word position, so it can be computed without generating its
//! predecessors. Results are therefore independent of thread count and
//! scheduling.
//!
//! Gaussians come from the inverse normal CDF (Wichura's AS241), one uniform
//! per Gaussian.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent sub-streams of one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Channel {
    /// Driver of the variance (and correlated part of the price).
    W = 0,
    /// Independent price driver.
    B = 1,
    /// Auxiliary draws: exact CIR sampling, external Gaussians.
    Aux = 2,
    Aux2 = 3,
}

const CHANNEL_BITS: u32 = 4;

/// Uniform/Gaussian stream for one `(seed, path_id, channel)`.
#[derive(Debug, Clone)]
pub struct PathRng {
    inner: ChaCha8Rng,
}

impl PathRng {
    pub fn new(seed: u64, path_id: u64, channel: Channel) -> Self {
        debug_assert!(path_id < (1 << (64 - CHANNEL_BITS)));
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream((path_id << CHANNEL_BITS) | channel as u64);
        PathRng { inner }
    }

    /// Stream positioned so that the next uniform is the `index`-th one.
    pub fn at(seed: u64, path_id: u64, channel: Channel, index: u64) -> Self {
        let mut rng = Self::new(seed, path_id, channel);
        // one uniform consumes one u64 = two 32-bit words
        rng.inner.set_word_pos(2 * index as u128);
        rng
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        u64_to_open_unit(self.inner.next_u64())
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        inverse_normal_cdf(self.uniform())
    }

    pub fn fill_normal(&mut self, out: &mut [f64], scale: f64) {
        for x in out {
            *x = scale * self.normal();
        }
    }
}

impl RngCore for PathRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[inline]
fn u64_to_open_unit(x: u64) -> f64 {
    // midpoints of a 2^-52 lattice: never 0, never 1
    ((x >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Quantile function of the standard normal distribution, accurate to about
/// 1e-16 relative (AS241, PPND16). Returns `-inf`/`+inf` at 0/1.
#[allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]
pub fn inverse_normal_cdf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((r * 2509.080_928_730_122_7 + 33430.575_583_588_128) * r
                + 67265.770_927_008_7)
                * r
                + 45921.953_931_549_87)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_4)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((r * 5226.495_278_852_545_6 + 28729.085_735_721_943) * r
                + 39307.895_800_092_71)
                * r
                + 21213.794_301_586_597)
                * r
                + 5394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((r * 7.745_450_142_783_414e-4 + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((r * 1.050_750_071_644_416_9e-9 + 5.475_938_084_995_345e-4) * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_08)
                * r
                + 0.689_767_334_985_1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((r * 2.010_334_399_292_288_1e-7 + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((r * 2.044_263_103_389_939_7e-15 + 1.421_511_758_316_446e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_888)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    // Quantiles frozen from a 40-digit evaluation of sqrt(2) erfinv(2p - 1).
    const QUANTILES: [(f64, f64); 17] = [
        (1e-300, -37.047096299361199237),
        (1e-20, -9.2623400897984075737),
        (1e-10, -6.3613409024040562047),
        (1e-5, -4.2648907939228246285),
        (0.0005, -3.2905267314918947932),
        (0.01, -2.3263478740408411009),
        (0.02425, -1.9729610513118848503),
        (0.07, -1.4757910281791707352),
        (0.074, -1.4466320671589784837),
        (0.2, -0.84162123357291420518),
        (0.3, -0.52440051270804078404),
        (0.5, 0.0),
        (0.6, 0.2533471031357997988),
        (0.9, 1.281551565544600467),
        (0.975, 1.9599639845400542355),
        (0.99, 2.3263478740408411009),
        (0.999999, 4.7534243088228989482),
    ];

    #[test]
    fn inverse_cdf_against_frozen_quantiles() {
        for (p, x) in QUANTILES {
            let got = inverse_normal_cdf(p);
            // representation error of p itself propagates through 1 / pdf(x)
            let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let tol = 4.0 * f64::EPSILON * x.abs().max(1.0) + f64::EPSILON * p / pdf.max(1e-300);
            assert!((got - x).abs() <= tol, "p={p}: {got} vs {x}");
        }
        assert_eq!(inverse_normal_cdf(0.0), f64::NEG_INFINITY);
        assert_eq!(inverse_normal_cdf(1.0), f64::INFINITY);
    }

    #[test]
    fn inverse_cdf_is_odd_and_monotone() {
        let mut prev = f64::NEG_INFINITY;
        for i in 1..10_000 {
            let p = i as f64 / 10_000.0;
            let x = inverse_normal_cdf(p);
            assert!(x > prev);
            prev = x;
            assert!((x + inverse_normal_cdf(1.0 - p)).abs() < 1e-12);
        }
    }

    #[test]
    fn random_access_matches_sequential() {
        let mut seq = PathRng::new(42, 7, Channel::B);
        let draws: Vec<f64> = (0..100).map(|_| seq.uniform()).collect();
        for idx in [0u64, 1, 17, 63, 64, 99] {
            let mut direct = PathRng::at(42, 7, Channel::B, idx);
            assert_eq!(direct.uniform(), draws[idx as usize]);
        }
    }

    #[test]
    fn streams_differ_by_path_channel_and_seed() {
        let a = PathRng::new(1, 0, Channel::W).uniform();
        assert_ne!(a, PathRng::new(1, 1, Channel::W).uniform());
        assert_ne!(a, PathRng::new(1, 0, Channel::B).uniform());
        assert_ne!(a, PathRng::new(2, 0, Channel::W).uniform());
        assert_eq!(a, PathRng::new(1, 0, Channel::W).uniform());
    }

    #[test]
    fn uniforms_open_interval() {
        assert!(u64_to_open_unit(0) > 0.0);
        assert!(u64_to_open_unit(u64::MAX) < 1.0);
    }
}
