//! Standard-normal distribution functions and the quantile-derived constants
//! used by the stopping rules and interval constructions.
//!
//! `normal_cdf` is backed by the complementary error function from `libm`.
//! `normal_quantile` uses Wichura's AS241 rational approximation (PPND16)
//! followed by one Newton step against `normal_cdf`.

use std::fmt;

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};

/// A probability in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::domain(format!("probability must lie in [0, 1], got {value}")))
        }
    }

    /// Like [`Probability::new`] but rejects the endpoints.
    pub fn open(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Probability(value))
        } else {
            Err(Error::domain(format!("probability must lie in (0, 1), got {value}")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function Φ.
pub fn normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("normal_cdf needs a finite argument, got {x}")));
    }
    Ok(cdf(x))
}

#[inline]
fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

// AS241 PPND16 coefficients.
const A: [f64; 8] = [
    3.387_132_872_796_366_608,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_9,
    5.769_497_221_460_691_405_5,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_4,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103_777_2,
    5.463_784_911_164_114_369_9,
    1.784_826_539_917_291_335_8,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

#[inline]
fn horner(coeffs: &[f64; 8], r: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c)
}

fn ppnd16(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * horner(&A, r) / horner(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        horner(&C, r) / horner(&D, r)
    } else {
        r -= 5.0;
        horner(&E, r) / horner(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Inverse of the standard normal distribution function.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("normal_quantile needs p in (0, 1), got {p}")));
    }
    Ok(quantile(p))
}

fn quantile(p: f64) -> f64 {
    let x = ppnd16(p);
    // Newton polish. Above the median the residual is formed from upper tails,
    // where 1 - p is exact.
    let residual = if x > 0.0 {
        (1.0 - p) - cdf(-x)
    } else {
        cdf(x) - p
    };
    let density = normal_pdf(x);
    if density > 0.0 {
        x - residual / density
    } else {
        x
    }
}

/// Upper-tail quantile `z_a = Φ⁻¹(1 - a)`, computed as `-Φ⁻¹(a)` so small `a`
/// keeps full precision.
pub fn upper_quantile(a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::domain(format!("upper quantile needs a level in (0, 1), got {a}")));
    }
    Ok(-quantile(a))
}

/// `(1 - beta)` quantile of the maximum of `n` i.i.d. standard normals,
/// `Φ⁻¹((1 - beta)^(1/n))`.
pub fn max_normal_quantile(n: u64, beta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("max_normal_quantile needs n >= 1"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::domain(format!("max_normal_quantile needs beta in (0, 1), got {beta}")));
    }
    // upper tail 1 - (1 - beta)^(1/n) without forming a number near 1
    let tail = -((-beta).ln_1p() / n as f64).exp_m1();
    if tail <= 0.0 {
        return Err(Error::domain(format!("max_normal_quantile underflow for n = {n}, beta = {beta}")));
    }
    upper_quantile(tail)
}

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("level must lie in (0, 1), got {alpha}")))
    }
}

/// `K_α = ⌈log α / log Φ(-2)⌉`.
pub fn k_alpha(alpha: f64) -> Result<u32> {
    check_level(alpha)?;
    let ratio = alpha.ln() / cdf(-2.0).ln();
    Ok(ratio.ceil().max(0.0) as u32)
}

/// `K̃_α = max{4, 2 + ⌈log₂(2 + z_{α/3})⌉}`.
pub fn k_tilde_alpha(alpha: f64) -> Result<u32> {
    check_level(alpha)?;
    let z = upper_quantile(alpha / 3.0)?;
    let steps = (2.0 + z).log2().ceil() as i64;
    Ok((2 + steps).max(4) as u32)
}

/// Bundle of the quantile constants derived from one level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuantileConstants {
    pub z_alpha: f64,
    pub k_alpha: u32,
    pub k_tilde_alpha: u32,
}

impl QuantileConstants {
    pub fn new(alpha: f64) -> Result<Self> {
        Ok(QuantileConstants {
            z_alpha: upper_quantile(alpha)?,
            k_alpha: k_alpha(alpha)?,
            k_tilde_alpha: k_tilde_alpha(alpha)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Bisection on `normal_cdf` alone; independent of the AS241 path.
    fn bisect_quantile(p: f64) -> f64 {
        let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn cdf_reference_values() {
        assert_eq!(normal_cdf(0.0).unwrap(), 0.5);
        assert!((normal_cdf(-0.5).unwrap() - 0.3085).abs() < 5e-5);
        assert!((normal_cdf(-0.5).unwrap() - 0.308_537_538_725_986_9).abs() < 1e-12);
        assert!((normal_cdf(-2.0).unwrap() - 0.022_750_131_948_179_2).abs() < 1e-12);
        assert!(normal_cdf(f64::NAN).is_err());
        assert!(normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn quantile_reference_values() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        let z95 = normal_quantile(0.95).unwrap();
        assert!((z95 - bisect_quantile(0.95)).abs() < 1e-9);
        assert!((z95 - 1.644_854).abs() < 5e-7);
        let z = normal_quantile(0.995_833_3).unwrap();
        assert!((z - bisect_quantile(0.995_833_3)).abs() < 1e-9);
        assert!((z - 2.6383).abs() < 5e-5);
        for bad in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(normal_quantile(bad).is_err());
        }
    }

    #[test]
    fn quantile_residual_is_tiny() {
        for i in 1..2000 {
            let p = i as f64 / 2000.0;
            let x = normal_quantile(p).unwrap();
            assert!((cdf(x) - p).abs() <= 1e-12, "p = {p}");
        }
        for p in [1e-300, 1e-100, 1e-20, 1e-10, 1e-5] {
            let x = normal_quantile(p).unwrap();
            assert!(((cdf(x) - p) / p).abs() < 1e-10, "p = {p}");
            assert!((x - bisect_quantile(p)).abs() < 1e-9 * x.abs());
        }
    }

    #[test]
    fn round_trip_and_monotone() {
        let mut prev_cdf = -1.0;
        let mut prev_q = f64::NEG_INFINITY;
        for i in 0..=1000 {
            let x = -6.0 + 12.0 * i as f64 / 1000.0;
            let p = normal_cdf(x).unwrap();
            assert!(p > prev_cdf);
            prev_cdf = p;
            let back = normal_quantile(p).unwrap();
            assert!((back - x).abs() <= 1e-8, "x = {x}, back = {back}");

            let pp = (i as f64 + 0.5) / 1001.0;
            let q = normal_quantile(pp).unwrap();
            assert!(q > prev_q);
            prev_q = q;
        }
    }

    #[test]
    fn max_normal_quantile_values() {
        let s1 = max_normal_quantile(1, 0.05).unwrap();
        assert!((s1 - upper_quantile(0.05).unwrap()).abs() < 1e-14);
        assert!((s1 - 1.644_854).abs() < 5e-7);

        let s2 = max_normal_quantile(2, 0.05).unwrap();
        assert!((s2 - bisect_quantile(0.95_f64.sqrt())).abs() < 1e-9);
        assert!((s2 - 1.9545).abs() < 5e-5);

        let s = max_normal_quantile(1152, 0.0125).unwrap();
        assert!((s - 4.2452).abs() < 5e-5, "S = {s}");

        for (n, beta) in [(1_u64, 0.05), (7, 0.01), (1152, 0.0125), (2304, 0.0125), (1 << 20, 0.001)] {
            let s = max_normal_quantile(n, beta).unwrap();
            // Φ(S)^n = 1 - beta, via log of the upper tail
            let lhs = n as f64 * (-cdf(-s)).ln_1p();
            assert!((lhs - (-beta).ln_1p()).abs() < 1e-10, "n = {n}");
        }
        assert!(max_normal_quantile(0, 0.05).is_err());
        assert!(max_normal_quantile(3, 0.0).is_err());
    }

    #[test]
    fn max_normal_quantile_matches_simulation() {
        let n = 1152;
        let beta = 0.0125;
        let s = max_normal_quantile(n, beta).unwrap();
        let reps = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let below = (0..reps)
            .filter(|_| {
                (0..n)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .fold(f64::NEG_INFINITY, f64::max)
                    <= s
            })
            .count();
        let freq = below as f64 / reps as f64;
        let se = (beta * (1.0 - beta) / reps as f64).sqrt();
        assert!((freq - (1.0 - beta)).abs() < 3.0 * se, "freq = {freq}");
    }

    #[test]
    fn s_nondecreasing_in_n() {
        let mut prev = f64::NEG_INFINITY;
        for n in 1..500 {
            let s = max_normal_quantile(n, 0.05).unwrap();
            assert!(s >= prev);
            prev = s;
        }
    }

    #[test]
    fn k_constants() {
        assert_eq!(k_alpha(0.05).unwrap(), 1);
        assert_eq!(k_alpha(0.025).unwrap(), 1);
        assert_eq!(k_alpha(0.01).unwrap(), 2);
        assert_eq!(k_alpha(0.0125).unwrap(), 2);
        assert_eq!(k_tilde_alpha(0.0125).unwrap(), 5);
        assert_eq!(k_tilde_alpha(0.9).unwrap(), 4);
        assert_eq!(k_tilde_alpha(0.05).unwrap(), 5);
        for bad in [0.0, 1.0, -1.0, 2.0] {
            assert!(k_alpha(bad).is_err());
            assert!(k_tilde_alpha(bad).is_err());
        }
    }

    #[test]
    fn k_constants_nonincreasing() {
        let mut prev = (u32::MAX, u32::MAX);
        for i in 1..1000 {
            let a = i as f64 / 1000.0;
            let cur = (k_alpha(a).unwrap(), k_tilde_alpha(a).unwrap());
            assert!(cur.0 <= prev.0 && cur.1 <= prev.1, "alpha = {a}");
            assert!(cur.1 >= 4);
            prev = cur;
        }
    }

    #[test]
    fn z_alpha_decreasing() {
        let c = QuantileConstants::new(0.05).unwrap();
        assert_eq!(c.k_alpha, 1);
        let mut prev = f64::INFINITY;
        for i in 1..100 {
            let z = upper_quantile(i as f64 / 100.0).unwrap();
            assert!(z < prev);
            prev = z;
        }
    }

    #[test]
    fn probability_validation() {
        assert!(Probability::new(0.0).is_ok());
        assert!(Probability::new(1.0).is_ok());
        assert!(Probability::new(1.01).is_err());
        assert!(Probability::open(0.0).is_err());
        assert_eq!(Probability::open(0.05).unwrap().get(), 0.05);
        let p: Probability = serde_json::from_str("0.25").unwrap();
        assert_eq!(p.get(), 0.25);
        assert!(serde_json::from_str::<Probability>("1.5").is_err());
    }
}
