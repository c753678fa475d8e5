//! Photon-count statistics and the deterministic random-number contract.
//!
//! Every stochastic draw in the simulator comes from a [`SeededStream`]:
//! a counter-based generator addressed by `(seed, stream id, counter)`.
//! Draws depend only on that triple, so independent streams can be
//! consumed on any number of workers in any order and still reproduce
//! bit-identical results.

use crate::error::{Error, Result};
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Outcome of one fluorescence detection window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Bright,
    Dark,
}

/// Poisson photon-count model with threshold readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluorescenceParams {
    /// Mean photon count per window when the ion fluoresces.
    pub lambda_bright: f64,
    /// Mean photon count per window when it does not.
    pub lambda_dark: f64,
    /// Counts >= threshold classify as Bright.
    pub threshold: u32,
}

impl FluorescenceParams {
    pub fn new(lambda_bright: f64, lambda_dark: f64, threshold: u32) -> Result<Self> {
        if !(lambda_bright > lambda_dark) || lambda_dark < 0.0 {
            return Err(Error::ConfigError(alloc::format!(
                "fluorescence rates require lambda_bright > lambda_dark >= 0, got {lambda_bright} and {lambda_dark}"
            )));
        }
        if threshold < 1 {
            return Err(Error::ConfigError("threshold must be >= 1".into()));
        }
        Ok(FluorescenceParams { lambda_bright, lambda_dark, threshold })
    }
}

impl Default for FluorescenceParams {
    fn default() -> Self {
        FluorescenceParams { lambda_bright: 10.0, lambda_dark: 1.0, threshold: 3 }
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer: a bijective avalanche mix.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic counter-based random stream.
///
/// Draw `i` of stream `s` under seed `k` is
/// `mix64(key(k, s) + GOLDEN * i)`, so dropping or cloning a stream never
/// perturbs any other stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeededStream {
    key: u64,
    counter: u64,
    seed: u64,
    stream: u64,
}

impl SeededStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let key = mix64(seed ^ mix64(stream.wrapping_mul(GOLDEN) ^ 0x6A09_E667_F3BC_C909));
        SeededStream { key, counter: 0, seed, stream }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = mix64(self.key.wrapping_add(GOLDEN.wrapping_mul(self.counter)));
        self.counter += 1;
        v
    }

    /// Uniform draw in [0, 1) with 53-bit resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in (0, 1]; safe as a log/Box-Muller argument.
    pub fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Box-Muller; consumes exactly two raw draws).
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (core::f64::consts::TAU * u2).cos()
    }
}

/// Poisson draw by CDF inversion; consumes exactly one raw draw.
pub fn sample_poisson(lambda: f64, rng: &mut SeededStream) -> u32 {
    debug_assert!(lambda >= 0.0 && lambda.is_finite());
    if lambda == 0.0 {
        rng.next_u64(); // keep the per-sample draw budget fixed
        return 0;
    }
    let u = rng.next_f64();
    let mut pmf = (-lambda).exp();
    let mut cdf = pmf;
    let mut k = 0u32;
    // cap far past any realistic tail so the walk always terminates
    let cap = (lambda + 60.0 * lambda.sqrt() + 60.0) as u32;
    while u > cdf && k < cap {
        k += 1;
        pmf *= lambda / k as f64;
        cdf += pmf;
    }
    k
}

/// One photon-count sample for a bright or dark detection window.
pub fn sample_photon_count(bright: bool, fp: &FluorescenceParams, rng: &mut SeededStream) -> u32 {
    let lambda = if bright { fp.lambda_bright } else { fp.lambda_dark };
    sample_poisson(lambda, rng)
}

/// Threshold classification of a photon count.
pub fn classify(count: u32, fp: &FluorescenceParams) -> Outcome {
    if count >= fp.threshold {
        Outcome::Bright
    } else {
        Outcome::Dark
    }
}

/// Poisson pmf values for k = 0..=k_max, computed iteratively.
pub(crate) fn poisson_pmf_table(lambda: f64, k_max: u32) -> alloc::vec::Vec<f64> {
    let mut table = alloc::vec::Vec::with_capacity(k_max as usize + 1);
    let mut pmf = (-lambda).exp();
    table.push(pmf);
    for k in 1..=k_max {
        pmf *= lambda / k as f64;
        table.push(pmf);
    }
    table
}

/// Exact misclassification probabilities of the threshold readout:
/// `(P(bright window reads Dark), P(dark window reads Bright))`.
pub fn discrimination_error(fp: &FluorescenceParams) -> (f64, f64) {
    let head = |lambda: f64| -> f64 {
        if lambda == 0.0 {
            return 1.0;
        }
        poisson_pmf_table(lambda, fp.threshold - 1).iter().sum()
    };
    let eps_bright_as_dark = head(fp.lambda_bright);
    let eps_dark_as_bright = 1.0 - head(fp.lambda_dark);
    (eps_bright_as_dark, eps_dark_as_bright)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_dark_rate_always_zero_counts() {
        let fp = FluorescenceParams::new(10.0, 0.0, 1).unwrap();
        let mut rng = SeededStream::new(1, 0);
        for _ in 0..1000 {
            assert_eq!(sample_photon_count(false, &fp, &mut rng), 0);
        }
        let (_, eps_db) = discrimination_error(&fp);
        assert_eq!(eps_db, 0.0);
    }

    #[test]
    fn poisson_sample_mean_matches_rate() {
        let fp = FluorescenceParams::default();
        let mut rng = SeededStream::new(7, 3);
        let n = 100_000u32;
        let sum: u64 = (0..n).map(|_| sample_photon_count(true, &fp, &mut rng) as u64).sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 10.0).abs() < 0.1, "sample mean {mean}");
    }

    #[test]
    fn same_seed_and_stream_reproduce_draws() {
        let mut a = SeededStream::new(42, 5);
        let mut b = SeededStream::new(42, 5);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = SeededStream::new(42, 6);
        assert_ne!(a.next_u64(), c.next_u64());
    }

    #[test]
    fn classify_boundaries() {
        let fp = FluorescenceParams::default();
        assert_eq!(classify(0, &fp), Outcome::Dark);
        assert_eq!(classify(fp.threshold - 1, &fp), Outcome::Dark);
        assert_eq!(classify(fp.threshold, &fp), Outcome::Bright);
        // monotone in count
        let mut last_bright = false;
        for c in 0..20 {
            let bright = classify(c, &fp) == Outcome::Bright;
            assert!(bright >= last_bright);
            last_bright = bright;
        }
    }

    #[test]
    fn discrimination_error_reference_values() {
        let fp = FluorescenceParams::default();
        let (eps_bd, eps_db) = discrimination_error(&fp);
        // Poisson head/tail sums evaluated in closed form
        let expect_db = 1.0 - (-1.0_f64).exp() * (1.0 + 1.0 + 0.5);
        let expect_bd = (-10.0_f64).exp() * (1.0 + 10.0 + 50.0);
        assert!((eps_db - expect_db).abs() < 1e-15);
        assert!((eps_bd - expect_bd).abs() < 1e-15);
        assert!((eps_db - 0.0803).abs() < 1e-4);
        assert!((eps_bd - 2.77e-3).abs() < 1e-5);
    }

    #[test]
    fn empirical_misclassification_matches_analytic() {
        let fp = FluorescenceParams::default();
        let (eps_bd, eps_db) = discrimination_error(&fp);
        let n = 1_000_000u32;
        let mut rng = SeededStream::new(2024, 0);
        let mut bd = 0u32;
        let mut db = 0u32;
        for _ in 0..n {
            if classify(sample_photon_count(true, &fp, &mut rng), &fp) == Outcome::Dark {
                bd += 1;
            }
            if classify(sample_photon_count(false, &fp, &mut rng), &fp) == Outcome::Bright {
                db += 1;
            }
        }
        let check = |emp: u32, eps: f64| {
            let sigma = (eps * (1.0 - eps) / n as f64).sqrt();
            let dev = (emp as f64 / n as f64 - eps).abs();
            assert!(dev <= 5.0 * sigma, "deviation {dev} vs 5 sigma {}", 5.0 * sigma);
        };
        check(bd, eps_bd);
        check(db, eps_db);
    }

    #[test]
    fn distinct_streams_uncorrelated() {
        let mut a = SeededStream::new(11, 0);
        let mut b = SeededStream::new(11, 1);
        let n = 100_000;
        let xs: alloc::vec::Vec<f64> = (0..n).map(|_| a.next_f64()).collect();
        let ys: alloc::vec::Vec<f64> = (0..n).map(|_| b.next_f64()).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mx, my) = (mean(&xs), mean(&ys));
        let mut cov = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        for i in 0..n {
            cov += (xs[i] - mx) * (ys[i] - my);
            vx += (xs[i] - mx).powi(2);
            vy += (ys[i] - my).powi(2);
        }
        let r = cov / (vx.sqrt() * vy.sqrt());
        assert!(r.abs() < 0.01, "cross-correlation {r}");
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = SeededStream::new(5, 9);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let g = rng.next_gaussian();
            sum += g;
            sq += g * g;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.02);
    }
}
