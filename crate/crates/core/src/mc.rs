//! Reproducible Gaussian sampling and estimator statistics.
//!
//! Draw `i` of stream `k` under seed `s` is a pure function of `(s, k, i)`:
//! the uniform comes from a ChaCha20 keystream positioned at word `2i`, and
//! the normal from the inverse CDF. Work is split into fixed-size chunks and
//! merged in chunk order, so every result is independent of the thread count.

use std::f64::consts::SQRT_2;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use statrs::function::erf::erfc_inv;

use crate::error::{IndiffError, Result};

/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.5758293;

/// Samples per parallel work unit.
pub const CHUNK_SIZE: usize = 1024;

/// Floor applied to max-shifted exponents before exponentiation.
pub const EXP_FLOOR: f64 = -700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_samples: usize,
    pub seed: u64,
    /// Independent repetitions, used by variance studies only.
    pub n_replications: usize,
    /// Pair draw `2j` with `2j + 1 = -(2j)`.
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_samples: 10_000,
            seed: 0,
            n_replications: 1,
            antithetic: false,
        }
    }
}

impl McConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        McConfig {
            n_samples,
            seed,
            ..McConfig::default()
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        McConfig { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(IndiffError::InvalidParameter {
                name: "n_samples",
                value: self.n_samples as f64,
                reason: "n_samples >= 2 required",
            });
        }
        if self.n_replications < 1 {
            return Err(IndiffError::InvalidParameter {
                name: "n_replications",
                value: 0.0,
                reason: "n_replications >= 1 required",
            });
        }
        Ok(())
    }
}

/// A Monte Carlo estimate with its 99% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorResult {
    pub mean: f64,
    pub std_error: f64,
    pub ci99: (f64, f64),
    pub n: usize,
    pub seed: u64,
}

impl EstimatorResult {
    pub fn new(mean: f64, std_error: f64, n: usize, seed: u64) -> Self {
        let half = Z99 * std_error;
        EstimatorResult {
            mean,
            std_error,
            ci99: (mean - half, mean + half),
            n,
            seed,
        }
    }

    /// A zero-variance "estimate".
    pub fn exact(value: f64, n: usize, seed: u64) -> Self {
        EstimatorResult::new(value, 0.0, n, seed)
    }

    pub fn with_seed(self, seed: u64) -> Self {
        EstimatorResult { seed, ..self }
    }

    /// Estimator variance, `std_error²`.
    pub fn variance(&self) -> f64 {
        self.std_error * self.std_error
    }

    /// The estimate of `x + offset` where `offset` is known exactly.
    pub fn shifted(&self, offset: f64) -> Self {
        EstimatorResult::new(self.mean + offset, self.std_error, self.n, self.seed)
    }

    pub fn negated(&self) -> Self {
        EstimatorResult::new(-self.mean, self.std_error, self.n, self.seed)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci99.0 <= x && x <= self.ci99.1
    }
}

/// Single-pass mean and variance (Welford), mergeable with Chan's formula.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += d * w;
        self.m2 += other.m2 + d * d * self.n as f64 * w;
        self.n = n;
    }

    /// Statistics of `values`, accumulated per chunk and merged in order.
    pub fn from_slice(values: &[f64]) -> RunningStats {
        let parts: Vec<RunningStats> = values
            .par_chunks(CHUNK_SIZE)
            .map(|chunk| {
                let mut s = RunningStats::default();
                chunk.iter().for_each(|&x| s.push(x));
                s
            })
            .collect();
        parts.iter().fold(RunningStats::default(), |mut acc, p| {
            acc.merge(p);
            acc
        })
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two points.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.std_dev() / (self.n as f64).sqrt()
        }
    }
}

/// Maps the top 53 bits of `x` to the open interval `(0, 1)`.
pub fn uniform_from_bits(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal quantile.
pub fn normal_quantile(u: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * u)
}

/// Sequential standard normals from one position of a counter-based stream.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha20Rng,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        NormalStream::at(seed, stream, 0)
    }

    /// Stream positioned so that the next draw is draw number `index`.
    pub fn at(seed: u64, stream: u64, index: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng.set_word_pos(2 * index as u128);
        NormalStream { rng }
    }

    pub fn next_uniform(&mut self) -> f64 {
        uniform_from_bits(self.rng.next_u64())
    }

    pub fn next_normal(&mut self) -> f64 {
        normal_quantile(self.next_uniform())
    }
}

/// `config.n_samples` standard normals from stream 0 of `config.seed`.
pub fn sample_normals(config: &McConfig) -> Result<Vec<f64>> {
    config.validate()?;
    Ok(normals_from_stream(config, 0))
}

pub(crate) fn normals_from_stream(config: &McConfig, stream: u64) -> Vec<f64> {
    let n = config.n_samples;
    let n_chunks = n.div_ceil(CHUNK_SIZE);
    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK_SIZE;
            let len = CHUNK_SIZE.min(n - start);
            if config.antithetic {
                // CHUNK_SIZE is even, so every chunk starts on a pair.
                let mut gen = NormalStream::at(config.seed, stream, (start / 2) as u64);
                let mut out = Vec::with_capacity(len);
                while out.len() < len {
                    let z = gen.next_normal();
                    out.push(z);
                    if out.len() < len {
                        out.push(-z);
                    }
                }
                out
            } else {
                let mut gen = NormalStream::at(config.seed, stream, start as u64);
                (0..len).map(|_| gen.next_normal()).collect()
            }
        })
        .collect();
    chunks.concat()
}

/// Estimates `scale · ln((1/n) Σ e^{t_i})`.
///
/// The exponents are shifted by their maximum before exponentiation, and the
/// standard error follows from the delta method:
/// `|scale| · sd(e^t) / (√n · mean(e^t))`.
pub fn log_mean_exp_price(terms: &[f64], scale: f64) -> Result<EstimatorResult> {
    if terms.is_empty() {
        return Err(IndiffError::Degenerate("no samples"));
    }
    if !scale.is_finite() {
        return Err(IndiffError::NonFinite {
            name: "scale",
            value: scale,
        });
    }
    let mut shift = f64::NEG_INFINITY;
    for &t in terms {
        if t.is_nan() || t == f64::INFINITY {
            return Err(IndiffError::NonFinite {
                name: "exponent",
                value: t,
            });
        }
        shift = shift.max(t);
    }
    if shift == f64::NEG_INFINITY {
        return Err(IndiffError::Degenerate("every exponent is -inf"));
    }
    let weights: Vec<f64> = terms
        .par_iter()
        .map(|&t| {
            if t == f64::NEG_INFINITY {
                0.0
            } else {
                (t - shift).max(EXP_FLOOR).exp()
            }
        })
        .collect();
    let stats = RunningStats::from_slice(&weights);
    let n = terms.len();
    let mean = scale * (shift + stats.mean().ln());
    let std_error = scale.abs() * stats.std_dev() / ((n as f64).sqrt() * stats.mean());
    Ok(EstimatorResult::new(mean, std_error, n, 0))
}

/// Plain sample mean with its standard error.
pub fn mean_estimate(values: &[f64]) -> Result<EstimatorResult> {
    if values.len() < 2 {
        return Err(IndiffError::Degenerate("fewer than two samples"));
    }
    let stats = RunningStats::from_slice(values);
    if !stats.mean().is_finite() {
        return Err(IndiffError::NonFinite {
            name: "sample mean",
            value: stats.mean(),
        });
    }
    Ok(EstimatorResult::new(
        stats.mean(),
        stats.std_error(),
        values.len(),
        0,
    ))
}

/// SplitMix64 finaliser, used to derive child seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent re-runs of an estimator with derived seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub estimates: Vec<EstimatorResult>,
    pub mean: f64,
    /// Sample variance of the estimates across replications.
    pub variance: f64,
}

pub fn replicate<F>(config: &McConfig, estimator: F) -> Result<ReplicationSummary>
where
    F: Fn(&McConfig) -> Result<EstimatorResult> + Sync,
{
    config.validate()?;
    let estimates = (0..config.n_replications as u64)
        .into_par_iter()
        .map(|k| {
            let child = McConfig {
                seed: splitmix64(config.seed.wrapping_add(k)),
                n_replications: 1,
                ..*config
            };
            estimator(&child)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut stats = RunningStats::default();
    estimates.iter().for_each(|e| stats.push(e.mean));
    Ok(ReplicationSummary {
        mean: stats.mean(),
        variance: stats.variance(),
        estimates,
    })
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}
