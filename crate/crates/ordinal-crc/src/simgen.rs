//! Simulated ordinal data: `K` bivariate Gaussian classes centred at
//! `(i, i)` with random covariances, scored by the exact Bayes posterior
//! under equal class priors.

use ordinal_crc_core::{LabeledScore, ScoreVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Added to `A·Aᵀ` so random covariances stay well conditioned.
pub const COVARIANCE_RIDGE: f64 = 0.25;

/// Derives an independent stream seed; splitmix64 finalizer.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianClassSpec {
    mean: [f64; 2],
    covariance: [[f64; 2]; 2],
}

impl GaussianClassSpec {
    /// Fails unless `covariance` is symmetric (within 1e-12) and positive
    /// definite.
    pub fn new(mean: [f64; 2], covariance: [[f64; 2]; 2]) -> Result<Self> {
        let [[a, b], [c, d]] = covariance;
        if (b - c).abs() > 1e-12 {
            return Err(Error::Config("covariance must be symmetric".into()));
        }
        if !(a > 0.0 && a * d - b * c > 0.0) {
            return Err(Error::Config("covariance must be positive definite".into()));
        }
        Ok(Self { mean, covariance })
    }

    pub fn mean(&self) -> [f64; 2] {
        self.mean
    }

    pub fn covariance(&self) -> [[f64; 2]; 2] {
        self.covariance
    }

    fn cholesky(&self) -> [[f64; 2]; 2] {
        let [[a, b], [_, d]] = self.covariance;
        let l00 = a.sqrt();
        let l10 = b / l00;
        let l11 = (d - l10 * l10).sqrt();
        [[l00, 0.0], [l10, l11]]
    }

    pub fn log_density(&self, point: [f64; 2]) -> f64 {
        let [[a, b], [_, d]] = self.covariance;
        let det = a * d - b * b;
        let dx = point[0] - self.mean[0];
        let dy = point[1] - self.mean[1];
        let quad = (d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
        -0.5 * quad - 0.5 * det.ln() - std::f64::consts::TAU.ln()
    }

    fn sample(&self, rng: &mut impl Rng) -> [f64; 2] {
        let l = self.cholesky();
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        [self.mean[0] + l[0][0] * z0, self.mean[1] + l[1][0] * z0 + l[1][1] * z1]
    }
}

/// Class `i` centred at `(i, i)` with covariance `A·Aᵀ + 0.25·I`, `A` a
/// seeded 2×2 standard normal matrix.
pub fn make_default_specs(classes: usize, seed: u64) -> Result<Vec<GaussianClassSpec>> {
    if classes < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {classes}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..classes)
        .map(|i| {
            let m: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            let (a, b, c, d) = (m[0], m[1], m[2], m[3]);
            let cov = [
                [a * a + b * b + COVARIANCE_RIDGE, a * c + b * d],
                [a * c + b * d, c * c + d * d + COVARIANCE_RIDGE],
            ];
            GaussianClassSpec::new([i as f64, i as f64], cov)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimPoint {
    pub point: [f64; 2],
    pub label: usize,
}

/// `n_per_class` draws from each class, class by class. Each class uses its
/// own seeded stream.
pub fn sample_dataset(specs: &[GaussianClassSpec], n_per_class: usize, seed: u64) -> Vec<SimPoint> {
    let mut out = Vec::with_capacity(specs.len() * n_per_class);
    for (label, spec) in specs.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, label as u64));
        out.extend((0..n_per_class).map(|_| SimPoint { point: spec.sample(&mut rng), label }));
    }
    out
}

/// Posterior over classes under equal priors.
pub fn bayes_posterior(point: [f64; 2], specs: &[GaussianClassSpec]) -> ScoreVector {
    tempered_posterior(point, specs, 1.0)
}

/// Softmax of log-densities divided by `temperature`; 1 gives the exact
/// posterior, larger values flatten it, smaller values sharpen it.
pub fn tempered_posterior(point: [f64; 2], specs: &[GaussianClassSpec], temperature: f64) -> ScoreVector {
    let logits: Vec<f64> = specs.iter().map(|s| s.log_density(point) / temperature).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    ScoreVector::new(weights.into_iter().map(|w| w / total).collect())
        .expect("softmax output is a probability vector")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub classes: usize,
    pub per_class: usize,
    pub seed: u64,
    pub temperature: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { classes: 10, per_class: 2000, seed: 7, temperature: 1.0 }
    }
}

/// Labeled posterior scores for a freshly sampled dataset. Specs and points
/// come from different streams of `seed`.
pub fn simulate(config: &SimConfig) -> Result<Vec<LabeledScore>> {
    if config.per_class == 0 {
        return Err(Error::Config("per-class count must be at least 1".into()));
    }
    if !(config.temperature > 0.0 && config.temperature.is_finite()) {
        return Err(Error::Config(format!("temperature must be positive, got {}", config.temperature)));
    }
    let specs = make_default_specs(config.classes, config.seed)?;
    let points = sample_dataset(&specs, config.per_class, stream_seed(config.seed, u64::MAX));
    points
        .into_iter()
        .map(|p| {
            let scores = tempered_posterior(p.point, &specs, config.temperature);
            LabeledScore::new(scores, p.label).map_err(Error::from)
        })
        .collect()
}
