//! Split-calibration experiments: repeated random calibration/test splits,
//! risk and set-size statistics, α sweeps and matching α to a target mean
//! set size.
//!
//! Per-row greedy chains do not depend on the split or on `α`, so a dataset
//! is prepared once and every trial reuses it. Trial `t` shuffles with a
//! stream derived from `(seed, t)`, so the same splits are shared by every
//! `α` in a sweep and results do not depend on the worker count.

use ordinal_crc_core::calibration::{
    calibrate_exact_prepared, jump_diagnostics_prepared, prepare, PreparedRow,
};
use ordinal_crc_core::{validate_dataset, LabeledScore, LossSpec, PredictionSet};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simgen::stream_seed;

/// Successive sweep points whose mean risk differs by less than this are
/// flagged as saturated.
pub const SATURATION_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub trials: usize,
    /// Fraction of rows used for calibration.
    pub split: f64,
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self { trials: 100, split: 0.5, seed: 0 }
    }
}

impl TrialConfig {
    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Config(format!("split must be in (0, 1), got {}", self.split)));
        }
        Ok(())
    }
}

/// Counts of prediction-set centroids `(l + u) / 2`; bucket `b` holds
/// centroid `b / 2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CentroidHistogram {
    pub counts: Vec<u64>,
}

impl CentroidHistogram {
    pub fn new(classes: usize) -> Self {
        Self { counts: vec![0; 2 * classes - 1] }
    }

    pub fn record(&mut self, set: &PredictionSet) {
        self.counts[set.centroid_x2()] += 1;
    }

    pub fn merge(&mut self, other: &CentroidHistogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(centroid, count)` for every bucket.
    pub fn buckets(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.counts.iter().enumerate().map(|(b, &c)| (b as f64 / 2.0, c))
    }

    pub fn mean(&self) -> f64 {
        let total = self.total() as f64;
        self.buckets().map(|(x, c)| x * c as f64).sum::<f64>() / total
    }

    /// Mean squared distance of the centroids from `center`.
    pub fn variance_about(&self, center: f64) -> f64 {
        let total = self.total() as f64;
        self.buckets().map(|(x, c)| (x - center).powi(2) * c as f64).sum::<f64>() / total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub alpha: f64,
    pub mean_risk: f64,
    /// Standard error of `mean_risk` across trials.
    pub risk_std_error: f64,
    pub risk_per_trial: Vec<f64>,
    pub mean_set_size: f64,
    /// `size_histogram[w]` counts test sets of width `w`; index 0 is unused.
    pub size_histogram: Vec<u64>,
    pub centroid_histogram: CentroidHistogram,
    pub lambda_hat_per_trial: Vec<f64>,
    /// Largest collision count `M` over the trials' calibration splits.
    pub max_collision: usize,
    pub n_calibration: usize,
    pub n_test: usize,
}

/// A dataset with greedy chains precomputed for one loss.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    rows: Vec<PreparedRow>,
    loss: LossSpec,
    classes: usize,
}

impl PreparedDataset {
    pub fn new(rows: &[LabeledScore], loss: &LossSpec) -> Result<Self> {
        let classes = validate_dataset(rows)?;
        let rows = prepare(rows, loss)?;
        Ok(Self { rows, loss: loss.clone(), classes })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn loss(&self) -> &LossSpec {
        &self.loss
    }

    pub fn rows(&self) -> &[PreparedRow] {
        &self.rows
    }

    fn split_sizes(&self, split: f64) -> Result<(usize, usize)> {
        let n_cal = (split * self.rows.len() as f64).round() as usize;
        let n_test = self.rows.len().saturating_sub(n_cal);
        if n_cal == 0 || n_test == 0 {
            return Err(Error::TooFewRows(format!(
                "{} rows give {n_cal} calibration and {n_test} test rows at split {split}",
                self.rows.len()
            )));
        }
        Ok((n_cal, n_test))
    }

    fn permutations(&self, config: &TrialConfig) -> Vec<Vec<usize>> {
        (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let mut idx: Vec<usize> = (0..self.rows.len()).collect();
                idx.shuffle(&mut ChaCha8Rng::seed_from_u64(stream_seed(config.seed, t as u64)));
                idx
            })
            .collect()
    }
}

struct TrialOutcome {
    lambda_hat: f64,
    risk: f64,
    sizes: Vec<u64>,
    centroids: CentroidHistogram,
    collision: usize,
}

fn run_trial(data: &PreparedDataset, alpha: f64, perm: &[usize], n_cal: usize) -> Result<TrialOutcome> {
    let cal: Vec<&PreparedRow> = perm[..n_cal].iter().map(|&i| &data.rows[i]).collect();
    let result = calibrate_exact_prepared(&cal, alpha, &data.loss)?;
    let collision = jump_diagnostics_prepared(&cal).max_collision;

    let mut sizes = vec![0; data.classes + 1];
    let mut centroids = CentroidHistogram::new(data.classes);
    let mut total_loss = 0.0;
    let test = &perm[n_cal..];
    for &i in test {
        let row = &data.rows[i];
        let set = row.set_at(result.lambda_hat);
        total_loss += row.loss_at(result.lambda_hat, &data.loss);
        sizes[set.width()] += 1;
        centroids.record(&set);
    }
    Ok(TrialOutcome {
        lambda_hat: result.lambda_hat,
        risk: total_loss / test.len() as f64,
        sizes,
        centroids,
        collision,
    })
}

fn aggregate(alpha: f64, data: &PreparedDataset, outcomes: Vec<TrialOutcome>, n_cal: usize, n_test: usize) -> RiskReport {
    let trials = outcomes.len() as f64;
    let risk_per_trial: Vec<f64> = outcomes.iter().map(|o| o.risk).collect();
    let mean_risk = risk_per_trial.iter().sum::<f64>() / trials;
    let risk_std_error = if outcomes.len() > 1 {
        let var = risk_per_trial.iter().map(|r| (r - mean_risk).powi(2)).sum::<f64>() / (trials - 1.0);
        (var / trials).sqrt()
    } else {
        0.0
    };
    let mut size_histogram = vec![0; data.classes + 1];
    let mut centroid_histogram = CentroidHistogram::new(data.classes);
    for o in &outcomes {
        for (a, b) in size_histogram.iter_mut().zip(&o.sizes) {
            *a += b;
        }
        centroid_histogram.merge(&o.centroids);
    }
    let predictions: u64 = size_histogram.iter().sum();
    let mean_set_size =
        size_histogram.iter().enumerate().map(|(w, &c)| (w as u64 * c) as f64).sum::<f64>() / predictions as f64;
    RiskReport {
        alpha,
        mean_risk,
        risk_std_error,
        lambda_hat_per_trial: outcomes.iter().map(|o| o.lambda_hat).collect(),
        max_collision: outcomes.iter().map(|o| o.collision).max().unwrap_or(0),
        risk_per_trial,
        mean_set_size,
        size_histogram,
        centroid_histogram,
        n_calibration: n_cal,
        n_test,
    }
}

fn run_with_permutations(
    data: &PreparedDataset,
    alpha: f64,
    perms: &[Vec<usize>],
    n_cal: usize,
    n_test: usize,
) -> Result<RiskReport> {
    let outcomes = perms
        .par_iter()
        .map(|perm| run_trial(data, alpha, perm, n_cal))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(alpha, data, outcomes, n_cal, n_test))
}

/// Repeated split calibration at level `alpha`.
pub fn run_trials(rows: &[LabeledScore], alpha: f64, loss: &LossSpec, config: &TrialConfig) -> Result<RiskReport> {
    run_trials_prepared(&PreparedDataset::new(rows, loss)?, alpha, config)
}

pub fn run_trials_prepared(data: &PreparedDataset, alpha: f64, config: &TrialConfig) -> Result<RiskReport> {
    config.validate()?;
    let (n_cal, n_test) = data.split_sizes(config.split)?;
    let perms = data.permutations(config);
    run_with_permutations(data, alpha, &perms, n_cal, n_test)
}

/// One report per `alpha`, all sharing the same trial splits.
pub fn sweep_alpha(rows: &[LabeledScore], alphas: &[f64], loss: &LossSpec, config: &TrialConfig) -> Result<Vec<RiskReport>> {
    sweep_alpha_prepared(&PreparedDataset::new(rows, loss)?, alphas, config)
}

pub fn sweep_alpha_prepared(data: &PreparedDataset, alphas: &[f64], config: &TrialConfig) -> Result<Vec<RiskReport>> {
    config.validate()?;
    let (n_cal, n_test) = data.split_sizes(config.split)?;
    let perms = data.permutations(config);
    alphas
        .iter()
        .map(|&alpha| run_with_permutations(data, alpha, &perms, n_cal, n_test))
        .collect()
}

/// Index of the first sweep point after which mean risk stops moving
/// (changes by less than [`SATURATION_TOLERANCE`] to the next point).
pub fn detect_saturation(reports: &[RiskReport]) -> Option<usize> {
    reports
        .windows(2)
        .position(|w| (w[1].mean_risk - w[0].mean_risk).abs() < SATURATION_TOLERANCE)
}

/// Bisects on `α` for a mean test set size within `tol` of `target_size`,
/// using the default split. Returns the closest `α` seen if the size
/// function jumps over the target.
pub fn alpha_for_target_size(
    rows: &[LabeledScore],
    loss: &LossSpec,
    target_size: f64,
    config: &TrialConfig,
    tol: f64,
) -> Result<f64> {
    alpha_for_target_size_prepared(&PreparedDataset::new(rows, loss)?, target_size, config, tol)
}

pub fn alpha_for_target_size_prepared(
    data: &PreparedDataset,
    target_size: f64,
    config: &TrialConfig,
    tol: f64,
) -> Result<f64> {
    config.validate()?;
    if !(1.0..=data.classes as f64).contains(&target_size) {
        return Err(Error::Config(format!("target size must be in [1, {}], got {target_size}", data.classes)));
    }
    let (n_cal, n_test) = data.split_sizes(config.split)?;
    let perms = data.permutations(config);
    let size_at = |alpha: f64| -> Result<f64> {
        Ok(run_with_permutations(data, alpha, &perms, n_cal, n_test)?.mean_set_size)
    };

    // Smallest α with a nonnegative budget; sets are largest there.
    let mut lo = (1.0 / (n_cal as f64 + 1.0)).next_up();
    let mut hi = 1.0_f64.next_down();
    let largest = size_at(lo)?;
    let smallest = size_at(hi)?;
    let mut best = if (largest - target_size).abs() <= (smallest - target_size).abs() {
        (lo, largest)
    } else {
        (hi, smallest)
    };
    if target_size > largest + tol || target_size < smallest - tol {
        return Err(Error::Unreachable { target: target_size, smallest, largest });
    }
    for _ in 0..60 {
        if (best.1 - target_size).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let size = size_at(mid)?;
        if (size - target_size).abs() < (best.1 - target_size).abs() {
            best = (mid, size);
        }
        if size > target_size {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best.0)
}

/// Centroids of the greedy sets at a fixed `lambda` over every row.
pub fn centroid_distribution(rows: &[LabeledScore], loss: &LossSpec, lambda: f64) -> Result<CentroidHistogram> {
    let data = PreparedDataset::new(rows, loss)?;
    let mut hist = CentroidHistogram::new(data.classes);
    for row in &data.rows {
        hist.record(&row.set_at(lambda));
    }
    Ok(hist)
}
