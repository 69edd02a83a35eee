//! Domain types shared by every module: score vectors, interval prediction
//! sets, class weights and the loss family selector.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Score vectors whose sum is within this distance of 1 are renormalized.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-4;

/// Per-example class probabilities over `K` ordered classes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<f64>", into = "Vec<f64>"))]
pub struct ScoreVector {
    probs: Vec<f64>,
}

impl ScoreVector {
    /// Validates and, when the total is within [`RENORMALIZE_TOLERANCE`] of 1,
    /// renormalizes the scores so they sum to 1.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::validated(probs, None)
    }

    /// Like [`ScoreVector::new`], reporting `row` in errors.
    pub fn for_row(probs: Vec<f64>, row: usize) -> Result<Self> {
        Self::validated(probs, Some(row))
    }

    fn validated(mut probs: Vec<f64>, row: Option<usize>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidScore { row, reason: "no classes" });
        }
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidScore { row, reason: "non-finite probability" });
        }
        if probs.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidScore { row, reason: "negative probability" });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(Error::InvalidScore { row, reason: "probabilities do not sum to 1" });
        }
        if total != 1.0 {
            for p in &mut probs {
                *p /= total;
            }
        }
        Ok(Self { probs })
    }

    pub fn classes(&self) -> usize {
        self.probs.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }
}

impl TryFrom<Vec<f64>> for ScoreVector {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<ScoreVector> for Vec<f64> {
    fn from(scores: ScoreVector) -> Self {
        scores.probs
    }
}

impl core::ops::Index<usize> for ScoreVector {
    type Output = f64;

    fn index(&self, class: usize) -> &f64 {
        &self.probs[class]
    }
}

/// A contiguous run of classes `{lower, ..., upper}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictionSet {
    lower: usize,
    upper: usize,
}

impl PredictionSet {
    /// Returns `None` unless `lower <= upper`.
    pub fn new(lower: usize, upper: usize) -> Option<Self> {
        (lower <= upper).then_some(Self { lower, upper })
    }

    pub fn singleton(class: usize) -> Self {
        Self { lower: class, upper: class }
    }

    /// `[0, classes - 1]`. `classes` must be nonzero.
    pub fn full(classes: usize) -> Self {
        debug_assert!(classes > 0);
        Self { lower: 0, upper: classes - 1 }
    }

    pub fn lower(&self) -> usize {
        self.lower
    }

    pub fn upper(&self) -> usize {
        self.upper
    }

    pub fn width(&self) -> usize {
        self.upper - self.lower + 1
    }

    /// Midpoint doubled, `lower + upper`, so half-integer centroids stay exact.
    pub fn centroid_x2(&self) -> usize {
        self.lower + self.upper
    }

    pub fn centroid(&self) -> f64 {
        self.centroid_x2() as f64 / 2.0
    }

    pub fn contains(&self, class: usize) -> bool {
        self.lower <= class && class <= self.upper
    }

    pub fn is_subset_of(&self, other: &PredictionSet) -> bool {
        other.lower <= self.lower && self.upper <= other.upper
    }

    pub fn is_full(&self, classes: usize) -> bool {
        self.lower == 0 && self.upper + 1 == classes
    }

    /// Distance from `class` to the nearest member; 0 when covered.
    pub fn distance_to(&self, class: usize) -> usize {
        if class < self.lower {
            self.lower - class
        } else {
            class.saturating_sub(self.upper)
        }
    }
}

/// Per-class loss weights `h(i)`, max-normalized to 1.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<f64>", into = "Vec<f64>"))]
pub struct WeightScheme {
    weights: Vec<f64>,
}

impl WeightScheme {
    /// Divides by the largest weight. Fails on empty input, negative or
    /// non-finite entries, or all-zero weights.
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidWeights("no classes"));
        }
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights("weights must be finite and nonnegative"));
        }
        let max = raw.iter().copied().fold(0.0_f64, f64::max);
        if max <= 0.0 {
            return Err(Error::InvalidWeights("at least one weight must be positive"));
        }
        let weights = raw.into_iter().map(|w| w / max).collect();
        Ok(Self { weights })
    }

    /// All classes weighted 1; the loss is plain miscoverage.
    pub fn equal(classes: usize) -> Self {
        Self { weights: alloc::vec![1.0; classes] }
    }

    /// `h(i) = i`, normalized so `h(K-1) = 1`. Class 0 gets weight 0.
    /// Needs at least two classes.
    pub fn linear(classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::TooFewClasses { classes });
        }
        Self::new((0..classes).map(|i| i as f64).collect())
    }

    /// Weight `factor` on classes in `lo..=hi`, 1 elsewhere, then normalized.
    pub fn boosted(classes: usize, lo: usize, hi: usize, factor: f64) -> Result<Self> {
        if lo > hi || hi >= classes {
            return Err(Error::InvalidWeights("boosted class range out of bounds"));
        }
        Self::new((0..classes).map(|i| if (lo..=hi).contains(&i) { factor } else { 1.0 }).collect())
    }

    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, class: usize) -> f64 {
        self.weights[class]
    }
}

impl TryFrom<Vec<f64>> for WeightScheme {
    type Error = Error;

    fn try_from(raw: Vec<f64>) -> Result<Self> {
        Self::new(raw)
    }
}

impl From<WeightScheme> for Vec<f64> {
    fn from(w: WeightScheme) -> Self {
        w.weights
    }
}

/// Which set-valued loss is being controlled.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum LossSpec {
    Weighted { weights: WeightScheme },
    Divergence,
}

impl LossSpec {
    pub fn weighted(weights: WeightScheme) -> Self {
        LossSpec::Weighted { weights }
    }

    /// Upper bound `B` on the loss. Both families are normalized to `[0, 1]`.
    pub fn bound(&self) -> f64 {
        crate::LOSS_BOUND
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Weighted { .. } => "weighted",
            LossSpec::Divergence => "divergence",
        }
    }

    /// Checks the loss is usable with `classes` classes.
    pub fn check_classes(&self, classes: usize) -> Result<()> {
        match self {
            LossSpec::Weighted { weights } if weights.classes() != classes => {
                Err(Error::DimensionMismatch { expected: classes, found: weights.classes() })
            }
            LossSpec::Divergence if classes < 2 => Err(Error::TooFewClasses { classes }),
            _ => Ok(()),
        }
    }
}

/// Scores and ground-truth label for one calibration or test example.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabeledScore {
    pub scores: ScoreVector,
    pub label: usize,
}

impl LabeledScore {
    pub fn new(scores: ScoreVector, label: usize) -> Result<Self> {
        if label >= scores.classes() {
            return Err(Error::LabelOutOfRange { label, classes: scores.classes() });
        }
        Ok(Self { scores, label })
    }

    /// Builds a row from raw probabilities; `row` is reported in errors.
    pub fn from_raw(probs: Vec<f64>, label: usize, row: usize) -> Result<Self> {
        let scores = ScoreVector::validated(probs, Some(row))?;
        Self::new(scores, label)
    }

    pub fn classes(&self) -> usize {
        self.scores.classes()
    }
}

/// Returns the common class count `K` of a nonempty dataset.
pub fn validate_dataset(rows: &[LabeledScore]) -> Result<usize> {
    let first = rows.first().ok_or(Error::EmptyDataset)?;
    let classes = first.classes();
    for (i, row) in rows.iter().enumerate() {
        if row.classes() != classes {
            return Err(Error::InconsistentClassCount { row: i, expected: classes, found: row.classes() });
        }
        if row.label >= classes {
            return Err(Error::LabelOutOfRange { label: row.label, classes });
        }
    }
    Ok(classes)
}
