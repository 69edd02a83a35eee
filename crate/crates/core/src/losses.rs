//! Set-valued losses `L(y, [l, u])` and their conditional risks under a
//! score vector.
//!
//! Both families are normalized to `[0, 1]`:
//! the weight-based loss is `h(y)` when `y` falls outside the set, and the
//! divergence-based loss is `dist(y, [l, u]) / (K - 1)`.

use crate::error::{Error, Result};
use crate::types::{LossSpec, PredictionSet, ScoreVector, WeightScheme};

fn check_set(set: &PredictionSet, classes: usize) -> Result<()> {
    if set.upper() >= classes {
        return Err(Error::DimensionMismatch { expected: classes, found: set.upper() + 1 });
    }
    Ok(())
}

fn check_label(label: usize, classes: usize) -> Result<()> {
    if label >= classes {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    Ok(())
}

/// `h(y)` if `y` is outside `set`, else 0.
pub fn weighted_loss(label: usize, set: &PredictionSet, weights: &WeightScheme) -> Result<f64> {
    let classes = weights.classes();
    check_label(label, classes)?;
    check_set(set, classes)?;
    Ok(if set.contains(label) { 0.0 } else { weights.weight(label) })
}

/// Distance from `label` to `set`, divided by `K - 1`.
pub fn divergence_loss(label: usize, set: &PredictionSet, classes: usize) -> Result<f64> {
    if classes < 2 {
        return Err(Error::TooFewClasses { classes });
    }
    check_label(label, classes)?;
    check_set(set, classes)?;
    Ok(set.distance_to(label) as f64 / (classes - 1) as f64)
}

/// Loss of `set` for `label` under either family. Inputs must already be
/// validated against `classes`.
pub fn evaluate_loss(loss: &LossSpec, label: usize, set: &PredictionSet, classes: usize) -> f64 {
    match loss {
        LossSpec::Weighted { weights } => {
            if set.contains(label) {
                0.0
            } else {
                weights.weight(label)
            }
        }
        LossSpec::Divergence => set.distance_to(label) as f64 / (classes - 1) as f64,
    }
}

/// `Σ_{i∈[l,u]} h(i)·p(i)`, summed in increasing class order.
///
/// The greedy chain and the exhaustive oracles both go through this function
/// so their threshold comparisons agree bit-for-bit.
pub fn covered_weighted_mass(scores: &ScoreVector, weights: &WeightScheme, set: &PredictionSet) -> f64 {
    (set.lower()..=set.upper())
        .map(|i| weights.weight(i) * scores[i])
        .sum()
}

/// `D(x) - Σ_{i∈[l,u]} h(i)·p(i)` with `D(x) = Σ_i h(i)·p(i)`: the expected
/// weighted loss of `set` when the label is drawn from `scores`.
pub fn interval_risk_weighted(scores: &ScoreVector, weights: &WeightScheme, set: &PredictionSet) -> Result<f64> {
    let classes = scores.classes();
    if weights.classes() != classes {
        return Err(Error::DimensionMismatch { expected: classes, found: weights.classes() });
    }
    check_set(set, classes)?;
    // Summing the uncovered terms directly avoids cancellation in D - mass.
    let below: f64 = (0..set.lower()).map(|i| weights.weight(i) * scores[i]).sum();
    let above: f64 = (set.upper() + 1..classes).map(|i| weights.weight(i) * scores[i]).sum();
    Ok(below + above)
}

/// `(Σ_{i<l} (l-i)·p(i) + Σ_{i>u} (i-u)·p(i)) / (K - 1)`.
pub fn interval_risk_divergence(scores: &ScoreVector, set: &PredictionSet) -> Result<f64> {
    let classes = scores.classes();
    if classes < 2 {
        return Err(Error::TooFewClasses { classes });
    }
    check_set(set, classes)?;
    Ok(divergence_risk(scores.as_slice(), set))
}

pub(crate) fn divergence_risk(probs: &[f64], set: &PredictionSet) -> f64 {
    let classes = probs.len();
    if classes < 2 {
        return 0.0;
    }
    let (l, u) = (set.lower(), set.upper());
    let below: f64 = (0..l).map(|i| (l - i) as f64 * probs[i]).sum();
    let above: f64 = (u + 1..classes).map(|i| (i - u) as f64 * probs[i]).sum();
    (below + above) / (classes - 1) as f64
}
