//! Nested interval prediction sets.
//!
//! For a fixed score vector the greedy construction grows an interval one
//! class at a time, starting from the point prediction, until it covers all
//! `K` classes. The resulting chain of `K` nested intervals is λ-independent;
//! a threshold `λ` just picks the first (smallest) chain element that meets
//! the constraint:
//!
//! * weight-based: `1 - Σ_{i∈[l,u]} h(i)·p(i) <= λ`, falling back to the full
//!   range when the total weighted mass cannot reach `1 - λ`;
//! * divergence-based: `R(l, u) <= λ`, where `R` is the normalized divergence
//!   risk.
//!
//! Larger `λ` gives smaller sets.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::losses::{covered_weighted_mass, divergence_risk};
use crate::types::{LossSpec, PredictionSet, ScoreVector, WeightScheme};

/// What the per-step statistic of a [`GreedyChain`] measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainStatistic {
    /// Covered weighted mass `Σ h(i)·p(i)`; non-decreasing along the chain.
    CoveredMass,
    /// Normalized divergence risk `R(l, u)`; non-increasing along the chain.
    ResidualRisk,
}

/// The `K` nested intervals produced by the greedy construction, from the
/// point-prediction singleton to the full range.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyChain {
    steps: Vec<PredictionSet>,
    stats: Vec<f64>,
    statistic: ChainStatistic,
}

impl GreedyChain {
    pub fn steps(&self) -> &[PredictionSet] {
        &self.steps
    }

    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    pub fn statistic(&self) -> ChainStatistic {
        self.statistic
    }

    pub fn classes(&self) -> usize {
        self.steps.len()
    }

    pub fn point_prediction(&self) -> usize {
        self.steps[0].lower()
    }

    /// Smallest `λ` at which step `j` satisfies its constraint.
    pub fn threshold(&self, j: usize) -> f64 {
        match self.statistic {
            ChainStatistic::CoveredMass => 1.0 - self.stats[j],
            ChainStatistic::ResidualRisk => self.stats[j],
        }
    }

    /// Index of the first step whose threshold is `<= lambda`, or the last
    /// step (full range) when none qualifies.
    pub fn index_at(&self, lambda: f64) -> usize {
        (0..self.steps.len())
            .find(|&j| self.threshold(j) <= lambda)
            .unwrap_or(self.steps.len() - 1)
    }

    pub fn select(&self, lambda: f64) -> PredictionSet {
        self.steps[self.index_at(lambda)]
    }
}

fn argmax_smallest(values: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    values.enumerate().fold(None, |best, (i, v)| match best {
        Some((_, bv)) if v <= bv => best,
        _ => Some((i, v)),
    })
}

fn check_weights(scores: &ScoreVector, weights: &WeightScheme) -> Result<()> {
    if weights.classes() != scores.classes() {
        return Err(Error::DimensionMismatch { expected: scores.classes(), found: weights.classes() });
    }
    Ok(())
}

fn weighted_argmax(scores: &ScoreVector, weights: &WeightScheme) -> Result<usize> {
    check_weights(scores, weights)?;
    match argmax_smallest((0..scores.classes()).map(|i| weights.weight(i) * scores[i])) {
        Some((i, v)) if v > 0.0 => Ok(i),
        _ => Err(Error::NoPointPrediction),
    }
}

/// Point prediction `ŷ`: argmax of `h(i)·p(i)` for the weighted family,
/// argmax of `p(i)` for the divergence family. Ties go to the smaller class.
pub fn point_prediction(scores: &ScoreVector, loss: &LossSpec) -> Result<usize> {
    match loss {
        LossSpec::Weighted { weights } => weighted_argmax(scores, weights),
        LossSpec::Divergence => Ok(argmax_smallest(scores.as_slice().iter().copied())
            .map(|(i, _)| i)
            .unwrap_or(0)),
    }
}

/// Greedy chain for the weight-based loss.
///
/// Each step extends toward the neighbor with the larger `h(i)·p(i)`; on a
/// tie the upper end grows. Missing neighbors count as `-∞`.
pub fn weighted_chain(scores: &ScoreVector, weights: &WeightScheme) -> Result<GreedyChain> {
    let yhat = weighted_argmax(scores, weights)?;
    let classes = scores.classes();
    let s: Vec<f64> = (0..classes).map(|i| weights.weight(i) * scores[i]).collect();

    let mut steps = Vec::with_capacity(classes);
    let mut stats = Vec::with_capacity(classes);
    let (mut l, mut u) = (yhat, yhat);
    loop {
        let set = PredictionSet::new(l, u).expect("l <= u");
        steps.push(set);
        stats.push(covered_weighted_mass(scores, weights, &set));
        if l == 0 && u + 1 == classes {
            break;
        }
        let left = if l > 0 { s[l - 1] } else { f64::NEG_INFINITY };
        let right = if u + 1 < classes { s[u + 1] } else { f64::NEG_INFINITY };
        if left > right {
            l -= 1;
        } else {
            u += 1;
        }
    }
    Ok(GreedyChain { steps, stats, statistic: ChainStatistic::CoveredMass })
}

/// Greedy chain for the divergence-based loss.
///
/// Growing the lower end by one class lowers the unnormalized risk by
/// `head(l-1) = Σ_{i<l} p(i)`; growing the upper end lowers it by
/// `tail(u+1) = Σ_{i>u} p(i)`. Each step takes the larger reduction, the
/// lower end on a tie.
pub fn divergence_chain(scores: &ScoreVector) -> GreedyChain {
    let probs = scores.as_slice();
    let classes = probs.len();
    let yhat = argmax_smallest(probs.iter().copied()).map(|(i, _)| i).unwrap_or(0);

    // head[j] = Σ_{i<=j} p(i), tail[j] = Σ_{i>=j} p(i)
    let mut head = Vec::with_capacity(classes);
    let mut acc = 0.0;
    for &p in probs {
        acc += p;
        head.push(acc);
    }
    let mut tail = alloc::vec![0.0; classes];
    let mut acc = 0.0;
    for j in (0..classes).rev() {
        acc += probs[j];
        tail[j] = acc;
    }

    let mut steps = Vec::with_capacity(classes);
    let mut stats = Vec::with_capacity(classes);
    let (mut l, mut u) = (yhat, yhat);
    loop {
        let set = PredictionSet::new(l, u).expect("l <= u");
        steps.push(set);
        stats.push(divergence_risk(probs, &set));
        if l == 0 && u + 1 == classes {
            break;
        }
        let lower_gain = if l > 0 { head[l - 1] } else { f64::NEG_INFINITY };
        let upper_gain = if u + 1 < classes { tail[u + 1] } else { f64::NEG_INFINITY };
        if lower_gain >= upper_gain {
            l -= 1;
        } else {
            u += 1;
        }
    }
    GreedyChain { steps, stats, statistic: ChainStatistic::ResidualRisk }
}

/// Greedy chain for whichever loss family `loss` selects.
pub fn chain(scores: &ScoreVector, loss: &LossSpec) -> Result<GreedyChain> {
    loss.check_classes(scores.classes())?;
    match loss {
        LossSpec::Weighted { weights } => weighted_chain(scores, weights),
        LossSpec::Divergence => Ok(divergence_chain(scores)),
    }
}

/// Smallest greedy set with `1 - Σ_{i∈[l,u]} h(i)·p(i) <= λ`, or the full
/// range if no chain element reaches it.
pub fn build_weighted_set(scores: &ScoreVector, weights: &WeightScheme, lambda: f64) -> Result<PredictionSet> {
    Ok(weighted_chain(scores, weights)?.select(lambda))
}

/// Smallest greedy set with `R(l, u) <= λ`.
pub fn build_divergence_set(scores: &ScoreVector, lambda: f64) -> PredictionSet {
    divergence_chain(scores).select(lambda)
}

pub fn build_set(scores: &ScoreVector, loss: &LossSpec, lambda: f64) -> Result<PredictionSet> {
    Ok(chain(scores, loss)?.select(lambda))
}

fn all_intervals(classes: usize) -> impl Iterator<Item = PredictionSet> {
    (0..classes).flat_map(move |l| (l..classes).map(move |u| PredictionSet::new(l, u).expect("l <= u")))
}

/// Narrowest interval whose expected weighted loss under the (true) posterior
/// is at most `alpha`, i.e. covered mass `>= D(x) - α`.
///
/// Exhaustive over all intervals. Ties: larger covered mass, then containing
/// the point prediction, then smaller lower end.
pub fn oracle_weighted_set(posterior: &ScoreVector, weights: &WeightScheme, alpha: f64) -> Result<PredictionSet> {
    check_weights(posterior, weights)?;
    let classes = posterior.classes();
    let total = covered_weighted_mass(posterior, weights, &PredictionSet::full(classes));
    let target = total - alpha;
    let yhat = weighted_argmax(posterior, weights).ok();

    let mut best: Option<(PredictionSet, f64)> = None;
    for set in all_intervals(classes) {
        let mass = covered_weighted_mass(posterior, weights, &set);
        if mass < target {
            continue;
        }
        let better = match best {
            None => true,
            Some((b, bm)) => {
                let covers = |s: &PredictionSet| yhat.is_some_and(|y| s.contains(y));
                (set.width(), -mass, !covers(&set), set.lower()) < (b.width(), -bm, !covers(&b), b.lower())
            }
        };
        if better {
            best = Some((set, mass));
        }
    }
    // The full range always qualifies: its mass equals `total`.
    Ok(best.map(|(s, _)| s).unwrap_or(PredictionSet::full(classes)))
}

/// Narrowest interval with normalized divergence risk at most `alpha`.
/// Ties: smaller risk, then smaller lower end.
pub fn oracle_divergence_set(posterior: &ScoreVector, alpha: f64) -> PredictionSet {
    let probs = posterior.as_slice();
    let mut best: Option<(PredictionSet, f64)> = None;
    for set in all_intervals(probs.len()) {
        let risk = divergence_risk(probs, &set);
        if risk > alpha {
            continue;
        }
        let better = match best {
            None => true,
            Some((b, br)) => (set.width(), risk, set.lower()) < (b.width(), br, b.lower()),
        };
        if better {
            best = Some((set, risk));
        }
    }
    best.map(|(s, _)| s).unwrap_or(PredictionSet::full(probs.len()))
}
