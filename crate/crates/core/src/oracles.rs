//! Brute-force references for validating the greedy sets and calibration.
//!
//! Everything here is exhaustive and slow on purpose: interval search over
//! all `O(K²)` intervals, enumeration of every nested chain from the point
//! prediction to the full range, and a dense λ-grid scan for calibration.

use alloc::vec::Vec;

use crate::calibration::risk_budget;
use crate::error::{Error, Result};
use crate::losses::{covered_weighted_mass, divergence_risk, evaluate_loss};
use crate::sets::{chain, point_prediction};
use crate::types::{validate_dataset, LabeledScore, LossSpec, PredictionSet, ScoreVector};

/// Largest `K` accepted by [`enumerate_chains`].
pub const MAX_ENUMERATION_CLASSES: usize = 12;
/// Largest `K` accepted by [`verify_non_domination`].
pub const MAX_DOMINATION_CLASSES: usize = 8;

/// Every nested chain of intervals that grows one endpoint per step from
/// `[ŷ, ŷ]` to `[0, K-1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedChainFamily {
    pub chains: Vec<Vec<PredictionSet>>,
}

impl NestedChainFamily {
    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }
}

pub fn enumerate_chains(classes: usize, yhat: usize) -> Result<NestedChainFamily> {
    if classes > MAX_ENUMERATION_CLASSES {
        return Err(Error::TooManyClasses { classes, max: MAX_ENUMERATION_CLASSES });
    }
    if yhat >= classes {
        return Err(Error::LabelOutOfRange { label: yhat, classes });
    }
    let mut chains = Vec::new();
    let mut path = Vec::with_capacity(classes);
    path.push(PredictionSet::singleton(yhat));
    extend(classes, &mut path, &mut chains);
    Ok(NestedChainFamily { chains })
}

fn extend(classes: usize, path: &mut Vec<PredictionSet>, out: &mut Vec<Vec<PredictionSet>>) {
    let last = *path.last().expect("nonempty path");
    if last.is_full(classes) {
        out.push(path.clone());
        return;
    }
    if last.lower() > 0 {
        path.push(PredictionSet::new(last.lower() - 1, last.upper()).expect("l <= u"));
        extend(classes, path, out);
        path.pop();
    }
    if last.upper() + 1 < classes {
        path.push(PredictionSet::new(last.lower(), last.upper() + 1).expect("l <= u"));
        extend(classes, path, out);
        path.pop();
    }
}

/// The λ-constraint of the loss family, evaluated directly:
/// `1 - Σ_{[l,u]} h·p <= λ` or `R(l, u) <= λ`.
pub fn satisfies_constraint(scores: &ScoreVector, loss: &LossSpec, set: &PredictionSet, lambda: f64) -> bool {
    constraint_value(scores, loss, set) <= lambda
}

fn constraint_value(scores: &ScoreVector, loss: &LossSpec, set: &PredictionSet) -> f64 {
    match loss {
        LossSpec::Weighted { weights } => 1.0 - covered_weighted_mass(scores, weights, set),
        LossSpec::Divergence => divergence_risk(scores.as_slice(), set),
    }
}

/// Width of the first element of `chain` meeting the λ-constraint, or `K`.
pub fn chain_width_at(chain: &[PredictionSet], scores: &ScoreVector, loss: &LossSpec, lambda: f64) -> usize {
    chain
        .iter()
        .find(|s| satisfies_constraint(scores, loss, s, lambda))
        .map_or(scores.classes(), PredictionSet::width)
}

/// All intervals `l <= ŷ <= u` that meet the λ-constraint.
pub fn feasible_intervals(scores: &ScoreVector, loss: &LossSpec, lambda: f64) -> Result<Vec<PredictionSet>> {
    let yhat = point_prediction(scores, loss)?;
    let classes = scores.classes();
    Ok((0..=yhat)
        .flat_map(|l| (yhat..classes).map(move |u| PredictionSet::new(l, u).expect("l <= u")))
        .filter(|s| satisfies_constraint(scores, loss, s, lambda))
        .collect())
}

/// Every λ at which some chain's width can change: 0, 1 and each chain
/// element's constraint value inside `[0, 1]`.
fn breakpoint_grid(scores: &ScoreVector, loss: &LossSpec, family: &NestedChainFamily) -> Vec<f64> {
    let mut grid: Vec<f64> = family
        .chains
        .iter()
        .flatten()
        .map(|s| constraint_value(scores, loss, s))
        .filter(|v| (0.0..=1.0).contains(v))
        .chain([0.0, 1.0])
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// A nested chain that is never wider than the greedy chain on the pooled
/// breakpoint grid and strictly narrower somewhere, if one exists.
pub fn find_dominating_chain(scores: &ScoreVector, loss: &LossSpec) -> Result<Option<Vec<PredictionSet>>> {
    let classes = scores.classes();
    if classes > MAX_DOMINATION_CLASSES {
        return Err(Error::TooManyClasses { classes, max: MAX_DOMINATION_CLASSES });
    }
    let greedy = chain(scores, loss)?;
    let family = enumerate_chains(classes, greedy.point_prediction())?;
    let grid = breakpoint_grid(scores, loss, &family);
    let greedy_widths: Vec<usize> =
        grid.iter().map(|&lambda| chain_width_at(greedy.steps(), scores, loss, lambda)).collect();

    for candidate in family.chains {
        let mut strictly_better = false;
        let mut never_worse = true;
        for (&lambda, &g) in grid.iter().zip(&greedy_widths) {
            let w = chain_width_at(&candidate, scores, loss, lambda);
            if w > g {
                never_worse = false;
                break;
            }
            strictly_better |= w < g;
        }
        if never_worse && strictly_better {
            return Ok(Some(candidate));
        }
    }
    Ok(None)
}

/// True iff no nested chain weakly beats the greedy chain's width at every
/// λ while strictly beating it at some λ. Limited to `K <= 8`.
pub fn verify_non_domination(scores: &ScoreVector, loss: &LossSpec) -> Result<bool> {
    Ok(find_dominating_chain(scores, loss)?.is_none())
}

/// Largest λ on the grid `{0, step, 2·step, ..., 1}` with
/// `Σ_i L_i(λ) <= (n + 1)·α - B`, scanning every grid point.
pub fn calibrate_grid(rows: &[LabeledScore], alpha: f64, loss: &LossSpec, grid_step: f64) -> Result<f64> {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::InvalidParameter { name: "grid_step", value: grid_step });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter { name: "alpha", value: alpha });
    }
    let classes = validate_dataset(rows)?;
    loss.check_classes(classes)?;
    let n = rows.len();
    let budget = risk_budget(alpha, n, loss);
    if budget < 0.0 {
        return Err(Error::Infeasible { alpha, n });
    }

    // Per row: (constraint value, loss) of each chain element, in chain order.
    let mut profiles = Vec::with_capacity(n);
    for row in rows {
        let greedy = chain(&row.scores, loss)?;
        let profile: Vec<(f64, f64)> = greedy
            .steps()
            .iter()
            .map(|s| (constraint_value(&row.scores, loss, s), evaluate_loss(loss, row.label, s, classes)))
            .collect();
        profiles.push(profile);
    }

    // `as` truncates toward zero.
    let points = (1.0 / grid_step) as usize;
    let mut grid: Vec<f64> = (0..=points).map(|k| k as f64 * grid_step).filter(|&l| l <= 1.0).collect();
    if grid.last() != Some(&1.0) {
        grid.push(1.0);
    }
    let mut best = None;
    for &lambda in &grid {
        let total: f64 = profiles
            .iter()
            .map(|p| p.iter().find(|(v, _)| *v <= lambda).map_or(0.0, |&(_, l)| l))
            .sum();
        if total <= budget {
            best = Some(lambda);
        }
    }
    best.ok_or(Error::Infeasible { alpha, n })
}
