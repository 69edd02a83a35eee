//! Choosing `λ̂` from labeled calibration scores.
//!
//! Each calibration example contributes a loss step function `L_i(λ)`:
//! 0 at `λ = 0` (full coverage), non-decreasing, and right-continuous, since
//! a set changes exactly at the chain thresholds. With budget
//! `c = (n + 1)·α - B` the feasible region `{λ : Σ L_i(λ) <= c}` is `[0, x)`
//! for the first pooled breakpoint `x` where the sum exceeds `c` (or all of
//! `[0, 1]`). `λ̂` is its supremum approached from the left: the largest
//! double below `x`, at which every set still equals its value on the last
//! feasible step.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::losses::evaluate_loss;
use crate::sets::{chain, GreedyChain};
use crate::types::{validate_dataset, LabeledScore, LossSpec, PredictionSet};

/// Thresholds closer than this are treated as the same breakpoint when
/// counting collisions.
pub const COLLISION_TOLERANCE: f64 = 1e-12;

/// `L_i(λ)` as a step function: `losses[j]` holds for
/// `thresholds[j] <= λ < thresholds[j + 1]`, and the loss is 0 below the
/// first threshold.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleBreakpoints {
    thresholds: Vec<f64>,
    losses: Vec<f64>,
}

impl SampleBreakpoints {
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn loss_at(&self, lambda: f64) -> f64 {
        match self.thresholds.partition_point(|&t| t <= lambda) {
            0 => 0.0,
            k => self.losses[k - 1],
        }
    }

    /// `(threshold, jump)` pairs, jump > 0.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mut prev = 0.0;
        self.thresholds.iter().zip(&self.losses).map(move |(&t, &l)| {
            let jump = l - prev;
            prev = l;
            (t, jump)
        })
    }

    fn from_chain(chain: &GreedyChain, label: usize, loss: &LossSpec) -> Self {
        let classes = chain.classes();
        let steps = chain.steps();
        let mut out = Self::default();
        // Walk from the full range towards the singleton; step j becomes
        // active at its threshold, and on equal thresholds the smaller step wins.
        let mut current = evaluate_loss(loss, label, &steps[classes - 1], classes);
        for j in (0..classes.saturating_sub(1)).rev() {
            let t = chain.threshold(j).max(0.0);
            let l = evaluate_loss(loss, label, &steps[j], classes);
            if l <= current {
                continue;
            }
            current = l;
            if out.thresholds.last() == Some(&t) {
                *out.losses.last_mut().expect("nonempty") = l;
            } else {
                out.thresholds.push(t);
                out.losses.push(l);
            }
        }
        out
    }
}

/// Loss step function of one labeled example.
pub fn sample_breakpoints(row: &LabeledScore, loss: &LossSpec) -> Result<SampleBreakpoints> {
    let chain = chain(&row.scores, loss)?;
    Ok(SampleBreakpoints::from_chain(&chain, row.label, loss))
}

/// A calibration row with its greedy chain and loss step function
/// precomputed; both are independent of `λ` and `α`.
#[derive(Debug, Clone)]
pub struct PreparedRow {
    pub label: usize,
    pub chain: GreedyChain,
    pub breakpoints: SampleBreakpoints,
}

impl PreparedRow {
    pub fn new(row: &LabeledScore, loss: &LossSpec) -> Result<Self> {
        let chain = chain(&row.scores, loss)?;
        let breakpoints = SampleBreakpoints::from_chain(&chain, row.label, loss);
        Ok(Self { label: row.label, chain, breakpoints })
    }

    pub fn set_at(&self, lambda: f64) -> PredictionSet {
        self.chain.select(lambda)
    }

    /// Loss of the set selected at `lambda`, evaluated from the chain rather
    /// than the precomputed step function.
    pub fn loss_at(&self, lambda: f64, loss: &LossSpec) -> f64 {
        evaluate_loss(loss, self.label, &self.set_at(lambda), self.chain.classes())
    }
}

/// Validates `rows` as one dataset and prepares each row.
pub fn prepare(rows: &[LabeledScore], loss: &LossSpec) -> Result<Vec<PreparedRow>> {
    let classes = validate_dataset(rows)?;
    loss.check_classes(classes)?;
    rows.iter().map(|r| PreparedRow::new(r, loss)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum CalibrationMethod {
    Exact,
    Binary { delta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationResult {
    pub lambda_hat: f64,
    pub alpha: f64,
    pub n: usize,
    pub method: CalibrationMethod,
    pub loss: LossSpec,
    /// `Σ_i L_i(λ̂)` over the calibration rows.
    pub empirical_sum: f64,
}

impl CalibrationResult {
    /// `(n + 1)·α - B`.
    pub fn budget(&self) -> f64 {
        risk_budget(self.alpha, self.n, &self.loss)
    }

    pub fn is_feasible(&self) -> bool {
        self.empirical_sum <= self.budget() && (0.0..=1.0).contains(&self.lambda_hat)
    }
}

pub fn risk_budget(alpha: f64, n: usize, loss: &LossSpec) -> f64 {
    (n as f64 + 1.0) * alpha - loss.bound()
}

fn check_alpha(alpha: f64, n: usize, loss: &LossSpec) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter { name: "alpha", value: alpha });
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let budget = risk_budget(alpha, n, loss);
    if budget < 0.0 {
        return Err(Error::Infeasible { alpha, n });
    }
    Ok(budget)
}

/// `Σ_i L_i(λ)`, accumulated in row order from each row's selected set.
pub fn empirical_loss_sum(rows: &[&PreparedRow], loss: &LossSpec, lambda: f64) -> f64 {
    rows.iter().map(|r| r.loss_at(lambda, loss)).sum()
}

fn pooled_jumps(rows: &[&PreparedRow]) -> Vec<(f64, usize, f64)> {
    let mut events: Vec<(f64, usize, f64)> = rows
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.breakpoints.jumps().map(move |(t, j)| (t, i, j)))
        .collect();
    // Stable: ties keep row order, so the sweep below is deterministic.
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    events
}

/// Exact `λ̂` from the pooled breakpoints of all calibration rows.
pub fn calibrate_exact(rows: &[LabeledScore], alpha: f64, loss: &LossSpec) -> Result<CalibrationResult> {
    let prepared = prepare(rows, loss)?;
    let refs: Vec<&PreparedRow> = prepared.iter().collect();
    calibrate_exact_prepared(&refs, alpha, loss)
}

pub fn calibrate_exact_prepared(rows: &[&PreparedRow], alpha: f64, loss: &LossSpec) -> Result<CalibrationResult> {
    let n = rows.len();
    let budget = check_alpha(alpha, n, loss)?;
    let events = pooled_jumps(rows);

    // First breakpoint where the running sum leaves the budget.
    let mut running = 0.0;
    let mut first_infeasible = None;
    let mut k = 0;
    while k < events.len() {
        let t = events[k].0;
        while k < events.len() && events[k].0 == t {
            running += events[k].2;
            k += 1;
        }
        if running > budget {
            first_infeasible = Some(t);
            break;
        }
    }

    let mut bound = first_infeasible;
    loop {
        let lambda = match bound {
            None => 1.0,
            Some(x) if x > 0.0 => x.next_down(),
            Some(_) => return Err(Error::Infeasible { alpha, n }),
        };
        // Re-evaluate along an independent path; only ulp-level
        // disagreements with the sweep can push us further down.
        let empirical_sum = empirical_loss_sum(rows, loss, lambda);
        if empirical_sum <= budget {
            return Ok(CalibrationResult {
                lambda_hat: lambda,
                alpha,
                n,
                method: CalibrationMethod::Exact,
                loss: loss.clone(),
                empirical_sum,
            });
        }
        let below = events.iter().rev().map(|e| e.0).find(|&t| t <= lambda);
        bound = Some(below.unwrap_or(0.0));
    }
}

/// Bisection for `λ̂`: start at 0.5, move down by half the previous step
/// when the calibration loss exceeds the budget and up otherwise, stop once
/// the step is at most `delta`. If the last iterate is infeasible it is
/// lowered by one step.
pub fn calibrate_binary(rows: &[LabeledScore], alpha: f64, loss: &LossSpec, delta: f64) -> Result<CalibrationResult> {
    let prepared = prepare(rows, loss)?;
    let refs: Vec<&PreparedRow> = prepared.iter().collect();
    calibrate_binary_prepared(&refs, alpha, loss, delta)
}

pub fn calibrate_binary_prepared(
    rows: &[&PreparedRow],
    alpha: f64,
    loss: &LossSpec,
    delta: f64,
) -> Result<CalibrationResult> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter { name: "delta", value: delta });
    }
    let n = rows.len();
    let budget = check_alpha(alpha, n, loss)?;
    let total = |lambda: f64| empirical_loss_sum(rows, loss, lambda);

    let (mut prev, mut current) = (0.0_f64, 0.5_f64);
    let mut best_feasible: Option<f64> = None;
    loop {
        let step = (current - prev).abs();
        if step <= delta {
            break;
        }
        let feasible = total(current) <= budget;
        if feasible {
            best_feasible = Some(best_feasible.map_or(current, |b: f64| b.max(current)));
        }
        let next = if feasible { current + step / 2.0 } else { current - step / 2.0 };
        prev = current;
        current = next;
    }

    let last_step = (current - prev).abs();
    let lowered = (current - last_step).max(0.0);
    let candidates = [
        Some(current),
        Some(lowered),
        // `lowered` can land exactly on the breakpoint that broke the budget.
        (lowered > 0.0).then(|| lowered.next_down()),
        best_feasible,
        Some(0.0),
    ];
    for lambda in candidates.into_iter().flatten() {
        let empirical_sum = total(lambda);
        if empirical_sum <= budget {
            return Ok(CalibrationResult {
                lambda_hat: lambda,
                alpha,
                n,
                method: CalibrationMethod::Binary { delta },
                loss: loss.clone(),
                empirical_sum,
            });
        }
    }
    Err(Error::Infeasible { alpha, n })
}

/// Collision count `M` and the largest jump of the empirical risk.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JumpDiagnostics {
    /// Most calibration rows whose loss jumps at one (tolerance-matched)
    /// breakpoint.
    pub max_collision: usize,
    /// Largest jump of `(1/n)·Σ_i L_i(λ)` at any pooled breakpoint.
    pub max_empirical_jump: f64,
    pub n: usize,
}

impl JumpDiagnostics {
    /// `(M + 1)·B / n`.
    pub fn jump_bound(&self, bound: f64) -> f64 {
        (self.max_collision as f64 + 1.0) * bound / self.n as f64
    }

    pub fn satisfies_jump_bound(&self, bound: f64) -> bool {
        self.max_empirical_jump <= self.jump_bound(bound) + 1e-12
    }
}

pub fn jump_diagnostics(rows: &[LabeledScore], loss: &LossSpec) -> Result<JumpDiagnostics> {
    let prepared = prepare(rows, loss)?;
    let refs: Vec<&PreparedRow> = prepared.iter().collect();
    Ok(jump_diagnostics_prepared(&refs))
}

pub fn jump_diagnostics_prepared(rows: &[&PreparedRow]) -> JumpDiagnostics {
    let n = rows.len();
    let events = pooled_jumps(rows);
    let mut max_collision = 0;
    let mut max_jump = 0.0_f64;
    let mut members: Vec<usize> = Vec::new();
    let mut k = 0;
    while k < events.len() {
        let anchor = events[k].0;
        let mut jump = 0.0;
        members.clear();
        while k < events.len() && events[k].0 - anchor <= COLLISION_TOLERANCE {
            members.push(events[k].1);
            jump += events[k].2;
            k += 1;
        }
        members.sort_unstable();
        members.dedup();
        max_collision = max_collision.max(members.len());
        max_jump = max_jump.max(jump);
    }
    JumpDiagnostics {
        max_collision,
        max_empirical_jump: if n == 0 { 0.0 } else { max_jump / n as f64 },
        n,
    }
}
