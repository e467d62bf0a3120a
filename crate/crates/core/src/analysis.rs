//! Verification and metrics for single- and multi-item mechanisms.
//!
//! Every expectation is an exact finite sum over the grid; nothing here
//! samples.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{acquire_probability, Instance, Mechanism, MultiInstance, MultiPolicy};
use crate::multi_item::ScoreMonotonicity;

pub const DEFAULT_IC_TOL: f64 = 1e-7;
pub const DEFAULT_MONOTONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub description: String,
    pub indices: Vec<usize>,
    /// Gain from misreporting, or the size of the monotonicity drop.
    pub magnitude: f64,
}

/// Outcome of an IC or monotonicity audit. `passed` holds exactly when
/// `violations` is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
    pub tolerance: f64,
}

impl VerificationReport {
    fn from_violations(violations: Vec<Violation>, tolerance: f64) -> Self {
        Self {
            passed: violations.is_empty(),
            violations,
            tolerance,
        }
    }

    /// Largest violation magnitude, or 0 when the report passed.
    pub fn worst(&self) -> f64 {
        self.violations
            .iter()
            .fold(0.0, |acc, v| acc.max(v.magnitude))
    }
}

/// `sum_{v,s} (v - t) d(v) x(v, s) r(v, s)` under truthful reporting.
pub fn expected_reward(instance: &Instance, mechanism: &Mechanism) -> Result<f64> {
    instance.check_mechanism(mechanism)?;
    let mut total = 0.0;
    for v in 0..instance.n() {
        let weight = instance.margin(v) * instance.prior()[v];
        if weight == 0.0 {
            continue;
        }
        total += weight * acquire_probability(instance, mechanism, v, v)?;
    }
    Ok(total)
}

/// Checks `P(acquire | v reports v) >= P(acquire | v reports v') - tol` for
/// every ordered pair and lists each failing pair with the misreport gain.
pub fn check_ic(
    instance: &Instance,
    mechanism: &Mechanism,
    tol: f64,
) -> Result<VerificationReport> {
    instance.check_mechanism(mechanism)?;
    let n = instance.n();
    let mut violations = Vec::new();
    for v in 0..n {
        let truthful = acquire_probability(instance, mechanism, v, v)?;
        for w in (0..n).filter(|&w| w != v) {
            let gain = acquire_probability(instance, mechanism, v, w)? - truthful;
            if gain > tol {
                violations.push(Violation {
                    description: format!(
                        "quality {} gains by reporting {}",
                        instance.values()[v],
                        instance.values()[w]
                    ),
                    indices: vec![v, w],
                    magnitude: gain,
                });
            }
        }
    }
    Ok(VerificationReport::from_violations(violations, tol))
}

/// Checks that every row is nondecreasing in the score within `tol`.
pub fn check_monotone(mechanism: &Mechanism, tol: f64) -> VerificationReport {
    let (n, m) = mechanism.dim();
    let mut violations = Vec::new();
    for v in 0..n {
        for s in 1..m {
            let drop = mechanism.x(v, s - 1) - mechanism.x(v, s);
            if drop > tol {
                violations.push(Violation {
                    description: format!("row {v} decreases from score {} to {s}", s - 1),
                    indices: vec![v, s - 1, s],
                    magnitude: drop,
                });
            }
        }
    }
    VerificationReport::from_violations(violations, tol)
}

/// Reward of acquiring exactly the items with `v >= t`.
pub fn omniscient_reward(instance: &Instance) -> f64 {
    (0..instance.n())
        .map(|v| instance.margin(v))
        .zip(instance.prior())
        .filter(|(margin, _)| *margin >= 0.0)
        .map(|(margin, d)| margin * d)
        .sum()
}

/// Expected absolute appraiser error, `sum |s - v| d(v) r(v, s)`.
pub fn total_bias(instance: &Instance) -> f64 {
    let mut total = 0.0;
    for (v, (&value, &d)) in instance.values().iter().zip(instance.prior()).enumerate() {
        for (s, &score) in instance.scores().iter().enumerate() {
            total += (score - value).abs() * d * instance.r(v, s);
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquiringRate {
    /// `sum_s x(v, s) r(v, s)` per quality.
    pub per_quality: Vec<f64>,
    /// Prior-weighted average of `per_quality`.
    pub overall: f64,
}

pub fn acquiring_rate(instance: &Instance, mechanism: &Mechanism) -> Result<AcquiringRate> {
    instance.check_mechanism(mechanism)?;
    let per_quality = (0..instance.n())
        .map(|v| acquire_probability(instance, mechanism, v, v))
        .collect::<Result<Vec<_>>>()?;
    let overall = per_quality
        .iter()
        .zip(instance.prior())
        .map(|(r, d)| r * d)
        .sum();
    Ok(AcquiringRate {
        per_quality,
        overall,
    })
}

/// `omniscient_reward - expected_reward`.
pub fn reward_gap_vs_omniscient(instance: &Instance, mechanism: &Mechanism) -> Result<f64> {
    Ok(omniscient_reward(instance) - expected_reward(instance, mechanism)?)
}

/// Total reward over all `k` items under truthful reporting.
pub fn multi_expected_reward(instance: &MultiInstance, policy: &MultiPolicy) -> Result<f64> {
    policy.check_against(instance)?;
    let space = instance.profiles();
    let prior = instance.joint_prior();
    let likelihood = instance.joint_likelihood();
    let base = instance.base();
    let mut tuple = vec![0; space.items];
    let mut total = 0.0;
    for (q, &dq) in prior.iter().enumerate() {
        if dq == 0.0 {
            continue;
        }
        space.decode_quality(q, &mut tuple);
        for (i, &v) in tuple.iter().enumerate() {
            let margin = base.margin(v);
            if margin == 0.0 {
                continue;
            }
            let start = space.cell(q, 0);
            let cells = start..start + space.score_profiles();
            let acquired: f64 = policy.tensors[i][cells.clone()]
                .iter()
                .zip(&likelihood[cells])
                .map(|(x, l)| x * l)
                .sum();
            total += margin * dq * acquired;
        }
    }
    Ok(total)
}

/// Expected number of acquired items for a profile reporting `reported`
/// when its true profile has likelihood row `likelihood`.
fn expected_acquired(policy: &MultiPolicy, reported: usize, likelihood: &[f64]) -> f64 {
    let space = policy.space();
    let start = space.cell(reported, 0);
    policy
        .tensors
        .iter()
        .map(|t| {
            t[start..start + space.score_profiles()]
                .iter()
                .zip(likelihood)
                .map(|(x, l)| x * l)
                .sum::<f64>()
        })
        .sum()
}

/// The owner of profile `v` maximizes the expected number of acquired items;
/// flags every `(v, v')` where misreporting gains more than `tol`.
pub fn multi_check_ic(
    instance: &MultiInstance,
    policy: &MultiPolicy,
    tol: f64,
) -> Result<VerificationReport> {
    policy.check_against(instance)?;
    let space = instance.profiles();
    let likelihood = instance.joint_likelihood();
    let width = space.score_profiles();
    let mut violations = Vec::new();
    for v in 0..space.quality_profiles() {
        let lik = &likelihood[v * width..(v + 1) * width];
        let truthful = expected_acquired(policy, v, lik);
        for w in (0..space.quality_profiles()).filter(|&w| w != v) {
            let gain = expected_acquired(policy, w, lik) - truthful;
            if gain > tol {
                violations.push(Violation {
                    description: format!("profile {v} gains by reporting profile {w}"),
                    indices: vec![v, w],
                    magnitude: gain,
                });
            }
        }
    }
    Ok(VerificationReport::from_violations(violations, tol))
}

/// Checks each `x_i` is nondecreasing in its own score `s_i`.
pub fn multi_check_monotone(
    instance: &MultiInstance,
    policy: &MultiPolicy,
    tol: f64,
) -> Result<VerificationReport> {
    multi_check_monotone_with(instance, policy, tol, ScoreMonotonicity::OwnScore)
}

/// Like [`multi_check_monotone`], optionally requiring monotonicity in every
/// item's score rather than only the item's own.
pub fn multi_check_monotone_with(
    instance: &MultiInstance,
    policy: &MultiPolicy,
    tol: f64,
    mode: ScoreMonotonicity,
) -> Result<VerificationReport> {
    policy.check_against(instance)?;
    let space = instance.profiles();
    let mut scores = vec![0; space.items];
    let mut violations = Vec::new();
    for (i, tensor) in policy.tensors.iter().enumerate() {
        let directions: Vec<usize> = match mode {
            ScoreMonotonicity::OwnScore => vec![i],
            ScoreMonotonicity::AllScores => (0..space.items).collect(),
        };
        for q in 0..space.quality_profiles() {
            for sp in 0..space.score_profiles() {
                space.decode_score(sp, &mut scores);
                for &j in &directions {
                    if scores[j] == 0 {
                        continue;
                    }
                    let lower = sp - space.score_stride(j);
                    let drop = tensor[space.cell(q, lower)] - tensor[space.cell(q, sp)];
                    if drop > tol {
                        violations.push(Violation {
                            description: format!(
                                "item {i} decreases in score of item {j} at profile {q}, scores {sp}"
                            ),
                            indices: vec![i, j, q, lower, sp],
                            magnitude: drop,
                        });
                    }
                }
            }
        }
    }
    Ok(VerificationReport::from_violations(violations, tol))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiAcquiringRate {
    /// Probability an item of each quality is acquired, averaged over items
    /// and over the other items' qualities.
    pub per_quality: Vec<f64>,
    pub overall: f64,
}

pub fn multi_acquiring_rate(
    instance: &MultiInstance,
    policy: &MultiPolicy,
) -> Result<MultiAcquiringRate> {
    policy.check_against(instance)?;
    let space = instance.profiles();
    let base = instance.base();
    let prior = instance.joint_prior();
    let likelihood = instance.joint_likelihood();
    let width = space.score_profiles();
    let mut mass = vec![0.0; base.n()];
    let mut tuple = vec![0; space.items];
    for (q, &dq) in prior.iter().enumerate() {
        if dq == 0.0 {
            continue;
        }
        space.decode_quality(q, &mut tuple);
        let lik = &likelihood[q * width..(q + 1) * width];
        for (i, &v) in tuple.iter().enumerate() {
            let start = space.cell(q, 0);
            let acquired: f64 = policy.tensors[i][start..start + width]
                .iter()
                .zip(lik)
                .map(|(x, l)| x * l)
                .sum();
            mass[v] += dq * acquired;
        }
    }
    let k = space.items as f64;
    let per_quality: Vec<f64> = mass
        .iter()
        .zip(base.prior())
        .map(|(&m, &d)| if d > 0.0 { m / (k * d) } else { 0.0 })
        .collect();
    let overall = mass.iter().sum::<f64>() / k;
    Ok(MultiAcquiringRate {
        per_quality,
        overall,
    })
}
