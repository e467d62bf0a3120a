//! Single-item mechanisms: score-only (SOM), two-menu (TMM), the LP-optimal
//! OM₁, menu reduction, and the threshold brute force.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::analysis::expected_reward;
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpProblem, LpSolution};
use crate::model::{posterior_mean, Instance, Mechanism};

/// Default tolerance for [`menu_size`].
pub const MENU_TOL: f64 = 1e-6;

/// `sum_v (v - t) d(v) r(v, s)` for every score column.
pub fn som_column_weights(instance: &Instance) -> Vec<f64> {
    (0..instance.m())
        .map(|s| {
            (0..instance.n())
                .map(|v| instance.margin(v) * instance.prior()[v] * instance.r(v, s))
                .sum()
        })
        .collect()
}

/// Acquires on score `s` iff its column weight is nonnegative; every row is
/// the same, so the report is ignored.
pub fn solve_som(instance: &Instance) -> Mechanism {
    let columns: Vec<f64> = som_column_weights(instance)
        .into_iter()
        .map(|w| if w >= 0.0 { 1.0 } else { 0.0 })
        .collect();
    let matrix = Array2::from_shape_fn((instance.n(), instance.m()), |(_, s)| columns[s]);
    Mechanism::new(matrix, "SOM").expect("0/1 entries")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreStatus {
    Consistent,
    Violated,
    /// Zero probability; the posterior is undefined and the score is skipped.
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDiagnostic {
    pub score_index: usize,
    pub score: f64,
    pub posterior_mean: Option<f64>,
    pub status: ScoreStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub consistent: bool,
    pub scores: Vec<ScoreDiagnostic>,
}

impl ConsistencyReport {
    pub fn violated_scores(&self) -> Vec<usize> {
        self.scores
            .iter()
            .filter(|d| d.status == ScoreStatus::Violated)
            .map(|d| d.score_index)
            .collect()
    }
}

/// Consistent iff `E[v | s] >= t` exactly when `s >= t`, over reachable scores.
pub fn check_consistency(instance: &Instance) -> ConsistencyReport {
    let t = instance.bar();
    let scores: Vec<ScoreDiagnostic> = instance
        .scores()
        .iter()
        .enumerate()
        .map(|(s, &score)| {
            let mean = posterior_mean(instance, s).expect("score index in range");
            let status = match mean {
                None => ScoreStatus::Unreachable,
                Some(mu) if (mu >= t) == (score >= t) => ScoreStatus::Consistent,
                Some(_) => ScoreStatus::Violated,
            };
            ScoreDiagnostic {
                score_index: s,
                score,
                posterior_mean: mean,
                status,
            }
        })
        .collect();
    ConsistencyReport {
        consistent: scores.iter().all(|d| d.status != ScoreStatus::Violated),
        scores,
    }
}

/// A score threshold, extended with a sentinel that never triggers. Orders
/// score indices first, then `Never`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Threshold {
    At(usize),
    Never,
}

impl Threshold {
    /// All `m + 1` thresholds in ascending order.
    pub fn all(m: usize) -> impl Iterator<Item = Threshold> {
        (0..m)
            .map(Threshold::At)
            .chain(std::iter::once(Threshold::Never))
    }

    fn triggers(self, s: usize) -> bool {
        matches!(self, Threshold::At(b) if s >= b)
    }

    /// `sum_{s >= b} r(v, s)`; zero for `Never`.
    pub fn tail(self, instance: &Instance, v: usize) -> f64 {
        match self {
            Threshold::At(b) => instance.tail_mass(v, b),
            Threshold::Never => 0.0,
        }
    }

    fn check(self, instance: &Instance) -> Result<()> {
        match self {
            Threshold::At(b) => instance.check_score(b),
            Threshold::Never => Ok(()),
        }
    }
}

/// Identical rows with `x = 1` iff the score reaches `threshold`.
pub fn threshold_mechanism(instance: &Instance, threshold: Threshold) -> Mechanism {
    let matrix = Array2::from_shape_fn((instance.n(), instance.m()), |(_, s)| {
        if threshold.triggers(s) {
            1.0
        } else {
            0.0
        }
    });
    Mechanism::new(matrix, "threshold").expect("0/1 entries")
}

/// Brute force over the `m + 1` single-threshold mechanisms; ties keep the
/// lowest threshold.
pub fn best_threshold_mechanism(instance: &Instance) -> (Mechanism, f64) {
    let mut best: Option<(Mechanism, f64)> = None;
    for threshold in Threshold::all(instance.m()) {
        let mech = threshold_mechanism(instance, threshold);
        let reward = expected_reward(instance, &mech).expect("dimensions match");
        if best.as_ref().is_none_or(|(_, b)| reward > *b) {
            best = Some((mech, reward));
        }
    }
    best.expect("at least the never-acquire threshold")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TmmParams {
    pub b1: Threshold,
    pub b2: Threshold,
    pub alpha: f64,
    /// Qualities whose owner strictly prefers menu 1.
    pub v1_set: Vec<usize>,
}

/// `{v : alpha * tail(v, b1) > tail(v, b2)}`.
fn menu_one_set(instance: &Instance, b1: Threshold, b2: Threshold, alpha: f64) -> Vec<usize> {
    (0..instance.n())
        .filter(|&v| alpha * b1.tail(instance, v) > b2.tail(instance, v))
        .collect()
}

/// Menu 1 acquires with probability `alpha` from score `b1` up; menu 2
/// acquires surely from `b2` up. Each owner takes the menu with the higher
/// acquisition probability, menu 2 on ties.
pub fn tmm_build(
    instance: &Instance,
    b1: Threshold,
    b2: Threshold,
    alpha: f64,
) -> Result<(TmmParams, Mechanism)> {
    b1.check(instance)?;
    b2.check(instance)?;
    if b1 > b2 {
        return Err(Error::InvalidParameter(format!(
            "TMM needs b1 <= b2, got {b1:?} > {b2:?}"
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "TMM alpha must lie in [0, 1], got {alpha}"
        )));
    }
    let v1_set = menu_one_set(instance, b1, b2, alpha);
    let mut in_v1 = vec![false; instance.n()];
    for &v in &v1_set {
        in_v1[v] = true;
    }
    let matrix = Array2::from_shape_fn((instance.n(), instance.m()), |(v, s)| {
        if in_v1[v] {
            if b1.triggers(s) {
                alpha
            } else {
                0.0
            }
        } else if b2.triggers(s) {
            1.0
        } else {
            0.0
        }
    });
    let mech = Mechanism::new(matrix, "TMM")?;
    Ok((
        TmmParams {
            b1,
            b2,
            alpha,
            v1_set,
        },
        mech,
    ))
}

/// Reward of TMM(b1, b2, alpha) without materializing the matrix.
fn tmm_reward(instance: &Instance, b1: Threshold, b2: Threshold, alpha: f64) -> f64 {
    (0..instance.n())
        .map(|v| {
            let menu1 = alpha * b1.tail(instance, v);
            let menu2 = b2.tail(instance, v);
            let acquired = if menu1 > menu2 { menu1 } else { menu2 };
            instance.margin(v) * instance.prior()[v] * acquired
        })
        .sum()
}

/// Exact search over TMM parameters.
///
/// For fixed `(b1, b2)` the menu-1 set only changes at the breakpoints
/// `alpha_v = tail(v, b2) / tail(v, b1)`, and between breakpoints the reward
/// is linear in `alpha`, so the maximum sits at `0`, `1`, or a breakpoint. At
/// a breakpoint the tied quality is acquired with the same probability by
/// either menu, so the reward is continuous there and both one-sided limits
/// equal the value at the point. Ties go to the smallest `(b1, b2, alpha)`.
pub fn tmm_optimal(instance: &Instance) -> (TmmParams, Mechanism, f64) {
    let m = instance.m();
    let mut best: Option<(Threshold, Threshold, f64, f64)> = None;
    for b1 in Threshold::all(m) {
        for b2 in Threshold::all(m).filter(|&b2| b2 >= b1) {
            let mut alphas = vec![0.0, 1.0];
            for v in 0..instance.n() {
                let den = b1.tail(instance, v);
                if den > 0.0 {
                    let a = b2.tail(instance, v) / den;
                    if (0.0..=1.0).contains(&a) {
                        alphas.push(a);
                    }
                }
            }
            alphas.sort_by(f64::total_cmp);
            alphas.dedup();
            for alpha in alphas {
                let reward = tmm_reward(instance, b1, b2, alpha);
                if best.is_none_or(|(.., r)| reward > r) {
                    best = Some((b1, b2, alpha, reward));
                }
            }
        }
    }
    let (b1, b2, alpha, _) = best.expect("search space is nonempty");
    let (params, mech) = tmm_build(instance, b1, b2, alpha).expect("searched parameters are valid");
    let reward = expected_reward(instance, &mech).expect("dimensions match");
    (params, mech, reward)
}

/// The OM₁ program over `x(v, s)` at index `v * m + s`: maximize the
/// collector's reward subject to IC for every ordered pair of qualities,
/// monotonicity in the score, and `0 <= x <= 1`.
pub fn om1_lp(instance: &Instance) -> LpProblem {
    let (n, m) = (instance.n(), instance.m());
    let objective = (0..n * m)
        .map(|k| {
            let (v, s) = (k / m, k % m);
            instance.margin(v) * instance.prior()[v] * instance.r(v, s)
        })
        .collect();
    let mut lp = LpProblem::with_uniform_bounds(objective, 0.0, 1.0);
    for v in 0..n {
        for w in (0..n).filter(|&w| w != v) {
            let mut terms = Vec::with_capacity(2 * m);
            for s in 0..m {
                let r = instance.r(v, s);
                if r != 0.0 {
                    terms.push((w * m + s, r));
                    terms.push((v * m + s, -r));
                }
            }
            lp.add_le(terms, 0.0);
        }
    }
    for v in 0..n {
        for s in 1..m {
            lp.add_le(vec![(v * m + s - 1, 1.0), (v * m + s, -1.0)], 0.0);
        }
    }
    lp
}

pub fn solve_om1(instance: &Instance) -> Result<Mechanism> {
    let lp = om1_lp(instance);
    match solve_lp(&lp)? {
        LpSolution::Optimal { values, .. } => {
            let matrix =
                Array2::from_shape_vec((instance.n(), instance.m()), values).expect("n * m values");
            Mechanism::new(matrix, "OM1")
        }
        other => Err(Error::LpStatus(other.status().as_str())),
    }
}

/// Replaces every row with `v <= t` by the row of the above-bar quality that
/// `v` would most like to report (ties to the smallest such quality). Rows
/// above the bar are kept. Without any above-bar quality the result is the
/// zero mechanism.
pub fn reduce_menu(instance: &Instance, mechanism: &Mechanism) -> Result<Mechanism> {
    instance.check_mechanism(mechanism)?;
    let t = instance.bar();
    let above: Vec<usize> = (0..instance.n())
        .filter(|&v| instance.values()[v] > t)
        .collect();
    let (n, m) = mechanism.dim();
    if above.is_empty() {
        return Ok(Mechanism::zeros(n, m, "reduced"));
    }
    let mut matrix = mechanism.matrix().clone();
    for v in (0..n).filter(|&v| instance.values()[v] <= t) {
        let mut target = above[0];
        let mut best = f64::NEG_INFINITY;
        for &u in &above {
            let p: f64 = (0..m).map(|s| mechanism.x(u, s) * instance.r(v, s)).sum();
            if p > best + 1e-12 {
                best = p;
                target = u;
            }
        }
        matrix.row_mut(v).assign(&mechanism.row(target));
    }
    Mechanism::new(matrix, "reduced")
}

/// Number of distinct rows, comparing entries within `tol`.
pub fn menu_size(mechanism: &Mechanism, tol: f64) -> usize {
    let mut representatives: Vec<usize> = Vec::new();
    let (n, m) = mechanism.dim();
    for v in 0..n {
        let known = representatives
            .iter()
            .any(|&u| (0..m).all(|s| (mechanism.x(u, s) - mechanism.x(v, s)).abs() <= tol));
        if !known {
            representatives.push(v);
        }
    }
    representatives.len()
}
