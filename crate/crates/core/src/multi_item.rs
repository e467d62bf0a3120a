//! Multi-item mechanisms: the OMₖ program, the Ranking Mechanism (RM) and
//! its IC audit, and Union Mechanisms, either over fixed per-item components
//! or LP-optimized (UMOPT).

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpProblem, LpSolution};
use crate::model::{Mechanism, MultiInstance, MultiPolicy, ProfileSpace};

/// Default cap on LP variables (and materialized tensor entries).
pub const DEFAULT_SIZE_BUDGET: usize = 1_000_000;

/// Which score coordinates each `x_i` must be nondecreasing in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ScoreMonotonicity {
    /// `x_i` nondecreasing in `s_i` with the other scores fixed.
    OwnScore,
    /// `x_i` nondecreasing in every `s_j`.
    #[default]
    AllScores,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OmkOptions {
    pub size_budget: usize,
    pub monotonicity: ScoreMonotonicity,
}

impl Default for OmkOptions {
    fn default() -> Self {
        Self {
            size_budget: DEFAULT_SIZE_BUDGET,
            monotonicity: ScoreMonotonicity::default(),
        }
    }
}

fn check_budget(required: Option<usize>, budget: usize) -> Result<usize> {
    match required {
        Some(r) if r <= budget => Ok(r),
        Some(r) => Err(Error::SizeBudgetExceeded {
            required: r,
            budget,
        }),
        None => Err(Error::SizeBudgetExceeded {
            required: usize::MAX,
            budget,
        }),
    }
}

/// `k * n^k * m^k`, or `None` on overflow.
pub fn omk_variable_count(instance: &MultiInstance) -> Option<usize> {
    let base = instance.base();
    let k = instance.item_count() as u32;
    base.n()
        .checked_pow(k)?
        .checked_mul(base.m().checked_pow(k)?)?
        .checked_mul(instance.item_count())
}

/// Adds `x(q, s - stride_j) <= x(q, s)` rows for one item's tensor starting
/// at variable `offset`.
fn push_monotone_rows(
    lp: &mut LpProblem,
    space: ProfileSpace,
    offset: usize,
    item: usize,
    mode: ScoreMonotonicity,
) {
    let mut scores = vec![0; space.items];
    let directions: Vec<usize> = match mode {
        ScoreMonotonicity::OwnScore => vec![item],
        ScoreMonotonicity::AllScores => (0..space.items).collect(),
    };
    for q in 0..space.quality_profiles() {
        for sp in 0..space.score_profiles() {
            space.decode_score(sp, &mut scores);
            for &j in &directions {
                if scores[j] > 0 {
                    let lower = sp - space.score_stride(j);
                    lp.add_le(
                        vec![
                            (offset + space.cell(q, lower), 1.0),
                            (offset + space.cell(q, sp), -1.0),
                        ],
                        0.0,
                    );
                }
            }
        }
    }
}

/// Reward coefficient `(v_i - t) prod_j d(v_j) r(v_j, s_j)` of `x_i(q, s)`.
fn reward_coefficients(instance: &MultiInstance) -> Vec<f64> {
    let space = instance.profiles();
    let prior = instance.joint_prior();
    let likelihood = instance.joint_likelihood();
    let mut tuple = vec![0; space.items];
    let mut c = vec![0.0; space.items * space.cells()];
    for (q, &dq) in prior.iter().enumerate() {
        space.decode_quality(q, &mut tuple);
        for (i, &v) in tuple.iter().enumerate() {
            let margin = instance.base().margin(v);
            for sp in 0..space.score_profiles() {
                let cell = space.cell(q, sp);
                c[i * space.cells() + cell] = margin * dq * likelihood[cell];
            }
        }
    }
    c
}

/// The OMₖ program. Variable `x_i(q, s)` sits at `i * n^k m^k + q * m^k + s`.
pub fn omk_lp(instance: &MultiInstance, options: &OmkOptions) -> Result<LpProblem> {
    check_budget(omk_variable_count(instance), options.size_budget)?;
    let space = instance.profiles();
    let cells = space.cells();
    let width = space.score_profiles();
    let likelihood = instance.joint_likelihood();
    let mut lp = LpProblem::with_uniform_bounds(reward_coefficients(instance), 0.0, 1.0);
    for q in 0..space.quality_profiles() {
        let lik = &likelihood[q * width..(q + 1) * width];
        for w in (0..space.quality_profiles()).filter(|&w| w != q) {
            let mut terms = Vec::with_capacity(2 * space.items * width);
            for i in 0..space.items {
                for (sp, &l) in lik.iter().enumerate() {
                    if l != 0.0 {
                        terms.push((i * cells + space.cell(w, sp), l));
                        terms.push((i * cells + space.cell(q, sp), -l));
                    }
                }
            }
            lp.add_le(terms, 0.0);
        }
    }
    for i in 0..space.items {
        push_monotone_rows(&mut lp, space, i * cells, i, options.monotonicity);
    }
    Ok(lp)
}

fn optimal_values(lp: &LpProblem) -> Result<Vec<f64>> {
    match solve_lp(lp)? {
        LpSolution::Optimal { values, .. } => Ok(values),
        other => Err(Error::LpStatus(other.status().as_str())),
    }
}

pub fn solve_omk(instance: &MultiInstance) -> Result<MultiPolicy> {
    solve_omk_with(instance, &OmkOptions::default())
}

pub fn solve_omk_with(instance: &MultiInstance, options: &OmkOptions) -> Result<MultiPolicy> {
    let lp = omk_lp(instance, options)?;
    let values = optimal_values(&lp)?;
    let space = instance.profiles();
    let tensors = values.chunks(space.cells()).map(<[f64]>::to_vec).collect();
    MultiPolicy::new(space, tensors)
}

/// Reported ordering of two qualities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RankClass {
    /// `v1 > v2`
    Greater,
    /// `v1 = v2`
    Equal,
    /// `v1 < v2`
    Smaller,
}

impl RankClass {
    pub const ALL: [RankClass; 3] = [RankClass::Greater, RankClass::Equal, RankClass::Smaller];

    pub fn of(v1: usize, v2: usize) -> Self {
        match v1.cmp(&v2) {
            std::cmp::Ordering::Greater => RankClass::Greater,
            std::cmp::Ordering::Equal => RankClass::Equal,
            std::cmp::Ordering::Less => RankClass::Smaller,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            RankClass::Greater => "greater",
            RankClass::Equal => "equal",
            RankClass::Smaller => "smaller",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankPolicy {
    /// `accept[rank][item][(s1, s2)]`, each entry 0 or 1.
    pub accept: Vec<[Array2<f64>; 2]>,
    /// `aggregate[rank][(v1, v2)]`: expected acquisitions when the true pair
    /// is `(v1, v2)` and the owner reports `rank`.
    pub aggregate: Vec<Array2<f64>>,
    pub values: Vec<f64>,
}

impl RankPolicy {
    pub fn accept(&self, rank: RankClass, item: usize) -> &Array2<f64> {
        &self.accept[rank.index()][item]
    }

    pub fn aggregate(&self, rank: RankClass) -> &Array2<f64> {
        &self.aggregate[rank.index()]
    }
}

/// The Ranking Mechanism: for each reported ordering and score pair, item
/// `i` is acquired iff `E[v_i | s1, s2, rank] >= t`. Score pairs that no
/// quality pair in the class can produce reject both items.
pub fn ranking_mechanism(instance: &MultiInstance) -> Result<RankPolicy> {
    if instance.item_count() != 2 {
        return Err(Error::RequiresTwoItems("the ranking mechanism"));
    }
    let base = instance.base();
    let (n, m) = (base.n(), base.m());
    let (d, values, t) = (base.prior(), base.values(), base.bar());
    let mut accept = Vec::with_capacity(3);
    let mut aggregate = Vec::with_capacity(3);
    for rank in RankClass::ALL {
        let mut x = [Array2::zeros((m, m)), Array2::zeros((m, m))];
        for s1 in 0..m {
            for s2 in 0..m {
                let (mut num1, mut num2, mut den) = (0.0, 0.0, 0.0);
                for v1 in 0..n {
                    for v2 in (0..n).filter(|&v2| RankClass::of(v1, v2) == rank) {
                        let w = d[v1] * d[v2] * base.r(v1, s1) * base.r(v2, s2);
                        num1 += values[v1] * w;
                        num2 += values[v2] * w;
                        den += w;
                    }
                }
                if den > 0.0 {
                    x[0][(s1, s2)] = if num1 / den >= t { 1.0 } else { 0.0 };
                    x[1][(s1, s2)] = if num2 / den >= t { 1.0 } else { 0.0 };
                }
            }
        }
        let agg = Array2::from_shape_fn((n, n), |(v1, v2)| {
            let mut total = 0.0;
            for s1 in 0..m {
                for s2 in 0..m {
                    total += base.r(v1, s1) * base.r(v2, s2) * (x[0][(s1, s2)] + x[1][(s1, s2)]);
                }
            }
            total
        });
        accept.push(x);
        aggregate.push(agg);
    }
    Ok(RankPolicy {
        accept,
        aggregate,
        values: values.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankViolation {
    pub v1: usize,
    pub v2: usize,
    pub truthful: RankClass,
    pub better: RankClass,
    pub gain: f64,
}

/// Every `(v1, v2, other rank)` where misreporting the ordering raises the
/// expected number of acquisitions by more than `1e-9`.
pub fn rm_ic_audit(policy: &RankPolicy) -> Vec<RankViolation> {
    let n = policy.values.len();
    let mut out = Vec::new();
    for v1 in 0..n {
        for v2 in 0..n {
            let truthful = RankClass::of(v1, v2);
            let honest = policy.aggregate(truthful)[(v1, v2)];
            for better in RankClass::ALL.into_iter().filter(|&r| r != truthful) {
                let gain = policy.aggregate(better)[(v1, v2)] - honest;
                if gain > 1e-9 {
                    out.push(RankViolation {
                        v1,
                        v2,
                        truthful,
                        better,
                        gain,
                    });
                }
            }
        }
    }
    out
}

/// `k` single-item mechanisms `y_i` over the shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct UnionInputs {
    pub mechanisms: Vec<Mechanism>,
}

impl UnionInputs {
    pub fn new(mechanisms: Vec<Mechanism>) -> Self {
        Self { mechanisms }
    }

    /// `k` copies of the same mechanism.
    pub fn copies(mechanism: &Mechanism, k: usize) -> Self {
        Self {
            mechanisms: vec![mechanism.clone(); k],
        }
    }

    fn check(&self, instance: &MultiInstance) -> Result<()> {
        if self.mechanisms.len() != instance.item_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} component mechanisms for {} items",
                self.mechanisms.len(),
                instance.item_count()
            )));
        }
        self.mechanisms
            .iter()
            .try_for_each(|m| instance.base().check_mechanism(m))
    }
}

/// Allocates total mass `gamma` greedily to the highest qualities, splitting
/// evenly among ties at the marginal quality. `qualities` are grid indices.
pub fn greedy_allocation(qualities: &[usize], gamma: f64) -> Vec<f64> {
    let k = qualities.len();
    let mut x = vec![0.0; k];
    if gamma <= 1e-12 {
        return x;
    }
    let mut levels: Vec<usize> = qualities.to_vec();
    levels.sort_unstable_by(|a, b| b.cmp(a));
    levels.dedup();
    let mut above = 0usize;
    for (pos, &level) in levels.iter().enumerate() {
        let tied = qualities.iter().filter(|&&v| v == level).count();
        let last = pos + 1 == levels.len();
        if gamma <= (above + tied) as f64 || last {
            let share = ((gamma - above as f64) / tied as f64).clamp(0.0, 1.0);
            for (xi, &v) in x.iter_mut().zip(qualities) {
                if v > level {
                    *xi = 1.0;
                } else if v == level {
                    *xi = share;
                }
            }
            return x;
        }
        above += tied;
    }
    x
}

/// Union composition at one profile: `Gamma = sum_i y_i(v_i, s_i)` is
/// redistributed by [`greedy_allocation`].
pub fn union_compose(
    instance: &MultiInstance,
    inputs: &UnionInputs,
    qualities: &[usize],
    scores: &[usize],
) -> Result<Vec<f64>> {
    inputs.check(instance)?;
    let k = instance.item_count();
    if qualities.len() != k || scores.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "profile tuples must have {k} entries"
        )));
    }
    for (&v, &s) in qualities.iter().zip(scores) {
        instance.base().check_quality(v)?;
        instance.base().check_score(s)?;
    }
    Ok(compose_unchecked(inputs, qualities, scores))
}

fn compose_unchecked(inputs: &UnionInputs, qualities: &[usize], scores: &[usize]) -> Vec<f64> {
    let gamma: f64 = inputs
        .mechanisms
        .iter()
        .zip(qualities.iter().zip(scores))
        .map(|(y, (&v, &s))| y.x(v, s))
        .sum();
    greedy_allocation(qualities, gamma)
}

pub fn union_policy(instance: &MultiInstance, inputs: &UnionInputs) -> Result<MultiPolicy> {
    union_policy_with(instance, inputs, DEFAULT_SIZE_BUDGET)
}

/// Materializes [`union_compose`] at every profile.
pub fn union_policy_with(
    instance: &MultiInstance,
    inputs: &UnionInputs,
    size_budget: usize,
) -> Result<MultiPolicy> {
    inputs.check(instance)?;
    check_budget(omk_variable_count(instance), size_budget)?;
    let space = instance.profiles();
    let mut policy = MultiPolicy::zeros(space);
    let mut qualities = vec![0; space.items];
    let mut scores = vec![0; space.items];
    for q in 0..space.quality_profiles() {
        space.decode_quality(q, &mut qualities);
        for sp in 0..space.score_profiles() {
            space.decode_score(sp, &mut scores);
            let x = compose_unchecked(inputs, &qualities, &scores);
            let cell = space.cell(q, sp);
            for (tensor, xi) in policy.tensors.iter_mut().zip(x) {
                tensor[cell] = xi;
            }
        }
    }
    Ok(policy)
}

/// The UMOPT program: per-item matrices `y_i` (each IC and monotone, at
/// `i * n * m + v * m + s`) followed by tensors `x_i` (as in [`omk_lp`],
/// shifted by `k * n * m`) tied by `sum_i x_i(q, s) = sum_i y_i(v_i, s_i)`.
pub fn umopt_lp(instance: &MultiInstance, size_budget: usize) -> Result<LpProblem> {
    let base = instance.base();
    let (n, m) = (base.n(), base.m());
    let k = instance.item_count();
    let y_count = k * n * m;
    let x_count = omk_variable_count(instance);
    check_budget(x_count.and_then(|x| x.checked_add(y_count)), size_budget)?;
    let space = instance.profiles();
    let cells = space.cells();

    let single = crate::single_item::om1_lp(base);
    let mut objective = vec![0.0; y_count];
    objective.extend(reward_coefficients(instance));
    let mut lp = LpProblem::with_uniform_bounds(objective, 0.0, 1.0);
    for i in 0..k {
        let offset = i * n * m;
        for row in single.constraints() {
            let terms = row.terms.iter().map(|&(j, a)| (offset + j, a)).collect();
            lp.add_le(terms, row.rhs);
        }
    }
    let mut qualities = vec![0; k];
    let mut scores = vec![0; k];
    for q in 0..space.quality_profiles() {
        space.decode_quality(q, &mut qualities);
        for sp in 0..space.score_profiles() {
            space.decode_score(sp, &mut scores);
            let mut terms = Vec::with_capacity(2 * k);
            for i in 0..k {
                terms.push((y_count + i * cells + space.cell(q, sp), 1.0));
                terms.push((i * n * m + qualities[i] * m + scores[i], -1.0));
            }
            lp.add_eq(terms, 0.0);
        }
    }
    Ok(lp)
}

pub fn solve_umopt(instance: &MultiInstance) -> Result<(UnionInputs, MultiPolicy)> {
    solve_umopt_with(instance, DEFAULT_SIZE_BUDGET)
}

/// Solves [`umopt_lp`] and rebuilds the policy from the optimal components
/// with [`union_policy`]; greedy allocation is optimal for each profile's
/// total mass, so the objective is unchanged.
pub fn solve_umopt_with(
    instance: &MultiInstance,
    size_budget: usize,
) -> Result<(UnionInputs, MultiPolicy)> {
    let lp = umopt_lp(instance, size_budget)?;
    let values = optimal_values(&lp)?;
    let base = instance.base();
    let (n, m) = (base.n(), base.m());
    let mechanisms = (0..instance.item_count())
        .map(|i| {
            let block = values[i * n * m..(i + 1) * n * m].to_vec();
            let matrix = Array2::from_shape_vec((n, m), block).expect("n * m values");
            Mechanism::new(matrix, format!("UMOPT component {i}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let inputs = UnionInputs::new(mechanisms);
    let policy = union_policy_with(instance, &inputs, size_budget)?;
    Ok((inputs, policy))
}
