//! Problem instances, acquiring matrices and the shared probability helpers.
//!
//! An [`Instance`] bundles the quality grid `V`, the score grid `S`, the prior
//! over qualities, the appraiser's row-stochastic score model and the quality
//! bar. Probabilities read from printed tables rarely sum to exactly one, so
//! construction accepts a deviation of up to [`SUM_TOLERANCE`] and rescales.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum accepted deviation of a probability vector's sum from 1.
pub const SUM_TOLERANCE: f64 = 1e-3;

/// Entries of an acquiring matrix may leave `[0, 1]` by this much before
/// construction rejects them.
pub const ENTRY_TOLERANCE: f64 = 1e-9;

/// Quality levels `V` and score levels `S`, both strictly ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityGrid {
    values: Vec<f64>,
    scores: Vec<f64>,
}

impl QualityGrid {
    pub fn new(values: Vec<f64>, scores: Vec<f64>) -> Result<Self> {
        check_ascending(&values, "quality grid")?;
        check_ascending(&scores, "score grid")?;
        Ok(Self { values, scores })
    }

    /// Grid where scores live on the same levels as qualities.
    pub fn square(values: Vec<f64>) -> Result<Self> {
        Self::new(values.clone(), values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Number of quality levels.
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Number of score levels.
    pub fn m(&self) -> usize {
        self.scores.len()
    }
}

fn check_ascending(xs: &[f64], what: &'static str) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::EmptyGrid { what });
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    for (i, w) in xs.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(Error::NonAscendingGrid { what, index: i + 1 });
        }
    }
    Ok(())
}

/// A single-item acquiring problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    grid: QualityGrid,
    prior: Vec<f64>,
    score_model: Array2<f64>,
    bar: f64,
}

impl Instance {
    /// Validates and normalizes raw inputs. See [`validate_instance`].
    pub fn new(
        grid: QualityGrid,
        prior: Vec<f64>,
        score_model: Array2<f64>,
        bar: f64,
    ) -> Result<Self> {
        let (n, m) = (grid.n(), grid.m());
        if prior.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "prior has {} entries, quality grid has {n}",
                prior.len()
            )));
        }
        if score_model.dim() != (n, m) {
            let (r, c) = score_model.dim();
            return Err(Error::DimensionMismatch(format!(
                "score model is {r}x{c}, expected {n}x{m}"
            )));
        }
        if !bar.is_finite() {
            return Err(Error::NonFinite("quality bar"));
        }
        let prior = normalize(&prior, "prior".to_string(), "prior")?;
        let mut score_model = score_model;
        for (v, mut row) in score_model.rows_mut().into_iter().enumerate() {
            let fixed = normalize(
                row.as_slice().expect("standard layout"),
                format!("score model row {v}"),
                "score model",
            )?;
            row.assign(&ArrayView1::from(&fixed));
        }
        Ok(Self {
            grid,
            prior,
            score_model,
            bar,
        })
    }

    pub fn grid(&self) -> &QualityGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        self.grid.values()
    }

    pub fn scores(&self) -> &[f64] {
        self.grid.scores()
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn m(&self) -> usize {
        self.grid.m()
    }

    /// `d(v)` for every quality level.
    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    /// The appraiser noise matrix `R`, rows indexed by quality.
    pub fn score_model(&self) -> &Array2<f64> {
        &self.score_model
    }

    /// `r(v, s)` by index.
    pub fn r(&self, v: usize, s: usize) -> f64 {
        self.score_model[[v, s]]
    }

    /// Quality bar `t`.
    pub fn bar(&self) -> f64 {
        self.bar
    }

    /// `v - t` for quality index `v`.
    pub fn margin(&self, v: usize) -> f64 {
        self.grid.values[v] - self.bar
    }

    /// Probability that quality `v` is scored at least `from` (score index).
    pub fn tail_mass(&self, v: usize, from: usize) -> f64 {
        (from..self.m()).map(|s| self.r(v, s)).sum()
    }

    pub(crate) fn check_quality(&self, v: usize) -> Result<()> {
        if v >= self.n() {
            return Err(Error::IndexOutOfRange {
                what: "quality",
                index: v,
                len: self.n(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_score(&self, s: usize) -> Result<()> {
        if s >= self.m() {
            return Err(Error::IndexOutOfRange {
                what: "score",
                index: s,
                len: self.m(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_mechanism(&self, mechanism: &Mechanism) -> Result<()> {
        if mechanism.matrix.dim() != (self.n(), self.m()) {
            let (r, c) = mechanism.matrix.dim();
            return Err(Error::DimensionMismatch(format!(
                "mechanism is {r}x{c}, instance is {}x{}",
                self.n(),
                self.m()
            )));
        }
        Ok(())
    }
}

fn normalize(xs: &[f64], what: String, kind: &'static str) -> Result<Vec<f64>> {
    for (index, &value) in xs.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite(kind));
        }
        if value < 0.0 {
            return Err(Error::NegativeProbability {
                what: kind,
                index,
                value,
            });
        }
    }
    let sum: f64 = xs.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE + 1e-12 {
        return Err(Error::SumOutOfTolerance { what, sum });
    }
    Ok(xs.iter().map(|x| x / sum).collect())
}

/// Builds an [`Instance`] from raw arrays, rescaling the prior and every score
/// row to sum to one.
pub fn validate_instance(
    raw_values: &[f64],
    raw_scores: &[f64],
    raw_prior: &[f64],
    raw_score_model: &[Vec<f64>],
    bar: f64,
) -> Result<Instance> {
    let grid = QualityGrid::new(raw_values.to_vec(), raw_scores.to_vec())?;
    let score_model = rows_to_array(raw_score_model, grid.m(), "score model")?;
    Instance::new(grid, raw_prior.to_vec(), score_model, bar)
}

pub(crate) fn rows_to_array(rows: &[Vec<f64>], width: usize, what: &str) -> Result<Array2<f64>> {
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(Error::DimensionMismatch(format!(
            "{what} row {i} has {} entries, expected {width}",
            row.len()
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), width), flat)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))
}

/// `E[v | s]`, or `None` when score `s` has zero probability.
pub fn posterior_mean(instance: &Instance, score: usize) -> Result<Option<f64>> {
    instance.check_score(score)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (v, (&value, &d)) in instance.values().iter().zip(instance.prior()).enumerate() {
        let w = d * instance.r(v, score);
        num += value * w;
        den += w;
    }
    Ok((den > 0.0).then(|| num / den))
}

/// Probability the item of true quality `true_quality` is acquired when the
/// owner reports `reported_quality`: `sum_s x(v', s) r(v, s)`.
pub fn acquire_probability(
    instance: &Instance,
    mechanism: &Mechanism,
    true_quality: usize,
    reported_quality: usize,
) -> Result<f64> {
    instance.check_mechanism(mechanism)?;
    instance.check_quality(true_quality)?;
    instance.check_quality(reported_quality)?;
    Ok(mechanism
        .row(reported_quality)
        .iter()
        .zip(instance.score_model().row(true_quality))
        .map(|(x, r)| x * r)
        .sum())
}

/// An acquiring matrix `X = [x(v', s)]`: rows are reported qualities, columns
/// are scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    matrix: Array2<f64>,
    label: String,
}

impl Mechanism {
    /// Entries within [`ENTRY_TOLERANCE`] of `[0, 1]` are clamped; anything
    /// further out is rejected.
    pub fn new(matrix: Array2<f64>, label: impl Into<String>) -> Result<Self> {
        let mut matrix = matrix;
        for ((row, col), x) in matrix.indexed_iter_mut() {
            if !x.is_finite() || *x < -ENTRY_TOLERANCE || *x > 1.0 + ENTRY_TOLERANCE {
                return Err(Error::ProbabilityOutOfRange {
                    row,
                    col,
                    value: *x,
                });
            }
            *x = x.clamp(0.0, 1.0);
        }
        Ok(Self {
            matrix,
            label: label.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], label: impl Into<String>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        Self::new(rows_to_array(rows, width, "mechanism")?, label)
    }

    pub fn zeros(n: usize, m: usize, label: impl Into<String>) -> Self {
        Self {
            matrix: Array2::zeros((n, m)),
            label: label.into(),
        }
    }

    pub fn ones(n: usize, m: usize, label: impl Into<String>) -> Self {
        Self {
            matrix: Array2::ones((n, m)),
            label: label.into(),
        }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn x(&self, v: usize, s: usize) -> f64 {
        self.matrix[[v, s]]
    }

    pub fn row(&self, v: usize) -> ArrayView1<'_, f64> {
        self.matrix.row(v)
    }

    pub fn dim(&self) -> (usize, usize) {
        self.matrix.dim()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.matrix.rows().into_iter().map(|r| r.to_vec()).collect()
    }
}

/// `k` items drawn i.i.d. from the same single-item instance.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiInstance {
    base: Instance,
    item_count: usize,
}

impl MultiInstance {
    pub fn new(base: Instance, item_count: usize) -> Result<Self> {
        if item_count == 0 {
            return Err(Error::InvalidParameter(
                "item count must be at least 1".into(),
            ));
        }
        Ok(Self { base, item_count })
    }

    pub fn base(&self) -> &Instance {
        &self.base
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn profiles(&self) -> ProfileSpace {
        ProfileSpace::new(self.item_count, self.base.n(), self.base.m())
    }

    /// `prod_j d(v_j)` for every quality profile.
    pub fn joint_prior(&self) -> Vec<f64> {
        let space = self.profiles();
        let mut tuple = vec![0; self.item_count];
        (0..space.quality_profiles())
            .map(|q| {
                space.decode_quality(q, &mut tuple);
                tuple.iter().map(|&v| self.base.prior[v]).product()
            })
            .collect()
    }

    /// `prod_j r(v_j, s_j)` at `quality_profile * m^k + score_profile`.
    pub fn joint_likelihood(&self) -> Vec<f64> {
        let space = self.profiles();
        let mut vs = vec![0; self.item_count];
        let mut ss = vec![0; self.item_count];
        let mut out = Vec::with_capacity(space.cells());
        for q in 0..space.quality_profiles() {
            space.decode_quality(q, &mut vs);
            for sp in 0..space.score_profiles() {
                space.decode_score(sp, &mut ss);
                out.push(
                    vs.iter()
                        .zip(&ss)
                        .map(|(&v, &s)| self.base.r(v, s))
                        .product(),
                );
            }
        }
        out
    }
}

/// Mixed-radix indexing of quality tuples `V^k` and score tuples `S^k`.
///
/// Tuple entry `j` has weight `base^j`, so item 0 is the fastest-moving digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProfileSpace {
    pub items: usize,
    pub n: usize,
    pub m: usize,
}

impl ProfileSpace {
    pub fn new(items: usize, n: usize, m: usize) -> Self {
        Self { items, n, m }
    }

    /// Number of quality tuples, `n^k`.
    pub fn quality_profiles(&self) -> usize {
        self.n.pow(self.items as u32)
    }

    /// Number of score tuples, `m^k`.
    pub fn score_profiles(&self) -> usize {
        self.m.pow(self.items as u32)
    }

    /// Entries in one item's tensor, `n^k * m^k`.
    pub fn cells(&self) -> usize {
        self.quality_profiles() * self.score_profiles()
    }

    pub fn cell(&self, quality_profile: usize, score_profile: usize) -> usize {
        quality_profile * self.score_profiles() + score_profile
    }

    pub fn decode_quality(&self, index: usize, out: &mut [usize]) {
        decode(index, self.n, out);
    }

    pub fn decode_score(&self, index: usize, out: &mut [usize]) {
        decode(index, self.m, out);
    }

    pub fn encode_quality(&self, tuple: &[usize]) -> usize {
        encode(tuple, self.n)
    }

    pub fn encode_score(&self, tuple: &[usize]) -> usize {
        encode(tuple, self.m)
    }

    /// Index stride of item `j` in a score-profile index.
    pub fn score_stride(&self, j: usize) -> usize {
        self.m.pow(j as u32)
    }
}

fn decode(mut index: usize, base: usize, out: &mut [usize]) {
    for digit in out.iter_mut() {
        *digit = index % base;
        index /= base;
    }
}

fn encode(tuple: &[usize], base: usize) -> usize {
    tuple.iter().rev().fold(0, |acc, &d| acc * base + d)
}

/// Per-item acquiring tensors `x_i(v, s)` of a `k`-item mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPolicy {
    pub item_count: usize,
    pub n: usize,
    pub m: usize,
    /// `tensors[i][cell]` with `cell = quality_profile * m^k + score_profile`.
    pub tensors: Vec<Vec<f64>>,
}

impl MultiPolicy {
    pub fn zeros(space: ProfileSpace) -> Self {
        Self {
            item_count: space.items,
            n: space.n,
            m: space.m,
            tensors: vec![vec![0.0; space.cells()]; space.items],
        }
    }

    /// Validates shape and clamps entries within [`ENTRY_TOLERANCE`].
    pub fn new(space: ProfileSpace, tensors: Vec<Vec<f64>>) -> Result<Self> {
        if tensors.len() != space.items || tensors.iter().any(|t| t.len() != space.cells()) {
            return Err(Error::DimensionMismatch(format!(
                "policy needs {} tensors of {} cells",
                space.items,
                space.cells()
            )));
        }
        let mut tensors = tensors;
        for (i, t) in tensors.iter_mut().enumerate() {
            for (c, x) in t.iter_mut().enumerate() {
                if !x.is_finite() || *x < -ENTRY_TOLERANCE || *x > 1.0 + ENTRY_TOLERANCE {
                    return Err(Error::ProbabilityOutOfRange {
                        row: i,
                        col: c,
                        value: *x,
                    });
                }
                *x = x.clamp(0.0, 1.0);
            }
        }
        Ok(Self {
            item_count: space.items,
            n: space.n,
            m: space.m,
            tensors,
        })
    }

    pub fn space(&self) -> ProfileSpace {
        ProfileSpace::new(self.item_count, self.n, self.m)
    }

    pub fn x(&self, item: usize, quality_profile: usize, score_profile: usize) -> f64 {
        self.tensors[item][self.space().cell(quality_profile, score_profile)]
    }

    pub(crate) fn check_against(&self, instance: &MultiInstance) -> Result<()> {
        if self.space() != instance.profiles() {
            return Err(Error::DimensionMismatch(format!(
                "policy is for k={} n={} m={}, instance is k={} n={} m={}",
                self.item_count,
                self.n,
                self.m,
                instance.item_count(),
                instance.base().n(),
                instance.base().m()
            )));
        }
        Ok(())
    }
}
