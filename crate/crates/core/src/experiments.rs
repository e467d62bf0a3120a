//! Discretized normal / log-normal priors and score models, and the variance
//! sweep comparing mechanisms as appraiser noise grows.

use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, LogNormal, Normal};

use crate::analysis::{
    acquiring_rate, expected_reward, multi_acquiring_rate, multi_expected_reward,
};
use crate::error::{Error, Result};
use crate::model::{Instance, Mechanism, MultiInstance, MultiPolicy, QualityGrid};
use crate::multi_item::{
    solve_omk_with, solve_umopt_with, union_policy_with, OmkOptions, UnionInputs,
};
use crate::single_item::{solve_om1, solve_som, tmm_optimal};

/// Stand-in mean for log-normal rows whose target mean is 0.
pub const LOGNORMAL_ZERO_MEAN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Normal,
    Lognormal,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::Lognormal => "lognormal",
        }
    }
}

/// Where the two outermost cells end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailPolicy {
    /// Half a grid step beyond the end values; mass outside is dropped
    /// before renormalizing.
    #[default]
    HalfStep,
    /// Out to infinity (zero for log-normal).
    Unbounded,
}

/// Cell boundaries: midpoints between neighbours plus the two outer edges.
fn cell_edges(grid: &[f64], tail: TailPolicy) -> Vec<f64> {
    let l = grid.len();
    let mut edges = Vec::with_capacity(l + 1);
    let (lo, hi) = match tail {
        TailPolicy::HalfStep if l > 1 => (
            grid[0] - (grid[1] - grid[0]) / 2.0,
            grid[l - 1] + (grid[l - 1] - grid[l - 2]) / 2.0,
        ),
        _ => (f64::NEG_INFINITY, f64::INFINITY),
    };
    edges.push(lo);
    edges.extend(grid.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    edges.push(hi);
    edges
}

/// Cell containing `x`; points on a boundary go to the lower cell, points
/// outside the grid to the nearest end cell.
fn cell_of(grid: &[f64], x: f64) -> usize {
    grid.windows(2).filter(|w| (w[0] + w[1]) / 2.0 < x).count()
}

fn point_mass(grid: &[f64], x: f64) -> Vec<f64> {
    let mut d = vec![0.0; grid.len()];
    d[cell_of(grid, x)] = 1.0;
    d
}

/// `(mu, sigma)` of the log-normal with the given mean and standard deviation.
fn lognormal_params(mean: f64, sd: f64) -> (f64, f64) {
    let s2 = (1.0 + (sd / mean).powi(2)).ln();
    (mean.ln() - s2 / 2.0, s2.sqrt())
}

/// Probability mass of `family(mean, sd)` on each grid cell, renormalized.
///
/// `sd == 0` is the degenerate limit: a point mass on the cell containing
/// the mean. A log-normal needs a positive mean; a zero mean is replaced by
/// [`LOGNORMAL_ZERO_MEAN`].
pub fn discretize_prior(
    family: Family,
    mean: f64,
    sd: f64,
    grid: &[f64],
    tail: TailPolicy,
) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid { what: "grid" });
    }
    if !mean.is_finite() || !sd.is_finite() || sd < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{} needs a finite mean and sd >= 0, got ({mean}, {sd})",
            family.name()
        )));
    }
    if sd == 0.0 {
        return Ok(point_mass(grid, mean));
    }
    let edges = cell_edges(grid, tail);
    let cdf: Box<dyn Fn(f64) -> f64> = match family {
        Family::Normal => {
            let dist = Normal::new(mean, sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            Box::new(move |x| dist.cdf(x))
        }
        Family::Lognormal => {
            let mean = if mean == 0.0 {
                LOGNORMAL_ZERO_MEAN
            } else {
                mean
            };
            if mean < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "log-normal mean must be >= 0, got {mean}"
                )));
            }
            let (mu, sigma) = lognormal_params(mean, sd);
            let dist =
                LogNormal::new(mu, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            Box::new(move |x| if x <= 0.0 { 0.0 } else { dist.cdf(x) })
        }
    };
    let at = |x: f64| match x {
        x if x == f64::NEG_INFINITY => 0.0,
        x if x == f64::INFINITY => 1.0,
        x => cdf(x),
    };
    let cum: Vec<f64> = edges.iter().map(|&e| at(e)).collect();
    let mass: Vec<f64> = cum.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    let total: f64 = mass.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{}({mean}, {sd}) puts no mass on the grid",
            family.name()
        )));
    }
    Ok(mass.into_iter().map(|p| p / total).collect())
}

/// Row `v` is `family(mean = v, sd = sqrt(variance))` over the score grid.
pub fn build_score_model(
    family: Family,
    variance: f64,
    grid: &QualityGrid,
    tail: TailPolicy,
) -> Result<Array2<f64>> {
    if variance.is_nan() || variance < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "variance must be >= 0, got {variance}"
        )));
    }
    let sd = variance.sqrt();
    let mut r = Array2::zeros((grid.n(), grid.m()));
    for (v, &value) in grid.values().iter().enumerate() {
        let row = discretize_prior(family, value, sd, grid.scores(), tail)?;
        r.row_mut(v).assign(&ndarray::ArrayView1::from(&row));
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MechanismKind {
    #[serde(rename = "SOM")]
    Som,
    #[serde(rename = "TMM")]
    Tmm,
    #[serde(rename = "OM1")]
    Om1,
    #[serde(rename = "OMk")]
    Omk,
    #[serde(rename = "UM_TMM")]
    UmTmm,
    #[serde(rename = "UMOPT")]
    Umopt,
    #[serde(rename = "kxOM1")]
    KxOm1,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 7] = [
        MechanismKind::Som,
        MechanismKind::Tmm,
        MechanismKind::Om1,
        MechanismKind::Omk,
        MechanismKind::UmTmm,
        MechanismKind::Umopt,
        MechanismKind::KxOm1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::Som => "SOM",
            MechanismKind::Tmm => "TMM",
            MechanismKind::Om1 => "OM1",
            MechanismKind::Omk => "OMk",
            MechanismKind::UmTmm => "UM_TMM",
            MechanismKind::Umopt => "UMOPT",
            MechanismKind::KxOm1 => "kxOM1",
        }
    }

    fn is_multi(self) -> bool {
        matches!(
            self,
            MechanismKind::Omk | MechanismKind::UmTmm | MechanismKind::Umopt
        )
    }
}

fn default_item_count() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub family: Family,
    pub prior_mean: f64,
    pub prior_sd: f64,
    /// Score-noise variances, ascending.
    pub variance_grid: Vec<f64>,
    pub grid: QualityGrid,
    pub bar: f64,
    pub mechanisms: Vec<MechanismKind>,
    #[serde(default = "default_item_count")]
    pub item_count: usize,
    /// Unused by the deterministic mechanisms; kept for reproducible configs.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tail: TailPolicy,
    #[serde(default)]
    pub size_budget: Option<usize>,
}

impl SweepConfig {
    /// Seven levels `{0, 1/6, ..., 1}`, `t = 0.25`, prior `N(0.3, 0.25)`, two
    /// items, every mechanism, variances `0, step, ..., 0.6`.
    pub fn standard(family: Family, step: f64) -> Self {
        let levels: Vec<f64> = (0..7).map(|i| f64::from(i) / 6.0).collect();
        let count = (0.6 / step + 1e-9).floor() as usize;
        Self {
            family,
            prior_mean: 0.3,
            prior_sd: 0.25,
            variance_grid: (0..=count).map(|i| i as f64 * step).collect(),
            grid: QualityGrid::square(levels).expect("ascending levels"),
            bar: 0.25,
            mechanisms: MechanismKind::ALL.to_vec(),
            item_count: 2,
            seed: 0,
            tail: TailPolicy::default(),
            size_budget: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        // Deserialization skips the grid constructor's checks.
        QualityGrid::new(self.grid.values().to_vec(), self.grid.scores().to_vec())?;
        if self.mechanisms.is_empty() {
            return Err(Error::InvalidParameter("no mechanisms requested".into()));
        }
        if self.variance_grid.is_empty() {
            return Err(Error::InvalidParameter("empty variance grid".into()));
        }
        if self
            .variance_grid
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::InvalidParameter(
                "variances must be finite and >= 0".into(),
            ));
        }
        if self.variance_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("variance grid must ascend".into()));
        }
        if self.item_count == 0 && self.mechanisms.iter().any(|m| m.is_multi()) {
            return Err(Error::InvalidParameter("item_count must be >= 1".into()));
        }
        Ok(())
    }

    /// The instance at one noise level.
    pub fn instance(&self, variance: f64) -> Result<Instance> {
        let prior = discretize_prior(
            self.family,
            self.prior_mean,
            self.prior_sd,
            self.grid.values(),
            self.tail,
        )?;
        let r = build_score_model(self.family, variance, &self.grid, self.tail)?;
        Instance::new(self.grid.clone(), prior, r, self.bar)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub family: Family,
    pub variance: f64,
    pub mechanism: MechanismKind,
    pub per_item_reward: f64,
    pub overall_rate: f64,
    pub per_quality_rates: Vec<f64>,
}

fn single_record(
    config: &SweepConfig,
    variance: f64,
    kind: MechanismKind,
    instance: &Instance,
    mech: &Mechanism,
) -> Result<SweepRecord> {
    let rate = acquiring_rate(instance, mech)?;
    Ok(SweepRecord {
        family: config.family,
        variance,
        mechanism: kind,
        per_item_reward: expected_reward(instance, mech)?,
        overall_rate: rate.overall,
        per_quality_rates: rate.per_quality,
    })
}

fn multi_record(
    config: &SweepConfig,
    variance: f64,
    kind: MechanismKind,
    multi: &MultiInstance,
    policy: &MultiPolicy,
) -> Result<SweepRecord> {
    let rate = multi_acquiring_rate(multi, policy)?;
    Ok(SweepRecord {
        family: config.family,
        variance,
        mechanism: kind,
        per_item_reward: multi_expected_reward(multi, policy)? / multi.item_count() as f64,
        overall_rate: rate.overall,
        per_quality_rates: rate.per_quality,
    })
}

fn run_point(config: &SweepConfig, variance: f64) -> Result<Vec<SweepRecord>> {
    let instance = config.instance(variance)?;
    let budget = config
        .size_budget
        .unwrap_or(crate::multi_item::DEFAULT_SIZE_BUDGET);
    let needs_multi = config.mechanisms.iter().any(|m| m.is_multi());
    let multi = if needs_multi {
        Some(MultiInstance::new(instance.clone(), config.item_count)?)
    } else {
        None
    };
    let mut tmm = None;
    let mut om1 = None;
    let mut records = Vec::with_capacity(config.mechanisms.len());
    for &kind in &config.mechanisms {
        let record = match kind {
            MechanismKind::Som => {
                single_record(config, variance, kind, &instance, &solve_som(&instance))?
            }
            MechanismKind::Tmm => {
                let mech = tmm.get_or_insert_with(|| tmm_optimal(&instance).1);
                single_record(config, variance, kind, &instance, mech)?
            }
            // k independent copies earn k times the single-item reward, so
            // per item the two coincide.
            MechanismKind::Om1 | MechanismKind::KxOm1 => {
                if om1.is_none() {
                    om1 = Some(solve_om1(&instance)?);
                }
                let mech = om1.as_ref().expect("just solved");
                single_record(config, variance, kind, &instance, mech)?
            }
            MechanismKind::Omk => {
                let multi = multi.as_ref().expect("multi instance built");
                let options = OmkOptions {
                    size_budget: budget,
                    ..OmkOptions::default()
                };
                let policy = solve_omk_with(multi, &options)?;
                multi_record(config, variance, kind, multi, &policy)?
            }
            MechanismKind::UmTmm => {
                let multi = multi.as_ref().expect("multi instance built");
                let mech = tmm.get_or_insert_with(|| tmm_optimal(&instance).1);
                let inputs = UnionInputs::copies(mech, config.item_count);
                let policy = union_policy_with(multi, &inputs, budget)?;
                multi_record(config, variance, kind, multi, &policy)?
            }
            MechanismKind::Umopt => {
                let multi = multi.as_ref().expect("multi instance built");
                let (_, policy) = solve_umopt_with(multi, budget)?;
                multi_record(config, variance, kind, multi, &policy)?
            }
        };
        records.push(record);
    }
    Ok(records)
}

/// Runs every requested mechanism at every variance. Grid points are solved
/// in parallel; records come back in grid order, mechanisms in config order.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let points = config
        .variance_grid
        .par_iter()
        .map(|&variance| run_point(config, variance))
        .collect::<Result<Vec<_>>>()?;
    Ok(points.into_iter().flatten().collect())
}

/// Nine significant digits, shortest form.
pub fn format_sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("valid float");
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    rounded.to_string()
}

pub fn csv_header(n: usize) -> Vec<String> {
    let mut header: Vec<String> = [
        "family",
        "variance",
        "mechanism",
        "per_item_reward",
        "overall_rate",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..n).map(|v| format!("rate_v{v}")));
    header
}

/// Writes `records` with [`csv_header`] for `n` quality levels.
pub fn write_csv<W: Write>(out: W, n: usize, records: &[SweepRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Output(e.to_string());
    writer.write_record(csv_header(n)).map_err(io)?;
    for r in records {
        let mut row = vec![
            r.family.name().to_string(),
            format_sig9(r.variance),
            r.mechanism.name().to_string(),
            format_sig9(r.per_item_reward),
            format_sig9(r.overall_rate),
        ];
        row.extend(r.per_quality_rates.iter().map(|&p| format_sig9(p)));
        writer.write_record(&row).map_err(io)?;
    }
    writer.flush().map_err(|e| Error::Output(e.to_string()))
}
