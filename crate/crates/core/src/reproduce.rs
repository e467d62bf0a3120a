//! Reproductions of the published worked instances: each recomputes the
//! quantities printed alongside an instance and compares them with the
//! printed values at fixed tolerances.

use std::time::Instant;

use serde::Serialize;

use crate::analysis::{
    check_ic, check_monotone, expected_reward, multi_check_ic, multi_check_monotone,
    multi_expected_reward, DEFAULT_IC_TOL, DEFAULT_MONOTONE_TOL,
};
use crate::model::{Instance, MultiInstance};
use crate::multi_item::{
    ranking_mechanism, rm_ic_audit, solve_omk, solve_umopt, union_policy, RankClass, UnionInputs,
};
use crate::registry::{
    self, EXAMPLE1, THM6_OM1_VS_TMM, THM6_TMM_VS_SOM, THM7_RANKING, THM9_OMK_VS_UM,
    THM9_UM_VS_KXOM1,
};
use crate::single_item::{menu_size, solve_om1, solve_som, tmm_optimal, MENU_TOL};
use crate::{Error, Result};

/// Names accepted by [`reproduce`], in report order. `thm7` is accepted as a
/// short form of `thm7_ranking`.
pub const REPRODUCTIONS: [&str; 6] = [
    EXAMPLE1,
    THM6_TMM_VS_SOM,
    THM6_OM1_VS_TMM,
    THM7_RANKING,
    THM9_OMK_VS_UM,
    THM9_UM_VS_KXOM1,
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub quantity: String,
    pub expected: String,
    pub actual: String,
    pub tolerance: Option<f64>,
    pub passed: bool,
}

impl Check {
    /// `|actual - expected| <= tolerance`.
    pub fn close(quantity: impl Into<String>, actual: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            quantity: quantity.into(),
            expected: format!("{expected}"),
            actual: format!("{actual:.9}"),
            tolerance: Some(tolerance),
            passed: (actual - expected).abs() <= tolerance,
        }
    }

    pub fn holds(quantity: impl Into<String>, passed: bool, actual: impl Into<String>) -> Self {
        Self {
            quantity: quantity.into(),
            expected: "true".into(),
            actual: actual.into(),
            tolerance: None,
            passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reproduction {
    pub name: String,
    pub checks: Vec<Check>,
    /// Related quantities reported for context; they never fail.
    pub notes: Vec<String>,
    pub seconds: f64,
}

impl Reproduction {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, quantity: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.quantity == quantity)
    }
}

fn canonical(name: &str) -> Option<&'static str> {
    if name == "thm7" {
        return Some(THM7_RANKING);
    }
    REPRODUCTIONS.iter().copied().find(|&n| n == name)
}

pub fn reproduce(name: &str) -> Result<Reproduction> {
    let name = canonical(name)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown reproduction {name:?}")))?;
    let start = Instant::now();
    let mut notes = Vec::new();
    let checks = match name {
        EXAMPLE1 => example1(&mut notes)?,
        THM6_TMM_VS_SOM => tmm_vs_som(&mut notes)?,
        THM6_OM1_VS_TMM => om1_vs_tmm(&mut notes)?,
        THM7_RANKING => ranking(&mut notes)?,
        THM9_OMK_VS_UM => omk_vs_um(&mut notes)?,
        THM9_UM_VS_KXOM1 => um_vs_copies(&mut notes)?,
        _ => unreachable!("canonical names only"),
    };
    Ok(Reproduction {
        name: name.to_string(),
        checks,
        notes,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn reproduce_all() -> Result<Vec<Reproduction>> {
    REPRODUCTIONS.iter().map(|n| reproduce(n)).collect()
}

fn om1_reward(instance: &Instance) -> Result<f64> {
    expected_reward(instance, &solve_om1(instance)?)
}

fn example1(notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let inst = registry::example1();
    let x = registry::example1_printed_x();
    let ic = check_ic(&inst, &x, DEFAULT_IC_TOL)?;
    let mono = check_monotone(&x, DEFAULT_MONOTONE_TOL);
    let size = menu_size(&x, MENU_TOL);
    let printed = expected_reward(&inst, &x)?;
    let om1 = om1_reward(&inst)?;
    notes.push(format!(
        "SOM reward {:.7}",
        expected_reward(&inst, &solve_som(&inst))?
    ));
    Ok(vec![
        Check::holds(
            "printed X is IC",
            ic.passed,
            format!("worst {:.2e}", ic.worst()),
        ),
        Check::holds(
            "printed X is monotone",
            mono.passed,
            format!("worst {:.2e}", mono.worst()),
        ),
        Check::close("printed X menu size", size as f64, 3.0, 0.0),
        Check::close("printed X reward - OM1 objective", printed - om1, 0.0, 1e-6),
    ])
}

fn tmm_vs_som(notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let inst = registry::thm6_tmm_vs_som();
    let som = expected_reward(&inst, &solve_som(&inst))?;
    let (params, _, tmm) = tmm_optimal(&inst);
    notes.push(format!(
        "optimal TMM: b1={:?} b2={:?} alpha={:.6}",
        params.b1, params.b2, params.alpha
    ));
    notes.push(format!(
        "printed X_TMM reward {:.7}, OM1 objective {:.7}",
        expected_reward(&inst, &registry::thm6_printed_tmm())?,
        om1_reward(&inst)?
    ));
    Ok(vec![
        Check::close("SOM reward", som, 0.0, 1e-9),
        Check::close("optimal TMM reward", tmm, 0.0002075, 1e-4),
    ])
}

fn om1_vs_tmm(notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let inst = registry::thm6_om1_vs_tmm();
    let (params, _, tmm) = tmm_optimal(&inst);
    notes.push(format!(
        "optimal TMM: b1={:?} b2={:?} alpha={:.6}",
        params.b1, params.b2, params.alpha
    ));
    notes.push(format!(
        "printed X_OM1 reward {:.7}",
        expected_reward(&inst, &registry::thm6_printed_om1())?
    ));
    Ok(vec![
        Check::close("optimal TMM reward", tmm, 0.0, 1e-6),
        Check::close("OM1 objective", om1_reward(&inst)?, 0.000503, 1e-4),
    ])
}

fn ranking(notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let inst = MultiInstance::new(registry::thm7_ranking(), 2)?;
    let policy = ranking_mechanism(&inst)?;
    let printed = registry::thm7_printed_aggregates();
    let mut checks = Vec::new();
    for rank in RankClass::ALL {
        let mut worst = 0.0f64;
        for (v1, row) in printed[rank.index()].iter().enumerate() {
            for (v2, &p) in row.iter().enumerate() {
                worst = worst.max((policy.aggregate(rank)[(v1, v2)] - p).abs());
            }
        }
        checks.push(Check::close(
            format!("max |x_{} - printed|", rank.name()),
            worst,
            0.0,
            1e-3,
        ));
    }
    let audit = rm_ic_audit(&policy);
    notes.push(format!("{} IC violations in total", audit.len()));
    // True pair (2/3, 0) gains by claiming the ordering is reversed.
    match audit
        .iter()
        .find(|v| (v.v1, v.v2, v.better) == (2, 0, RankClass::Smaller))
    {
        Some(v) => {
            let honest = policy.aggregate(v.truthful)[(2, 0)];
            notes.push(format!(
                "violation (2/3, 0): {honest:.3} < {:.3}",
                honest + v.gain
            ));
            checks.push(Check::close("gain at (2/3, 0)", v.gain, 0.05, 1e-3));
        }
        None => checks.push(Check::holds("violation at (2/3, 0)", false, "none")),
    }
    Ok(checks)
}

fn omk_vs_um(notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let inst = MultiInstance::new(registry::thm9_omk_vs_um(), 2)?;
    let om1 = solve_om1(inst.base())?;
    let um = union_policy(&inst, &UnionInputs::copies(&om1, 2))?;
    let omk = solve_omk(&inst)?;
    let ic = multi_check_ic(&inst, &omk, DEFAULT_IC_TOL)?;
    let mono = multi_check_monotone(&inst, &omk, DEFAULT_MONOTONE_TOL)?;
    notes.push(format!("OM2 IC {} / monotone {}", ic.passed, mono.passed));
    Ok(vec![
        Check::close(
            "UM over two OM1 copies",
            multi_expected_reward(&inst, &um)?,
            0.0,
            1e-6,
        ),
        Check::close(
            "OM2 objective",
            multi_expected_reward(&inst, &omk)?,
            0.0085264,
            1e-4,
        ),
    ])
}

fn um_vs_copies(notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let inst = MultiInstance::new(registry::thm9_um_vs_kxom1(), 2)?;
    let om1 = solve_om1(inst.base())?;
    let single = expected_reward(inst.base(), &om1)?;
    let um = union_policy(&inst, &UnionInputs::copies(&om1, 2))?;
    let (_, umopt) = solve_umopt(&inst)?;
    notes.push(format!(
        "UMOPT objective {:.7}",
        multi_expected_reward(&inst, &umopt)?
    ));
    Ok(vec![
        Check::close("2 x OM1 reward", 2.0 * single, 0.0, 1e-6),
        Check::close(
            "UM over two OM1 copies",
            multi_expected_reward(&inst, &um)?,
            0.0248746,
            1e-4,
        ),
    ])
}

/// One CSV row per check: `reproduction,check,expected,actual,tolerance,result`.
pub fn write_csv<W: std::io::Write>(out: W, reports: &[Reproduction]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Output(e.to_string());
    w.write_record([
        "reproduction",
        "check",
        "expected",
        "actual",
        "tolerance",
        "result",
    ])
    .map_err(io)?;
    for r in reports {
        for c in &r.checks {
            let tol = c.tolerance.map(|t| format!("{t:e}")).unwrap_or_default();
            let result = if c.passed { "pass" } else { "FAIL" };
            w.write_record([&r.name, &c.quantity, &c.expected, &c.actual, &tol, result])
                .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::Output(e.to_string()))?;
    Ok(())
}
