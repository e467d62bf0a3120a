//! Bounded-variable linear programming.
//!
//! Problems are stated as `maximize c'x` subject to sparse rows `a'x <= b` or
//! `a'x = b` and per-variable bounds `lo <= x <= hi` (either side may be
//! infinite). [`solve_lp`] runs a two-phase revised primal simplex; see
//! [`simplex`] for the factorization and pivoting rules.

mod simplex;
mod sparse_lu;

use std::fmt;

use thiserror::Error;

pub use simplex::{SolverOptions, FEASIBILITY_TOL, OPTIMALITY_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("basis matrix became numerically singular")]
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    LessEq,
    Equal,
}

/// One row `sum_j terms[j].1 * x[terms[j].0] (<= | =) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    /// Maximize `objective'x` with every variable in `[0, +inf)`.
    pub fn new(objective: Vec<f64>) -> Self {
        let bounds = vec![(0.0, f64::INFINITY); objective.len()];
        Self {
            objective,
            constraints: Vec::new(),
            bounds,
        }
    }

    /// Maximize `objective'x` with every variable in `[lo, hi]`.
    pub fn with_uniform_bounds(objective: Vec<f64>, lo: f64, hi: f64) -> Self {
        let bounds = vec![(lo, hi); objective.len()];
        Self {
            objective,
            constraints: Vec::new(),
            bounds,
        }
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.bounds[var] = (lo, hi);
    }

    /// Adds `terms'x <= rhs`. Duplicate indices are summed.
    pub fn add_le(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.push(terms, Relation::LessEq, rhs);
    }

    /// Adds `terms'x = rhs`. Duplicate indices are summed.
    pub fn add_eq(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.push(terms, Relation::Equal, rhs);
    }

    /// Adds `a'x <= rhs` from a dense coefficient vector.
    pub fn add_dense_le(&mut self, a: &[f64], rhs: f64) {
        let terms = a
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, &v)| (j, v))
            .collect();
        self.push(terms, Relation::LessEq, rhs);
    }

    fn push(&mut self, mut terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (j, v) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += v,
                _ => merged.push((j, v)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        self.constraints.push(Constraint {
            terms: merged,
            relation,
            rhs,
        });
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Malformed(
                "non-finite objective coefficient".into(),
            ));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan()
                || hi.is_nan()
                || lo > hi
                || lo == f64::INFINITY
                || hi == f64::NEG_INFINITY
            {
                return Err(LpError::Malformed(format!(
                    "variable {j} has invalid bounds [{lo}, {hi}]"
                )));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(LpError::Malformed(format!("row {i} has non-finite rhs")));
            }
            for &(j, v) in &c.terms {
                if j >= n {
                    return Err(LpError::Malformed(format!(
                        "row {i} references variable {j} but the objective has {n}"
                    )));
                }
                if !v.is_finite() {
                    return Err(LpError::Malformed(format!(
                        "row {i} has a non-finite coefficient"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `a'x` for row `row`.
    pub fn row_activity(&self, row: usize, x: &[f64]) -> f64 {
        self.constraints[row]
            .terms
            .iter()
            .map(|&(j, v)| v * x[j])
            .sum()
    }

    /// Largest violation of any row or bound by `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, c) in self.constraints.iter().enumerate() {
            let act = self.row_activity(i, x);
            let v = match c.relation {
                Relation::LessEq => act - c.rhs,
                Relation::Equal => (act - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (&xj, &(lo, hi)) in x.iter().zip(&self.bounds) {
            worst = worst.max(lo - xj).max(xj - hi);
        }
        worst
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl LpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        }
    }
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpSolution {
    Optimal {
        values: Vec<f64>,
        objective_value: f64,
    },
    Infeasible,
    Unbounded,
}

impl LpSolution {
    pub fn status(&self) -> LpStatus {
        match self {
            LpSolution::Optimal { .. } => LpStatus::Optimal,
            LpSolution::Infeasible => LpStatus::Infeasible,
            LpSolution::Unbounded => LpStatus::Unbounded,
        }
    }

    pub fn values(&self) -> Option<&[f64]> {
        match self {
            LpSolution::Optimal { values, .. } => Some(values),
            _ => None,
        }
    }

    pub fn objective_value(&self) -> Option<f64> {
        match self {
            LpSolution::Optimal {
                objective_value, ..
            } => Some(*objective_value),
            _ => None,
        }
    }
}

/// Solves `problem` with default tolerances.
///
/// Infeasible and unbounded problems are reported through the returned
/// status; errors are reserved for malformed input and numerical breakdown.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    solve_lp_with(problem, &SolverOptions::default())
}

pub fn solve_lp_with(problem: &LpProblem, options: &SolverOptions) -> Result<LpSolution, LpError> {
    problem.validate()?;
    simplex::solve(problem, options)
}
