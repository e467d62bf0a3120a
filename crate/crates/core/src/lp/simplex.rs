//! Revised primal simplex for bounded variables.
//!
//! Every row gets a logical column `+e_i` (the slack, bounded `[0, inf)` for
//! `<=` rows and `[0, 0]` for `=` rows), so the all-slack basis always
//! exists. A basis mixes slack and structural columns; only the structural
//! block on the rows *not* covered by a basic slack needs a real
//! factorization: with `W` those rows and `C` the basic structurals,
//! `B z = h` reduces to `A[W, C] z_C = h_W` followed by substitution for the
//! slack positions. That core gets a sparse LU factorization and later pivots are
//! applied as product-form eta updates until the next refactorization.
//!
//! Phase one minimizes the sum of bound violations of the basic variables
//! from whatever basis is current, so it doubles as the recovery step after
//! a basis repair or after removing the bound perturbation. Phase two
//! maximizes the objective scaled by its largest coefficient.
//!
//! Degeneracy is handled by solving first with every finite bound relaxed
//! outward by a small deterministic amount, then restoring the bounds and
//! re-optimizing from the final basis, which normally takes a handful of
//! pivots. Pricing is Dantzig's rule with smallest-index tie-breaking; long
//! runs of degenerate pivots switch to Bland's rule until progress resumes.
//! Every choice is a deterministic function of the input.

use super::sparse_lu::SparseLu;
use super::{LpError, LpProblem, LpSolution, Relation};

/// Bound violation tolerated by the ratio test and by phase one.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Reduced-cost threshold on the objective scaled to unit maximum.
pub const OPTIMALITY_TOL: f64 = 1e-9;

/// Entries of a transformed column below this are treated as zero.
const PIVOT_TOL: f64 = 1e-7;
const SINGULAR_TOL: f64 = 1e-11;
const DEGENERATE_STEP: f64 = 1e-12;
/// Largest residual violation accepted when phase one stalls.
const RESIDUAL_TOL: f64 = 1e-7;
const PERTURBATION: f64 = 1e-6;
const MAX_ROUNDS: usize = 32;
/// Devex weights restart from one once any grows past this.
const DEVEX_RESET: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Hard cap on pivots and bound flips across all phases. `None` picks a
    /// limit proportional to the problem size.
    pub max_iterations: Option<usize>,
    /// Number of eta updates kept before the basis is refactorized.
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_switch: usize,
    /// Relax bounds during the main solve to break degeneracy.
    pub perturb: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: None,
            refactor_interval: 64,
            degenerate_switch: 50,
            perturb: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    Free,
}

#[derive(Debug)]
struct Eta {
    pos: usize,
    pivot: f64,
    /// Off-pivot entries of the transformed entering column.
    entries: Vec<(usize, f64)>,
}

/// Factorization of the basis at the last refactorization.
#[derive(Debug, Default)]
struct Factor {
    /// Per basis position: the covered row for slack columns.
    unit: Vec<Option<usize>>,
    /// Basis positions holding structural columns, in core column order.
    core_positions: Vec<usize>,
    /// Structural variable at each core column.
    core_vars: Vec<usize>,
    /// Rows not covered by a slack, in core row order.
    core_rows: Vec<usize>,
    /// Core column of each structural, `usize::MAX` when not in the core.
    core_index: Vec<usize>,
    lu: Option<SparseLu>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

#[derive(Debug, PartialEq, Eq)]
enum Outcome {
    Done,
    /// Phase one stalled with violations left; phase two found a ray.
    Stuck,
    /// The basis was repaired or drifted infeasible; rerun phase one.
    Restart,
}

/// What a simplex step did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    /// The entering variable moved to its opposite bound.
    Flip,
    /// The entering variable replaced the basic variable at this position,
    /// which left the basis.
    Pivot { pos: usize, leaving: usize },
    /// Nothing limits the step.
    Unbounded,
}

/// A basic variable blocking the step, with the bound it stops at.
#[derive(Debug, Clone, Copy)]
struct Block {
    pos: usize,
    ratio: f64,
    to_upper: bool,
}

struct Solver {
    rows: usize,
    structurals: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    row_start: Vec<usize>,
    row_col: Vec<usize>,
    row_val: Vec<f64>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    base_lower: Vec<f64>,
    base_upper: Vec<f64>,
    cost: Vec<f64>,
    /// Reduced costs of the current phase; zero for basic variables.
    d: Vec<f64>,
    /// Devex pricing weights.
    weight: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    factor: Factor,
    etas: Vec<Eta>,
    options: SolverOptions,
    iterations: usize,
    max_iterations: usize,
    degenerate_run: usize,
    bland: bool,
    perturbed: bool,
    repaired: bool,
}

pub(super) fn solve(problem: &LpProblem, options: &SolverOptions) -> Result<LpSolution, LpError> {
    let mut solver = Solver::new(problem, options.clone());
    if options.perturb {
        solver.perturb();
    }
    solver.refactor()?;
    let mut rounds = 0;
    loop {
        rounds += 1;
        if rounds > MAX_ROUNDS {
            return Err(LpError::IterationLimit(solver.iterations));
        }
        if solver.run(Phase::One)? == Outcome::Stuck {
            if solver.perturbed {
                solver.unperturb()?;
                continue;
            }
            return Ok(LpSolution::Infeasible);
        }
        match solver.run(Phase::Two)? {
            Outcome::Restart => continue,
            Outcome::Stuck => return Ok(LpSolution::Unbounded),
            Outcome::Done if solver.perturbed => solver.unperturb()?,
            Outcome::Done => break,
        }
    }
    let mut values: Vec<f64> = solver.x[..solver.structurals].to_vec();
    for (j, v) in values.iter_mut().enumerate() {
        *v = v.clamp(solver.lower[j], solver.upper[j]);
        if *v == 0.0 {
            *v = 0.0; // normalize -0.0
        }
    }
    let objective_value = problem.evaluate(&values);
    Ok(LpSolution::Optimal {
        values,
        objective_value,
    })
}

/// Deterministic value in `[0, 1)` (SplitMix64 finalizer).
fn jitter(seed: u64) -> f64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

impl Solver {
    fn new(problem: &LpProblem, options: SolverOptions) -> Self {
        let n = problem.num_vars();
        let rows = problem.constraints().len();

        let mut counts = vec![0usize; n];
        for c in problem.constraints() {
            for &(j, _) in &c.terms {
                counts[j] += 1;
            }
        }
        let mut col_start = Vec::with_capacity(n + 1);
        col_start.push(0);
        for &c in &counts {
            col_start.push(col_start.last().unwrap() + c);
        }
        let nnz = *col_start.last().unwrap();
        let mut col_row = vec![0; nnz];
        let mut col_val = vec![0.0; nnz];
        // Each row is scaled so its largest coefficient has magnitude one.
        let row_scale: Vec<f64> = problem
            .constraints()
            .iter()
            .map(|c| {
                let big = c.terms.iter().fold(0.0f64, |a, &(_, v)| a.max(v.abs()));
                if big > 0.0 {
                    1.0 / big
                } else {
                    1.0
                }
            })
            .collect();
        let mut fill = col_start[..n].to_vec();
        for (i, c) in problem.constraints().iter().enumerate() {
            for &(j, v) in &c.terms {
                col_row[fill[j]] = i;
                col_val[fill[j]] = v * row_scale[i];
                fill[j] += 1;
            }
        }
        let mut row_start = Vec::with_capacity(rows + 1);
        let mut row_col = Vec::with_capacity(nnz);
        let mut row_val = Vec::with_capacity(nnz);
        row_start.push(0);
        for (c, k) in problem.constraints().iter().zip(&row_scale) {
            for &(j, v) in &c.terms {
                row_col.push(j);
                row_val.push(v * k);
            }
            row_start.push(row_col.len());
        }
        let rhs: Vec<f64> = problem
            .constraints()
            .iter()
            .zip(&row_scale)
            .map(|(c, k)| c.rhs * k)
            .collect();

        let total = n + rows;
        let mut lower = Vec::with_capacity(total);
        let mut upper = Vec::with_capacity(total);
        let mut x = Vec::with_capacity(total);
        let mut state = Vec::with_capacity(total);
        for &(lo, hi) in problem.bounds() {
            lower.push(lo);
            upper.push(hi);
            if lo.is_finite() {
                x.push(lo);
                state.push(State::Lower);
            } else if hi.is_finite() {
                x.push(hi);
                state.push(State::Upper);
            } else {
                x.push(0.0);
                state.push(State::Free);
            }
        }
        for c in problem.constraints() {
            lower.push(0.0);
            upper.push(match c.relation {
                Relation::LessEq => f64::INFINITY,
                Relation::Equal => 0.0,
            });
            x.push(0.0);
            state.push(State::Basic);
        }

        let scale = problem
            .objective()
            .iter()
            .fold(0.0f64, |a, c| a.max(c.abs()));
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let mut cost = vec![0.0; total];
        for (c, &o) in cost.iter_mut().zip(problem.objective()) {
            *c = o / scale;
        }

        let max_iterations = options.max_iterations.unwrap_or(20_000 + 20 * (n + rows));
        Self {
            rows,
            structurals: n,
            col_start,
            col_row,
            col_val,
            row_start,
            row_col,
            row_val,
            rhs,
            base_lower: lower.clone(),
            base_upper: upper.clone(),
            lower,
            upper,
            cost,
            d: vec![0.0; total],
            weight: vec![1.0; total],
            x,
            state,
            basis: (n..n + rows).collect(),
            factor: Factor::default(),
            etas: Vec::new(),
            options,
            iterations: 0,
            max_iterations,
            degenerate_run: 0,
            bland: false,
            perturbed: false,
            repaired: false,
        }
    }

    fn total_vars(&self) -> usize {
        self.x.len()
    }

    /// Relaxes every finite bound outward by a small, index-dependent amount.
    fn perturb(&mut self) {
        for j in 0..self.total_vars() {
            let lo = self.lower[j];
            if lo.is_finite() {
                self.lower[j] = lo - PERTURBATION * (1.0 + lo.abs()) * (1.0 + jitter(2 * j as u64));
            }
            let hi = self.upper[j];
            if hi.is_finite() {
                self.upper[j] =
                    hi + PERTURBATION * (1.0 + hi.abs()) * (1.0 + jitter(2 * j as u64 + 1));
            }
            self.snap_nonbasic(j);
        }
        self.perturbed = true;
    }

    fn unperturb(&mut self) -> Result<(), LpError> {
        self.lower.clone_from(&self.base_lower);
        self.upper.clone_from(&self.base_upper);
        for j in 0..self.total_vars() {
            self.snap_nonbasic(j);
        }
        self.perturbed = false;
        self.refactor()
    }

    fn snap_nonbasic(&mut self, j: usize) {
        match self.state[j] {
            State::Lower => self.x[j] = self.lower[j],
            State::Upper => self.x[j] = self.upper[j],
            State::Free | State::Basic => {}
        }
    }

    /// Row covered by variable `j` when it is a slack.
    fn slack_row(&self, j: usize) -> Option<usize> {
        (j >= self.structurals).then(|| j - self.structurals)
    }

    fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let range = self.col_start[j]..self.col_start[j + 1];
        (&self.col_row[range.clone()], &self.col_val[range])
    }

    /// Factorizes the current basis. Structural columns that turn out to be
    /// dependent are swapped for the slacks of the rows they leave uncovered.
    fn refactor(&mut self) -> Result<(), LpError> {
        loop {
            let mut unit = vec![None; self.rows];
            let mut covered = vec![false; self.rows];
            let mut core_positions = Vec::new();
            let mut core_vars = Vec::new();
            for (pos, &j) in self.basis.iter().enumerate() {
                match self.slack_row(j) {
                    Some(row) => {
                        covered[row] = true;
                        unit[pos] = Some(row);
                    }
                    None => {
                        core_positions.push(pos);
                        core_vars.push(j);
                    }
                }
            }
            let core_rows: Vec<usize> = (0..self.rows).filter(|&i| !covered[i]).collect();
            let p = core_rows.len();
            debug_assert_eq!(p, core_vars.len());
            let mut lu = None;
            if p > 0 {
                let mut index_of = vec![usize::MAX; self.rows];
                for (a, &i) in core_rows.iter().enumerate() {
                    index_of[i] = a;
                }
                let columns: Vec<Vec<(usize, f64)>> = core_vars
                    .iter()
                    .map(|&j| {
                        let (rows, vals) = self.column(j);
                        rows.iter()
                            .zip(vals)
                            .filter(|&(&i, _)| index_of[i] != usize::MAX)
                            .map(|(&i, &v)| (index_of[i], v))
                            .collect()
                    })
                    .collect();
                match SparseLu::factor(p, &columns, SINGULAR_TOL) {
                    Ok(f) => lu = Some(f),
                    Err(deficient) => {
                        for (b, a) in deficient.columns.into_iter().zip(deficient.rows) {
                            let slack = self.structurals + core_rows[a];
                            self.basis[core_positions[b]] = slack;
                            self.state[slack] = State::Basic;
                            self.make_nonbasic_near(core_vars[b]);
                        }
                        self.repaired = true;
                        continue;
                    }
                }
            }
            let mut core_index = vec![usize::MAX; self.structurals];
            for (b, &j) in core_vars.iter().enumerate() {
                core_index[j] = b;
            }
            self.factor = Factor {
                unit,
                core_positions,
                core_vars,
                core_rows,
                core_index,
                lu,
            };
            self.etas.clear();
            self.recompute_basic_values();
            return Ok(());
        }
    }

    /// Moves a variable out of the basis onto its nearest bound.
    fn make_nonbasic_near(&mut self, j: usize) {
        let (lo, hi, x) = (self.lower[j], self.upper[j], self.x[j]);
        let (state, value) = match (lo.is_finite(), hi.is_finite()) {
            (true, true) if (x - lo).abs() <= (hi - x).abs() => (State::Lower, lo),
            (true, true) => (State::Upper, hi),
            (true, false) => (State::Lower, lo),
            (false, true) => (State::Upper, hi),
            (false, false) => (State::Free, 0.0),
        };
        self.state[j] = state;
        self.x[j] = value;
    }

    /// `x_B = B^{-1} (b - N x_N)`.
    fn recompute_basic_values(&mut self) {
        let mut h = self.rhs.clone();
        for j in 0..self.total_vars() {
            if self.state[j] == State::Basic || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            match self.slack_row(j) {
                Some(row) => h[row] -= xj,
                None => {
                    let (rows, vals) = self.column(j);
                    for (&i, &v) in rows.iter().zip(vals) {
                        h[i] -= v * xj;
                    }
                }
            }
        }
        let z = self.ftran(h);
        for (pos, &j) in self.basis.iter().enumerate() {
            self.x[j] = z[pos];
        }
    }

    /// Solves `B z = h`; `h` is indexed by row, the result by basis position.
    fn ftran(&self, mut h: Vec<f64>) -> Vec<f64> {
        let f = &self.factor;
        let mut z = vec![0.0; self.rows];
        if let Some(lu) = &f.lu {
            let mut core: Vec<f64> = f.core_rows.iter().map(|&i| h[i]).collect();
            lu.solve(&mut core);
            for (b, &j) in f.core_vars.iter().enumerate() {
                let zc = core[b];
                z[f.core_positions[b]] = zc;
                if zc != 0.0 {
                    let (rows, vals) = self.column(j);
                    for (&i, &v) in rows.iter().zip(vals) {
                        h[i] -= v * zc;
                    }
                }
            }
        }
        for (pos, u) in f.unit.iter().enumerate() {
            if let Some(row) = *u {
                z[pos] = h[row];
            }
        }
        for eta in &self.etas {
            let zr = z[eta.pos] / eta.pivot;
            z[eta.pos] = zr;
            if zr != 0.0 {
                for &(i, a) in &eta.entries {
                    z[i] -= a * zr;
                }
            }
        }
        z
    }

    /// Solves `B' y = g`; `g` is indexed by basis position, the result by row.
    fn btran(&self, mut g: Vec<f64>) -> Vec<f64> {
        for eta in self.etas.iter().rev() {
            let s: f64 = eta.entries.iter().map(|&(i, a)| a * g[i]).sum();
            g[eta.pos] = (g[eta.pos] - s) / eta.pivot;
        }
        let f = &self.factor;
        let mut y = vec![0.0; self.rows];
        for (pos, u) in f.unit.iter().enumerate() {
            if let Some(row) = *u {
                y[row] = g[pos];
            }
        }
        if let Some(lu) = &f.lu {
            // Remove the contribution of the slack-covered rows row by row,
            // touching only rows with a nonzero dual.
            let mut core: Vec<f64> = f.core_positions.iter().map(|&pos| g[pos]).collect();
            for (pos, u) in f.unit.iter().enumerate() {
                let yi = g[pos];
                if let (Some(row), true) = (*u, yi != 0.0) {
                    for k in self.row_start[row]..self.row_start[row + 1] {
                        let b = f.core_index[self.row_col[k]];
                        if b != usize::MAX {
                            core[b] -= self.row_val[k] * yi;
                        }
                    }
                }
            }
            lu.solve_transpose(&mut core);
            for (a, &i) in f.core_rows.iter().enumerate() {
                y[i] = core[a];
            }
        }
        y
    }

    fn violation(&self, j: usize) -> f64 {
        let x = self.x[j];
        (self.lower[j] - x).max(x - self.upper[j]).max(0.0)
    }

    fn max_violation(&self) -> f64 {
        self.basis
            .iter()
            .fold(0.0, |acc, &j| acc.max(self.violation(j)))
    }

    /// Basic costs for the phase: the objective, or the gradient of the
    /// total bound violation (`+1` below the lower bound, `-1` above the upper).
    fn basic_costs(&self, phase: Phase) -> Vec<f64> {
        self.basis
            .iter()
            .map(|&j| match phase {
                Phase::Two => self.cost[j],
                Phase::One if self.x[j] < self.lower[j] - FEASIBILITY_TOL => 1.0,
                Phase::One if self.x[j] > self.upper[j] + FEASIBILITY_TOL => -1.0,
                Phase::One => 0.0,
            })
            .collect()
    }

    /// Recomputes every reduced cost from a fresh `y = B^-T c_B`.
    fn compute_reduced_costs(&mut self, phase: Phase) {
        let y = self.btran(self.basic_costs(phase));
        for j in 0..self.total_vars() {
            self.d[j] = if self.state[j] == State::Basic {
                0.0
            } else {
                let c = if phase == Phase::Two {
                    self.cost[j]
                } else {
                    0.0
                };
                match self.slack_row(j) {
                    Some(row) => c - y[row],
                    None => {
                        let (rows, vals) = self.column(j);
                        c - rows.iter().zip(vals).map(|(&i, &v)| v * y[i]).sum::<f64>()
                    }
                }
            };
        }
    }

    /// Updates reduced costs after `q` entered at basis position `r`, using
    /// row `r` of the new basis inverse times `A`.
    /// Devex reference weights are updated from the same row.
    fn update_reduced_costs(&mut self, r: usize, q: usize, leaving: usize) {
        let dq = self.d[q];
        let wq = self.weight[q];
        self.d[q] = 0.0;
        self.weight[leaving] = 1.0;
        let mut unit = vec![0.0; self.rows];
        unit[r] = 1.0;
        let rho = self.btran(unit);
        let n = self.structurals;
        let mut row = vec![0.0; self.total_vars()];
        for (i, &p) in rho.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            row[n + i] += p;
            for k in self.row_start[i]..self.row_start[i + 1] {
                row[self.row_col[k]] += p * self.row_val[k];
            }
        }
        let mut reset = false;
        for (j, &a) in row.iter().enumerate() {
            if a != 0.0 && self.state[j] != State::Basic {
                self.d[j] -= dq * a;
                let w = a * a * wq;
                if w > self.weight[j] {
                    self.weight[j] = w;
                    reset |= w > DEVEX_RESET;
                }
            }
        }
        if reset {
            self.weight.fill(1.0);
        }
    }

    /// Entering variable and direction (`+1` increase, `-1` decrease).
    fn price(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for (j, &d) in self.d.iter().enumerate() {
            let dir = match self.state[j] {
                State::Basic => continue,
                _ if self.lower[j] == self.upper[j] => continue,
                State::Lower if d > OPTIMALITY_TOL => 1.0,
                State::Upper if d < -OPTIMALITY_TOL => -1.0,
                State::Free if d.abs() > OPTIMALITY_TOL => d.signum(),
                _ => continue,
            };
            if self.bland {
                return Some((j, dir));
            }
            let score = d * d / self.weight[j];
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    fn run(&mut self, phase: Phase) -> Result<Outcome, LpError> {
        self.degenerate_run = 0;
        self.bland = false;
        if phase == Phase::Two {
            self.repaired = false;
        }
        // Phase two updates reduced costs incrementally between refactorizations.
        let mut fresh = true;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            if self.etas.len() >= self.options.refactor_interval {
                self.refactor()?;
                fresh = true;
            }
            match phase {
                Phase::Two if fresh => {
                    if self.repaired || self.max_violation() > RESIDUAL_TOL {
                        self.repaired = false;
                        return Ok(Outcome::Restart);
                    }
                    self.compute_reduced_costs(phase);
                    fresh = false;
                }
                Phase::Two => {}
                Phase::One => {
                    if self.max_violation() <= FEASIBILITY_TOL {
                        return Ok(Outcome::Done);
                    }
                    self.compute_reduced_costs(phase);
                }
            }
            let Some((q, dir)) = self.price() else {
                if !self.etas.is_empty() {
                    // Confirm on a fresh factorization.
                    self.refactor()?;
                    fresh = true;
                    continue;
                }
                return Ok(match phase {
                    Phase::Two => Outcome::Done,
                    Phase::One if self.max_violation() <= RESIDUAL_TOL => Outcome::Done,
                    Phase::One => Outcome::Stuck,
                });
            };
            self.iterations += 1;
            match self.step(q, dir) {
                Step::Unbounded => return Ok(Outcome::Stuck),
                Step::Flip => {}
                Step::Pivot { pos, leaving } if phase == Phase::Two => {
                    self.update_reduced_costs(pos, q, leaving)
                }
                Step::Pivot { .. } => {}
            }
        }
    }

    fn entering_column(&self, q: usize) -> Vec<f64> {
        let mut h = vec![0.0; self.rows];
        match self.slack_row(q) {
            Some(row) => h[row] = 1.0,
            None => {
                let (rows, vals) = self.column(q);
                for (&i, &v) in rows.iter().zip(vals) {
                    h[i] = v;
                }
            }
        }
        h
    }

    /// One pivot or bound flip.
    fn step(&mut self, q: usize, dir: f64) -> Step {
        let alpha = self.ftran(self.entering_column(q));
        let support: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] != 0.0).collect();
        let block = self.ratio_test(&alpha, &support, dir);
        let range = self.upper[q] - self.lower[q];

        let (theta, block) = match block {
            Some(b) if b.ratio < range => (b.ratio, Some(b)),
            _ if range.is_finite() => (range, None),
            Some(b) => (b.ratio, Some(b)),
            None => return Step::Unbounded,
        };

        if theta <= DEGENERATE_STEP {
            self.degenerate_run += 1;
            if self.degenerate_run > self.options.degenerate_switch {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
            self.bland = false;
        }

        let delta = dir * theta;
        if delta != 0.0 {
            for &pos in &support {
                let j = self.basis[pos];
                self.x[j] -= delta * alpha[pos];
            }
        }

        let Some(b) = block else {
            // Bound flip: the entering variable crosses to its other bound.
            if dir > 0.0 {
                self.x[q] = self.upper[q];
                self.state[q] = State::Upper;
            } else {
                self.x[q] = self.lower[q];
                self.state[q] = State::Lower;
            }
            return Step::Flip;
        };
        let r = b.pos;
        let leave = self.basis[r];
        if b.to_upper {
            self.x[leave] = self.upper[leave];
            self.state[leave] = State::Upper;
        } else {
            self.x[leave] = self.lower[leave];
            self.state[leave] = State::Lower;
        }
        self.x[q] += delta;
        self.state[q] = State::Basic;
        self.basis[r] = q;
        let entries = support
            .iter()
            .filter(|&&i| i != r)
            .map(|&i| (i, alpha[i]))
            .collect();
        self.etas.push(Eta {
            pos: r,
            pivot: alpha[r],
            entries,
        });
        Step::Pivot {
            pos: r,
            leaving: leave,
        }
    }

    /// Step at which the basic variable at `pos` blocks, relaxed by `slack`.
    /// A variable already outside its bounds blocks only when moving back
    /// toward them, and then at the bound it re-enters through.
    fn limit(&self, pos: usize, a: f64, dir: f64, slack: f64) -> Option<Block> {
        let g = dir * a;
        let j = self.basis[pos];
        let (x, lo, hi) = (self.x[j], self.lower[j], self.upper[j]);
        let block = |ratio: f64, to_upper| {
            Some(Block {
                pos,
                ratio,
                to_upper,
            })
        };
        if g > PIVOT_TOL {
            // Decreasing.
            if x > hi + FEASIBILITY_TOL {
                block((x - hi + slack) / g, true)
            } else if x < lo - FEASIBILITY_TOL || lo == f64::NEG_INFINITY {
                None
            } else {
                block((x - lo + slack) / g, false)
            }
        } else if g < -PIVOT_TOL {
            // Increasing.
            if x < lo - FEASIBILITY_TOL {
                block((lo - x + slack) / -g, false)
            } else if x > hi + FEASIBILITY_TOL || hi == f64::INFINITY {
                None
            } else {
                block((hi - x + slack) / -g, true)
            }
        } else {
            None
        }
    }

    /// Two-pass Harris ratio test. Among rows whose exact ratio is within the
    /// relaxed minimum, the largest pivot leaves; under Bland's rule the
    /// smallest variable index leaves among pivots within a factor 1000 of
    /// the largest.
    fn ratio_test(&self, alpha: &[f64], support: &[usize], dir: f64) -> Option<Block> {
        let mut relaxed = f64::INFINITY;
        for &pos in support {
            if let Some(b) = self.limit(pos, alpha[pos], dir, FEASIBILITY_TOL) {
                relaxed = relaxed.min(b.ratio);
            }
        }
        if relaxed == f64::INFINITY {
            return None;
        }
        let candidates: Vec<Block> = support
            .iter()
            .filter_map(|&pos| self.limit(pos, alpha[pos], dir, 0.0))
            .filter(|b| b.ratio <= relaxed)
            .collect();
        let biggest = candidates
            .iter()
            .fold(0.0f64, |acc, b| acc.max(alpha[b.pos].abs()));
        let chosen = if self.bland {
            candidates
                .into_iter()
                .filter(|b| alpha[b.pos].abs() >= 1e-3 * biggest)
                .min_by_key(|b| self.basis[b.pos])
        } else {
            candidates
                .into_iter()
                .filter(|b| alpha[b.pos].abs() == biggest)
                .min_by_key(|b| self.basis[b.pos])
        };
        chosen.map(|b| Block {
            ratio: b.ratio.max(0.0),
            ..b
        })
    }
}
