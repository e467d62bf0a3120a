#![allow(dead_code)]

use acquimech::lp::{LpProblem, Relation};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random LP with finite bounds, so the feasible set is a polytope and the
/// optimum (when feasible) sits on a vertex.
pub fn random_lp(rng: &mut ChaCha8Rng) -> LpProblem {
    let n = rng.gen_range(1..=8);
    let rows = rng.gen_range(0..=12);
    let coef = |rng: &mut ChaCha8Rng| f64::from(rng.gen_range(-50..=50)) / 10.0;
    let objective: Vec<f64> = (0..n).map(|_| coef(rng)).collect();
    let mut lp = LpProblem::new(objective);
    let mut anchor = Vec::with_capacity(n);
    for j in 0..n {
        let lo = f64::from(rng.gen_range(-3..=1));
        let hi = lo + f64::from(rng.gen_range(0..=4));
        lp.set_bounds(j, lo, hi);
        anchor.push(rng.gen_range(lo..=hi));
    }
    let infeasible = rng.gen_bool(0.1);
    for _ in 0..rows {
        let mut terms = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.7) {
                terms.push((j, coef(rng)));
            }
        }
        let at_anchor: f64 = terms.iter().map(|&(j, a)| a * anchor[j]).sum();
        if !terms.is_empty() && rng.gen_bool(0.15) {
            lp.add_eq(terms, at_anchor);
        } else {
            let shift = if infeasible {
                -rng.gen_range(0.0..5.0)
            } else {
                rng.gen_range(0.0..3.0)
            };
            lp.add_le(terms, at_anchor + shift);
        }
    }
    lp
}

/// Oracle outcome: `None` for infeasible, else the best vertex objective.
pub fn vertex_enumeration(lp: &LpProblem) -> Option<f64> {
    let n = lp.num_vars();
    let rows = lp.constraints();
    let bounds = lp.bounds();
    let equalities = independent_equalities(lp)?;
    let inequalities: Vec<usize> = (0..rows.len())
        .filter(|&i| rows[i].relation == Relation::LessEq)
        .collect();
    let dense: Vec<Vec<f64>> = rows
        .iter()
        .map(|c| {
            let mut a = vec![0.0; n];
            for &(j, v) in &c.terms {
                a[j] += v;
            }
            a
        })
        .collect();

    let mut best: Option<f64> = None;
    // Choose which variables sit at a bound; the rest are pinned by active rows.
    for fixed_mask in 0u32..(1 << n) {
        let free: Vec<usize> = (0..n).filter(|j| fixed_mask & (1 << j) == 0).collect();
        let fixed: Vec<usize> = (0..n).filter(|j| fixed_mask & (1 << j) != 0).collect();
        let need = free.len();
        if need < equalities.len() {
            continue;
        }
        let extra = need - equalities.len();
        if extra > inequalities.len() {
            continue;
        }
        for side_mask in 0u32..(1 << fixed.len()) {
            let mut x = vec![0.0; n];
            for (k, &j) in fixed.iter().enumerate() {
                x[j] = if side_mask & (1 << k) == 0 {
                    bounds[j].0
                } else {
                    bounds[j].1
                };
            }
            for_each_subset(inequalities.len(), extra, &mut |subset| {
                let active: Vec<usize> = equalities
                    .iter()
                    .copied()
                    .chain(subset.iter().map(|&k| inequalities[k]))
                    .collect();
                let mut candidate = x.clone();
                if solve_active(&dense, lp, &active, &free, &mut candidate)
                    && feasible(&dense, lp, &candidate)
                {
                    let value = lp.evaluate(&candidate);
                    best = Some(best.map_or(value, |b: f64| b.max(value)));
                }
            });
        }
    }
    best
}

/// Drops equality rows implied by earlier ones; `None` if they contradict.
fn independent_equalities(lp: &LpProblem) -> Option<Vec<usize>> {
    let n = lp.num_vars();
    let mut basis: Vec<(usize, Vec<f64>)> = Vec::new(); // (pivot column, reduced row with rhs)
    let mut kept = Vec::new();
    for (i, c) in lp.constraints().iter().enumerate() {
        if c.relation != Relation::Equal {
            continue;
        }
        let mut row = vec![0.0; n + 1];
        for &(j, v) in &c.terms {
            row[j] += v;
        }
        row[n] = c.rhs;
        for (p, b) in &basis {
            let f = row[*p] / b[*p];
            if f != 0.0 {
                for j in 0..=n {
                    row[j] -= f * b[j];
                }
            }
        }
        let pivot = (0..n).max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()));
        match pivot {
            Some(p) if row[p].abs() > 1e-9 => {
                basis.push((p, row));
                kept.push(i);
            }
            _ if row[n].abs() > 1e-9 => return None,
            _ => {}
        }
    }
    Some(kept)
}

fn for_each_subset(len: usize, size: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(
        start: usize,
        len: usize,
        size: usize,
        cur: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if cur.len() == size {
            f(cur);
            return;
        }
        for i in start..len {
            if len - i < size - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, len, size, cur, f);
            cur.pop();
        }
    }
    rec(0, len, size, &mut Vec::with_capacity(size), f);
}

/// Solves the active rows for the free variables with Gaussian elimination.
fn solve_active(
    dense: &[Vec<f64>],
    lp: &LpProblem,
    active: &[usize],
    free: &[usize],
    x: &mut [f64],
) -> bool {
    let k = free.len();
    if k == 0 {
        return true;
    }
    let rows = lp.constraints();
    let mut m: Vec<Vec<f64>> = active
        .iter()
        .map(|&i| {
            let mut row: Vec<f64> = free.iter().map(|&j| dense[i][j]).collect();
            let fixed: f64 = (0..x.len())
                .filter(|j| !free.contains(j))
                .map(|j| dense[i][j] * x[j])
                .sum();
            row.push(rows[i].rhs - fixed);
            row
        })
        .collect();
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot][col].abs() < 1e-10 {
            return false;
        }
        m.swap(col, pivot);
        for r in 0..k {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    let pivot_row = m[col].clone();
                    for (a, b) in m[r][col..=k].iter_mut().zip(&pivot_row[col..=k]) {
                        *a -= f * b;
                    }
                }
            }
        }
    }
    for (r, &j) in free.iter().enumerate() {
        x[j] = m[r][k] / m[r][r];
    }
    true
}

fn feasible(dense: &[Vec<f64>], lp: &LpProblem, x: &[f64]) -> bool {
    const TOL: f64 = 1e-9;
    for (j, &(lo, hi)) in lp.bounds().iter().enumerate() {
        if x[j] < lo - TOL || x[j] > hi + TOL {
            return false;
        }
    }
    for (i, c) in lp.constraints().iter().enumerate() {
        let act: f64 = dense[i].iter().zip(x).map(|(a, v)| a * v).sum();
        let scale = 1.0 + c.rhs.abs();
        let ok = match c.relation {
            Relation::LessEq => act <= c.rhs + TOL * scale,
            Relation::Equal => (act - c.rhs).abs() <= TOL * scale,
        };
        if !ok {
            return false;
        }
    }
    true
}
