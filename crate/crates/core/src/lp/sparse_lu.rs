//! Sparse LU factorization with Markowitz pivot selection.
//!
//! Pivots are chosen among the few sparsest remaining columns, minimizing
//! `(row count - 1) * (column count - 1)` subject to a threshold test
//! against the largest entry of the column. Columns without an acceptable
//! pivot are reported, together with the rows left unpivoted, so the caller
//! can repair the basis.

const THRESHOLD: f64 = 0.1;
const CANDIDATE_COLUMNS: usize = 4;

#[derive(Debug, Clone)]
struct Pivot {
    row: usize,
    col: usize,
    value: f64,
    /// Multipliers `(row, l)`: row `row` loses `l` times the pivot row.
    lower: Vec<(usize, f64)>,
    /// Pivot-row entries in columns pivoted later.
    upper: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) struct SparseLu {
    n: usize,
    pivots: Vec<Pivot>,
}

/// Columns with no usable pivot and the rows left over, equally many.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Deficient {
    pub columns: Vec<usize>,
    pub rows: Vec<usize>,
}

fn remove_entry(list: &mut Vec<(usize, f64)>, key: usize) -> Option<f64> {
    let pos = list.iter().position(|&(k, _)| k == key)?;
    Some(list.swap_remove(pos).1)
}

fn remove_index(list: &mut Vec<usize>, key: usize) {
    if let Some(pos) = list.iter().position(|&k| k == key) {
        list.swap_remove(pos);
    }
}

fn lookup(list: &[(usize, f64)], key: usize) -> f64 {
    list.iter()
        .find(|&&(k, _)| k == key)
        .map_or(0.0, |&(_, v)| v)
}

impl SparseLu {
    /// Factorizes the `n x n` matrix given column by column as `(row, value)`
    /// lists. Entries of magnitude at most `tol` never serve as pivots.
    pub(crate) fn factor(
        n: usize,
        columns: &[Vec<(usize, f64)>],
        tol: f64,
    ) -> Result<Self, Deficient> {
        debug_assert_eq!(columns.len(), n);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut pattern: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (j, col) in columns.iter().enumerate() {
            for &(i, v) in col {
                if v != 0.0 {
                    rows[i].push((j, v));
                    pattern[j].push(i);
                }
            }
        }
        let mut col_done = vec![false; n];
        let mut row_done = vec![false; n];
        let mut dependent = Vec::new();
        let mut pivots = Vec::with_capacity(n);
        let mut slot = vec![usize::MAX; n];
        let mut remaining = n;

        while remaining > 0 {
            // The sparsest active columns, ties by index.
            let mut candidates: Vec<(usize, usize)> = Vec::with_capacity(CANDIDATE_COLUMNS + 1);
            for j in (0..n).filter(|&j| !col_done[j]) {
                let count = pattern[j].len();
                if candidates.len() < CANDIDATE_COLUMNS || count < candidates.last().unwrap().0 {
                    let at = candidates.partition_point(|&(c, _)| c <= count);
                    candidates.insert(at, (count, j));
                    candidates.truncate(CANDIDATE_COLUMNS);
                }
            }

            let mut best: Option<(usize, usize, f64, usize)> = None; // (row, col, value, cost)
            let mut singular = None;
            for &(count, j) in &candidates {
                let values: Vec<(usize, f64)> = pattern[j]
                    .iter()
                    .map(|&i| (i, lookup(&rows[i], j)))
                    .collect();
                let big = values.iter().fold(0.0f64, |a, &(_, v)| a.max(v.abs()));
                if big <= tol {
                    singular = Some(j);
                    break;
                }
                for &(i, v) in &values {
                    if v.abs() < THRESHOLD * big || v.abs() <= tol {
                        continue;
                    }
                    let cost = (rows[i].len() - 1) * (count - 1);
                    let better = match best {
                        None => true,
                        Some((bi, _, bv, bc)) => {
                            cost < bc
                                || (cost == bc && v.abs() > bv.abs())
                                || (cost == bc && v.abs() == bv.abs() && i < bi)
                        }
                    };
                    if better {
                        best = Some((i, j, v, cost));
                    }
                }
                if matches!(best, Some((_, _, _, 0))) {
                    break;
                }
            }

            if let Some(j) = singular {
                for i in std::mem::take(&mut pattern[j]) {
                    remove_entry(&mut rows[i], j);
                }
                col_done[j] = true;
                dependent.push(j);
                remaining -= 1;
                continue;
            }
            let (r, c, value, _) = best.expect("a nonempty candidate column has a pivot");

            let mut upper = std::mem::take(&mut rows[r]);
            remove_entry(&mut upper, c);
            for &(j, _) in &upper {
                remove_index(&mut pattern[j], r);
            }
            let mut lower = Vec::new();
            for i in std::mem::take(&mut pattern[c]) {
                if i == r {
                    continue;
                }
                let a = remove_entry(&mut rows[i], c).unwrap_or(0.0);
                let l = a / value;
                if l == 0.0 {
                    continue;
                }
                lower.push((i, l));
                let row = &mut rows[i];
                for (p, &(j, _)) in row.iter().enumerate() {
                    slot[j] = p;
                }
                for &(j, u) in &upper {
                    if slot[j] != usize::MAX {
                        row[slot[j]].1 -= l * u;
                    } else {
                        row.push((j, -l * u));
                        pattern[j].push(i);
                    }
                }
                for &(j, _) in row.iter() {
                    slot[j] = usize::MAX;
                }
            }
            col_done[c] = true;
            row_done[r] = true;
            remaining -= 1;
            pivots.push(Pivot {
                row: r,
                col: c,
                value,
                lower,
                upper,
            });
        }

        if dependent.is_empty() {
            Ok(Self { n, pivots })
        } else {
            Err(Deficient {
                columns: dependent,
                rows: (0..n).filter(|&i| !row_done[i]).collect(),
            })
        }
    }

    /// Solves `A x = b` in place; `b` is indexed by row, `x` by column.
    pub(crate) fn solve(&self, b: &mut [f64]) {
        for p in &self.pivots {
            let t = b[p.row];
            if t != 0.0 {
                for &(i, l) in &p.lower {
                    b[i] -= l * t;
                }
            }
        }
        let mut x = vec![0.0; self.n];
        for p in self.pivots.iter().rev() {
            let s: f64 = p.upper.iter().map(|&(j, u)| u * x[j]).sum();
            x[p.col] = (b[p.row] - s) / p.value;
        }
        b.copy_from_slice(&x);
    }

    /// Solves `A' y = g` in place; `g` is indexed by column, `y` by row.
    pub(crate) fn solve_transpose(&self, g: &mut [f64]) {
        let mut w = vec![0.0; self.n];
        for p in &self.pivots {
            let t = g[p.col] / p.value;
            w[p.row] = t;
            if t != 0.0 {
                for &(j, u) in &p.upper {
                    g[j] -= u * t;
                }
            }
        }
        for p in self.pivots.iter().rev() {
            let s: f64 = p.lower.iter().map(|&(i, l)| l * w[i]).sum();
            w[p.row] -= s;
        }
        g.copy_from_slice(&w);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn columns(n: usize, dense: &[f64]) -> Vec<Vec<(usize, f64)>> {
        (0..n)
            .map(|j| {
                (0..n)
                    .filter(|&i| dense[i * n + j] != 0.0)
                    .map(|i| (i, dense[i * n + j]))
                    .collect()
            })
            .collect()
    }

    fn matvec(n: usize, a: &[f64], x: &[f64], transpose: bool) -> Vec<f64> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if transpose { a[j * n + i] } else { a[i * n + j] } * x[j])
                    .sum()
            })
            .collect()
    }

    #[test]
    fn random_sparse_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(1..30);
            let mut a = vec![0.0; n * n];
            // A permuted diagonal keeps the matrix nonsingular in practice.
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            for i in 0..n {
                a[i * n + perm[i]] = rng.gen_range(1.0..3.0);
                for _ in 0..2 {
                    a[i * n + rng.gen_range(0..n)] += rng.gen_range(-1.0..1.0);
                }
            }
            let lu = match SparseLu::factor(n, &columns(n, &a), 1e-12) {
                Ok(lu) => lu,
                Err(_) => continue,
            };
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            for transpose in [false, true] {
                let mut b = matvec(n, &a, &x, transpose);
                if transpose {
                    lu.solve_transpose(&mut b);
                } else {
                    lu.solve(&mut b);
                }
                for (u, v) in b.iter().zip(&x) {
                    assert!((u - v).abs() < 1e-8, "{u} vs {v}");
                }
            }
        }
    }

    #[test]
    fn reports_dependent_columns() {
        // Column 2 = column 0 + column 1.
        let a = vec![
            1.0, 0.0, 1.0, //
            0.0, 1.0, 1.0, //
            2.0, 3.0, 5.0,
        ];
        let err = SparseLu::factor(3, &columns(3, &a), 1e-12).unwrap_err();
        assert_eq!(err.columns.len(), 1);
        assert_eq!(err.rows.len(), 1);
        let empty = vec![0.0, 0.0, 0.0, 1.0];
        let err = SparseLu::factor(2, &columns(2, &empty), 1e-12).unwrap_err();
        assert_eq!(err.columns, vec![0]);
        assert_eq!(err.rows, vec![0]);
    }
}
