//! Minimum-cost bipartite assignment.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major cost matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "cost matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("cost matrix entry {v} is not finite")));
        }
        Ok(CostMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let data = (0..rows * cols).map(|i| f(i / cols.max(1), i % cols.max(1))).collect();
        CostMatrix::new(rows, cols, data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("cost matrix rows differ in length"));
        }
        CostMatrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    /// Total cost of a set of `(row, col)` pairs.
    pub fn total(&self, pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(r, c)| self.get(r, c)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentMethod {
    Greedy,
    #[default]
    Hungarian,
}

/// Solves the assignment problem; returns `(row, col)` pairs sorted by row.
///
/// `Hungarian` yields a matching of size `min(rows, cols)` with minimum total
/// cost. `Greedy` repeatedly takes the cheapest remaining entry (ties in
/// `(row, col)` order) and removes its row and column.
pub fn solve_assignment(cost: &CostMatrix, method: AssignmentMethod) -> Vec<(usize, usize)> {
    let mut pairs = match method {
        AssignmentMethod::Greedy => greedy(cost),
        AssignmentMethod::Hungarian => hungarian(cost),
    };
    pairs.sort_unstable();
    pairs
}

fn greedy(cost: &CostMatrix) -> Vec<(usize, usize)> {
    let mut entries: Vec<(usize, usize)> = (0..cost.rows).flat_map(|r| (0..cost.cols).map(move |c| (r, c))).collect();
    entries.sort_by(|&a, &b| {
        cost.get(a.0, a.1).partial_cmp(&cost.get(b.0, b.1)).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    let mut row_used = vec![false; cost.rows];
    let mut col_used = vec![false; cost.cols];
    let mut out = Vec::with_capacity(cost.rows.min(cost.cols));
    for (r, c) in entries {
        if !row_used[r] && !col_used[c] {
            row_used[r] = true;
            col_used[c] = true;
            out.push((r, c));
        }
    }
    out
}

/// Shortest augmenting path Hungarian algorithm with row/column potentials,
/// O(n^2 m) for n <= m. Tall matrices are solved transposed.
fn hungarian(cost: &CostMatrix) -> Vec<(usize, usize)> {
    if cost.rows == 0 || cost.cols == 0 {
        return Vec::new();
    }
    let transposed = cost.rows > cost.cols;
    let (n, m) = if transposed { (cost.cols, cost.rows) } else { (cost.rows, cost.cols) };
    let at = |i: usize, j: usize| if transposed { cost.get(j, i) } else { cost.get(i, j) };

    // 1-based working arrays; index 0 is the virtual root column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = at(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    (1..=m)
        .filter(|&j| owner[j] != 0)
        .map(|j| {
            let (r, c) = (owner[j] - 1, j - 1);
            if transposed {
                (c, r)
            } else {
                (r, c)
            }
        })
        .collect()
}
