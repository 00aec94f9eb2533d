//! Sparse Cholesky factorization `P A Pᵀ = L Lᵀ` of symmetric positive
//! definite matrices.
//!
//! The numeric phase is the up-looking row algorithm: row `k` of `L` is the
//! solution of a sparse triangular system whose pattern is the reach of
//! row `k` in the elimination tree.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{RegularizedLaplacian, SparseSymMatrix};
use crate::scratch::Marker;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ordering {
    /// Greedy minimum degree on the explicit elimination graph, ties broken
    /// by smaller vertex id.
    #[default]
    MinimumDegree,
    Natural,
}

/// Lower-triangular factor in column-compressed form; the diagonal is the
/// first entry of every column and row indices increase within a column.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    /// `perm[k]` is the original index placed at position `k`.
    perm: Vec<usize>,
    iperm: Vec<usize>,
}

pub fn factorize(a: &RegularizedLaplacian, ordering: Ordering) -> Result<CholeskyFactor> {
    CholeskyFactor::factorize(a.matrix(), ordering)
}

impl CholeskyFactor {
    pub fn factorize(a: &SparseSymMatrix, ordering: Ordering) -> Result<Self> {
        let perm = match ordering {
            Ordering::Natural => (0..a.n()).collect(),
            Ordering::MinimumDegree => minimum_degree(a),
        };
        Self::factorize_with_perm(a, perm)
    }

    pub fn factorize_with_perm(a: &SparseSymMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.n();
        if perm.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: perm.len(),
            });
        }
        let mut iperm = vec![NONE; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }

        // Upper triangle of P A Pᵀ, column-compressed.
        let (cp, ci, cx) = permuted_upper(a, &iperm);

        let parent = etree(n, &cp, &ci);

        // Column counts from row patterns.
        let mut counts = vec![1usize; n];
        let mut mark = Marker::new(n);
        let mut stack = vec![0usize; n];
        for k in 0..n {
            let top = ereach(k, &cp, &ci, &parent, &mut mark, &mut stack);
            for &j in &stack[top..] {
                counts[j] += 1;
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = col_ptr[j] + counts[j];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut next = col_ptr[..n].to_vec();
        let mut x = vec![0.0; n];

        for k in 0..n {
            let top = ereach(k, &cp, &ci, &parent, &mut mark, &mut stack);
            for p in cp[k]..cp[k + 1] {
                if ci[p] <= k {
                    x[ci[p]] += cx[p];
                }
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / values[col_ptr[i]];
                x[i] = 0.0;
                for p in (col_ptr[i] + 1)..next[i] {
                    x[row_idx[p]] -= values[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                row_idx[p] = k;
                values[p] = lki;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    column: perm[k],
                    pivot: d,
                });
            }
            let p = next[k];
            next[k] += 1;
            row_idx[p] = k;
            values[p] = d.sqrt();
        }
        Ok(CholeskyFactor {
            n,
            col_ptr,
            row_idx,
            values,
            perm,
            iperm,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn iperm(&self) -> &[usize] {
        &self.iperm
    }

    pub fn diag(&self, j: usize) -> f64 {
        self.values[self.col_ptr[j]]
    }

    /// Column `j` of `L` (permuted coordinates), diagonal first.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64], work: &mut Vec<f64>) {
        assert_eq!(b.len(), self.n);
        work.clear();
        work.extend(self.perm.iter().map(|&p| b[p]));
        self.lower_solve(work);
        self.upper_solve(work);
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = work[k];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x, &mut Vec::with_capacity(self.n));
        x
    }

    /// `L y = y` (permuted coordinates).
    pub fn lower_solve(&self, y: &mut [f64]) {
        for j in 0..self.n {
            let (rows, vals) = self.column(j);
            let yj = y[j] / vals[0];
            y[j] = yj;
            if yj != 0.0 {
                for k in 1..rows.len() {
                    y[rows[k]] -= vals[k] * yj;
                }
            }
        }
    }

    /// `Lᵀ y = y` (permuted coordinates).
    pub fn upper_solve(&self, y: &mut [f64]) {
        for j in (0..self.n).rev() {
            let (rows, vals) = self.column(j);
            let mut s = y[j];
            for k in 1..rows.len() {
                s -= vals[k] * y[rows[k]];
            }
            y[j] = s / vals[0];
        }
    }

    pub fn write_mtx(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::mtx::write_lower_csc(path, self.n, &self.col_ptr, &self.row_idx, &self.values)
    }
}

fn permuted_upper(a: &SparseSymMatrix, iperm: &[usize]) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let n = a.n();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (r, c, x) in a.lower_entries() {
        let (pr, pc) = (iperm[r], iperm[c]);
        let (row, col) = if pr <= pc { (pr, pc) } else { (pc, pr) };
        cols[col].push((row, x));
    }
    let mut cp = Vec::with_capacity(n + 1);
    let mut ci = Vec::with_capacity(a.nnz_lower());
    let mut cx = Vec::with_capacity(a.nnz_lower());
    cp.push(0);
    for col in cols.iter_mut() {
        col.sort_by_key(|&(r, _)| r);
        for &(r, x) in col.iter() {
            ci.push(r);
            cx.push(x);
        }
        cp.push(ci.len());
    }
    (cp, ci, cx)
}

/// Elimination tree of a matrix given by its upper triangle.
fn etree(n: usize, cp: &[usize], ci: &[usize]) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &row in &ci[cp[k]..cp[k + 1]] {
            let mut i = row;
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L` (excluding the diagonal), written to
/// `stack[top..]` in topological order; returns `top`.
fn ereach(
    k: usize,
    cp: &[usize],
    ci: &[usize],
    parent: &[usize],
    mark: &mut Marker,
    stack: &mut [usize],
) -> usize {
    let n = parent.len();
    let mut top = n;
    mark.clear();
    mark.insert(k);
    let mut path = Vec::new();
    for &row in &ci[cp[k]..cp[k + 1]] {
        if row > k {
            continue;
        }
        let mut i = row;
        path.clear();
        while mark.insert(i) {
            path.push(i);
            i = parent[i];
            debug_assert!(i != NONE);
        }
        while let Some(v) = path.pop() {
            top -= 1;
            stack[top] = v;
        }
    }
    top
}

/// Greedy minimum-degree ordering on the explicit elimination graph.
pub fn minimum_degree(a: &SparseSymMatrix) -> Vec<usize> {
    let n = a.n();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, c, x) in a.lower_entries() {
        if r != c && x != 0.0 {
            adj[r].push(c);
            adj[c].push(r);
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (adj[v].len(), v)).collect();
    let mut perm = Vec::with_capacity(n);
    let mut merged = Vec::new();
    while let Some((_, v)) = queue.pop_first() {
        perm.push(v);
        let nbrs = std::mem::take(&mut adj[v]);
        for &u in &nbrs {
            queue.remove(&(adj[u].len(), u));
            merged.clear();
            let old = &adj[u];
            let (mut i, mut j) = (0, 0);
            while i < old.len() || j < nbrs.len() {
                let x = match (old.get(i), nbrs.get(j)) {
                    (Some(&a), Some(&b)) if a < b => {
                        i += 1;
                        a
                    }
                    (Some(&a), Some(&b)) if a > b => {
                        j += 1;
                        b
                    }
                    (Some(&a), Some(_)) => {
                        i += 1;
                        j += 1;
                        a
                    }
                    (Some(&a), None) => {
                        i += 1;
                        a
                    }
                    (None, Some(&b)) => {
                        j += 1;
                        b
                    }
                    (None, None) => unreachable!(),
                };
                if x != u && x != v {
                    merged.push(x);
                }
            }
            std::mem::swap(&mut adj[u], &mut merged);
            queue.insert((adj[u].len(), u));
        }
    }
    perm
}
