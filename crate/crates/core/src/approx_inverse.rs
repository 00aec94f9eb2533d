//! Sparse approximate inverse `Z̃ ≈ L⁻¹` of a Cholesky factor.
//!
//! Columns of `Z = L⁻¹` obey
//! `z_j = e_j / L_jj + Σ_{i>j, L_ij≠0} (-L_ij / L_jj) z_i`,
//! so they are produced from the last column backwards, each one built from
//! already-pruned later columns. For an M-matrix factor every term is
//! nonnegative, which makes a relative threshold a sensible pruning rule.
//!
//! The last pivot row is exempt from pruning and from the column maximum.
//! With a small diagonal shift that row carries the near-constant mode,
//! roughly `1 / sqrt(nγ)` in every column; it cancels in every difference
//! `z_p - z_q` but would otherwise set the threshold for the whole column.

use std::path::Path;

use crate::cholesky::CholeskyFactor;
use crate::error::{Error, Result};
use crate::scratch::Marker;

#[derive(Debug, Clone)]
pub struct ApproxInverse {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    delta: f64,
    keep_floor: usize,
    /// Original vertex -> permuted column.
    iperm: Vec<usize>,
}

/// Columns with at most this many entries are never pruned: `max(1, ⌈ln n⌉)`.
pub fn keep_floor(n: usize) -> usize {
    ((n.max(1) as f64).ln().ceil() as usize).max(1)
}

pub fn approx_inverse(f: &CholeskyFactor, delta: f64) -> Result<ApproxInverse> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Config(format!("pruning threshold delta = {delta} must lie in [0, 1)")));
    }
    let n = f.n();
    let floor = keep_floor(n);
    let last = n.wrapping_sub(1);
    let mut cols: Vec<(Vec<usize>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); n];
    let mut acc = vec![0.0; n];
    let mut live = Marker::new(n);
    let mut touched = Vec::new();

    for j in (0..n).rev() {
        let (rows, vals) = f.column(j);
        let ljj = vals[0];
        live.clear();
        touched.clear();
        live.insert(j);
        touched.push(j);
        acc[j] = 1.0 / ljj;
        for k in 1..rows.len() {
            let coef = -vals[k] / ljj;
            if coef == 0.0 {
                continue;
            }
            let (zi, zv) = &cols[rows[k]];
            for (&r, &z) in zi.iter().zip(zv) {
                if live.insert(r) {
                    touched.push(r);
                    acc[r] = coef * z;
                } else {
                    acc[r] += coef * z;
                }
            }
        }
        touched.sort_unstable();
        let keep_all = touched.len() <= floor;
        let threshold = if keep_all {
            f64::NEG_INFINITY
        } else {
            delta * touched.iter().filter(|&&r| r != last).map(|&r| acc[r]).fold(f64::NEG_INFINITY, f64::max)
        };
        let (ci, cv) = &mut cols[j];
        for &r in &touched {
            let v = acc[r];
            if r == j || r == last || v >= threshold {
                ci.push(r);
                cv.push(v);
            }
        }
    }

    let mut col_ptr = Vec::with_capacity(n + 1);
    col_ptr.push(0);
    let total: usize = cols.iter().map(|c| c.0.len()).sum();
    let mut row_idx = Vec::with_capacity(total);
    let mut values = Vec::with_capacity(total);
    for (ci, cv) in cols {
        row_idx.extend(ci);
        values.extend(cv);
        col_ptr.push(row_idx.len());
    }
    Ok(ApproxInverse {
        n,
        col_ptr,
        row_idx,
        values,
        delta,
        keep_floor: floor,
        iperm: f.iperm().to_vec(),
    })
}

impl ApproxInverse {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn keep_floor(&self) -> usize {
        self.keep_floor
    }

    /// Column `j` in permuted coordinates.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    /// Column for original vertex `v`, i.e. `z̃_{π(v)}`.
    pub fn vertex_column(&self, v: usize) -> (&[usize], &[f64]) {
        self.column(self.iperm[v])
    }

    /// `(z̃_i - z̃_j)ᵀ (z̃_p - z̃_q)` for original vertex ids.
    pub fn approx_column_dot(&self, i: usize, j: usize, p: usize, q: usize) -> f64 {
        if i == j || p == q {
            return 0.0;
        }
        let (a, b, c, d) = (
            self.vertex_column(i),
            self.vertex_column(j),
            self.vertex_column(p),
            self.vertex_column(q),
        );
        sparse_dot(a, c) - sparse_dot(a, d) - sparse_dot(b, c) + sparse_dot(b, d)
    }

    /// Adds `scale * z̃_{π(v)}` into a dense vector, recording new slots.
    pub(crate) fn scatter(&self, v: usize, scale: f64, dense: &mut [f64], live: &mut Marker, touched: &mut Vec<usize>) {
        let (rows, vals) = self.vertex_column(v);
        for (&r, &z) in rows.iter().zip(vals) {
            if live.insert(r) {
                touched.push(r);
                dense[r] = scale * z;
            } else {
                dense[r] += scale * z;
            }
        }
    }

    /// `z̃_{π(v)}ᵀ dense`.
    pub(crate) fn dot_dense(&self, v: usize, dense: &[f64]) -> f64 {
        let (rows, vals) = self.vertex_column(v);
        rows.iter().zip(vals).map(|(&r, &z)| z * dense[r]).sum()
    }

    pub fn write_mtx(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::mtx::write_lower_csc(path, self.n, &self.col_ptr, &self.row_idx, &self.values)
    }
}

fn sparse_dot((ai, av): (&[usize], &[f64]), (bi, bv): (&[usize], &[f64])) -> f64 {
    let (mut x, mut y, mut s) = (0, 0, 0.0);
    while x < ai.len() && y < bi.len() {
        match ai[x].cmp(&bi[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                s += av[x] * bv[y];
                x += 1;
                y += 1;
            }
        }
    }
    s
}
