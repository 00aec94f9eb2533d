//! Weighted undirected graphs, symmetric sparse matrices and regularized
//! Laplacians.
//!
//! Vertex ids are 0-based. Edges are stored with `u < v` and are addressed by
//! their position in [`Graph::edges`]; every other module refers to edges by
//! that id.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

impl Edge {
    /// Builds an edge with endpoints normalized so that `u < v`.
    pub fn new(a: usize, b: usize, w: f64) -> Self {
        let (u, v) = if a < b { (a, b) } else { (b, a) };
        Edge { u, v, w }
    }

    pub fn other(&self, x: usize) -> usize {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Anything that can hand out `(neighbor, edge id)` lists per vertex.
pub trait Adjacency {
    fn num_vertices(&self) -> usize;
    fn neighbors(&self, v: usize) -> &[(usize, usize)];
}

#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    /// Validates and builds a graph. Rejects self-loops, out-of-range ids,
    /// non-positive or non-finite weights and repeated vertex pairs.
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self> {
        let mut seen = HashMap::with_capacity(edges.len());
        let mut normalized = Vec::with_capacity(edges.len());
        for (id, e) in edges.into_iter().enumerate() {
            let e = Edge::new(e.u, e.v, e.w);
            if e.u == e.v {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {}", e.u)));
            }
            if e.v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) out of range for n = {n}",
                    e.u, e.v
                )));
            }
            if !(e.w > 0.0 && e.w.is_finite()) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) has non-positive weight {}",
                    e.u, e.v, e.w
                )));
            }
            if seen.insert((e.u, e.v), id).is_some() {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({}, {})",
                    e.u, e.v
                )));
            }
            normalized.push(e);
        }
        let mut adj = vec![Vec::new(); n];
        for (id, e) in normalized.iter().enumerate() {
            adj[e.u].push((e.v, id));
            adj[e.v].push((e.u, id));
        }
        Ok(Graph {
            n,
            edges: normalized,
            adj,
        })
    }

    pub fn from_triples(n: usize, triples: &[(usize, usize, f64)]) -> Result<Self> {
        Graph::new(
            n,
            triples.iter().map(|&(u, v, w)| Edge::new(u, v, w)).collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> Edge {
        self.edges[id]
    }

    /// Edge id of `{a, b}` if present. Linear in the degree of `a`.
    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.adj[a]
            .iter()
            .find(|&&(x, _)| x == b)
            .map(|&(_, id)| id)
    }

    /// Weighted degree of every vertex (the unregularized Laplacian diagonal).
    pub fn weighted_degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for e in &self.edges {
            d[e.u] += e.w;
            d[e.v] += e.w;
        }
        d
    }

    /// Connected component label per vertex, labels assigned in order of
    /// smallest member vertex.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let mut label = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = count;
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                for &(x, _) in &self.adj[v] {
                    if label[x] == usize::MAX {
                        label[x] = count;
                        queue.push_back(x);
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || self.components().0 == 1
    }

    /// Largest connected component (ties: the one holding the smallest vertex
    /// id) and the table `remap[internal] = original`.
    pub fn largest_component(&self) -> (Graph, Vec<usize>) {
        let (count, label) = self.components();
        if count <= 1 {
            return (self.clone(), (0..self.n).collect());
        }
        let mut sizes = vec![0usize; count];
        for &l in &label {
            sizes[l] += 1;
        }
        let best = (0..count).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))).unwrap();
        let remap: Vec<usize> = (0..self.n).filter(|&v| label[v] == best).collect();
        let mut inv = vec![usize::MAX; self.n];
        for (new, &old) in remap.iter().enumerate() {
            inv[old] = new;
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| label[e.u] == best)
            .map(|e| Edge::new(inv[e.u], inv[e.v], e.w))
            .collect();
        let g = Graph::new(remap.len(), edges).expect("component of a valid graph is valid");
        (g, remap)
    }

    /// Subgraph on the same vertex set keeping the listed edge ids, in the
    /// order given.
    pub fn edge_subgraph(&self, ids: &[usize]) -> Graph {
        let edges = ids.iter().map(|&id| self.edges[id]).collect();
        Graph::new(self.n, edges).expect("edge subset of a valid graph is valid")
    }

    /// `Σ w_ij (x_i - x_j)^2` over all edges.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.edges
            .iter()
            .map(|e| e.w * (x[e.u] - x[e.v]).powi(2))
            .sum()
    }
}

impl Adjacency for Graph {
    fn num_vertices(&self) -> usize {
        self.n
    }

    fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[v]
    }
}

/// The evolving subgraph S of a parent graph G: same vertex set, a subset of
/// G's edges. Edge ids are G's ids; adjacency lists keep insertion order.
#[derive(Debug, Clone)]
pub struct Subgraph {
    contains: Vec<bool>,
    adj: Vec<Vec<(usize, usize)>>,
    order: Vec<usize>,
}

impl Subgraph {
    pub fn empty(g: &Graph) -> Self {
        Subgraph {
            contains: vec![false; g.m()],
            adj: vec![Vec::new(); g.n()],
            order: Vec::new(),
        }
    }

    pub fn from_edges(g: &Graph, ids: &[usize]) -> Self {
        let mut s = Subgraph::empty(g);
        for &id in ids {
            s.add_edge(g, id);
        }
        s
    }

    /// Adds edge `id` of `g`; returns false if it was already present.
    pub fn add_edge(&mut self, g: &Graph, id: usize) -> bool {
        if self.contains[id] {
            return false;
        }
        let e = g.edge(id);
        self.contains[id] = true;
        self.adj[e.u].push((e.v, id));
        self.adj[e.v].push((e.u, id));
        self.order.push(id);
        true
    }

    pub fn contains(&self, id: usize) -> bool {
        self.contains[id]
    }

    /// Edge ids in insertion order.
    pub fn edge_ids(&self) -> &[usize] {
        &self.order
    }

    pub fn m(&self) -> usize {
        self.order.len()
    }

    pub fn to_graph(&self, g: &Graph) -> Graph {
        let mut ids = self.order.clone();
        ids.sort_unstable();
        g.edge_subgraph(&ids)
    }
}

impl Adjacency for Subgraph {
    fn num_vertices(&self) -> usize {
        self.adj.len()
    }

    fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[v]
    }
}

/// `e_p - e_q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndicatorDiff {
    pub p: usize,
    pub q: usize,
}

impl IndicatorDiff {
    pub fn new(p: usize, q: usize, n: usize) -> Result<Self> {
        if p == q || p >= n || q >= n {
            return Err(Error::Config(format!(
                "indicator difference ({p}, {q}) invalid for n = {n}"
            )));
        }
        Ok(IndicatorDiff { p, q })
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        x[self.p] = 1.0;
        x[self.q] = -1.0;
        x
    }
}

/// Symmetric matrix stored as the column-compressed lower triangle. Row
/// indices within a column are strictly increasing, so the diagonal entry,
/// when present, is first.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Assembles from `(i, j, value)` triplets of either triangle. Duplicates
    /// are summed; each off-diagonal pair must be given once (not mirrored).
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, x) in triplets {
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            cols[c].push((r, x));
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for (c, col) in cols.iter_mut().enumerate() {
            col.sort_by_key(|&(r, _)| r);
            let mut last = usize::MAX;
            for &(r, x) in col.iter() {
                debug_assert!(r >= c);
                if r == last {
                    *values.last_mut().unwrap() += x;
                } else {
                    row_idx.push(r);
                    values.push(x);
                    last = r;
                }
            }
            col_ptr.push(row_idx.len());
        }
        SparseSymMatrix {
            n,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseSymMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz_lower(&self) -> usize {
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

    /// Lower-triangle entries `(row, col, value)` with `row >= col`.
    pub fn lower_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |k| (self.row_idx[k], c, self.values[k]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let range = self.col_ptr[c]..self.col_ptr[c + 1];
        match self.row_idx[range.clone()].binary_search(&r) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|c| self.get(c, c)).collect()
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..self.n {
            let xc = x[c];
            let mut acc = 0.0;
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[k];
                let a = self.values[k];
                if r == c {
                    acc += a * xc;
                } else {
                    y[r] += a * xc;
                    acc += a * x[r];
                }
            }
            y[c] += acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// Returns `A + diag(d)`.
    pub fn add_diagonal(&self, d: &[f64]) -> SparseSymMatrix {
        assert_eq!(d.len(), self.n);
        SparseSymMatrix::from_triplets(
            self.n,
            self.lower_entries().chain(d.iter().enumerate().map(|(i, &x)| (i, i, x))),
        )
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut a = nalgebra::DMatrix::zeros(self.n, self.n);
        for (r, c, x) in self.lower_entries() {
            a[(r, c)] = x;
            a[(c, r)] = x;
        }
        a
    }
}

/// How the diagonal regularization γ is chosen.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaPolicy {
    Absolute(f64),
    /// Factor times the largest unregularized diagonal entry.
    Relative(f64),
}

impl Default for GammaPolicy {
    fn default() -> Self {
        GammaPolicy::Relative(1e-6)
    }
}

impl GammaPolicy {
    pub fn resolve(&self, g: &Graph) -> Result<f64> {
        let gamma = match *self {
            GammaPolicy::Absolute(x) => x,
            GammaPolicy::Relative(f) => {
                f * g.weighted_degrees().into_iter().fold(0.0, f64::max)
            }
        };
        if gamma > 0.0 && gamma.is_finite() {
            Ok(gamma)
        } else {
            Err(Error::Config(format!(
                "regularization {self:?} resolves to gamma = {gamma}, must be > 0"
            )))
        }
    }
}

/// Laplacian plus a nonnegative per-row diagonal shift. Off-diagonals are
/// `-w_ij`, the diagonal is the weighted degree plus `shift[i]`, so row sums
/// equal the shift.
#[derive(Debug, Clone)]
pub struct RegularizedLaplacian {
    matrix: SparseSymMatrix,
    shift: Vec<f64>,
}

impl RegularizedLaplacian {
    pub fn build(g: &Graph, policy: GammaPolicy) -> Result<Self> {
        let gamma = policy.resolve(g)?;
        Ok(RegularizedLaplacian::with_gamma(g, gamma))
    }

    pub fn with_gamma(g: &Graph, gamma: f64) -> Self {
        RegularizedLaplacian::from_edges(g.n(), g.edges().iter().copied(), vec![gamma; g.n()])
    }

    pub fn with_shift(g: &Graph, shift: Vec<f64>) -> Self {
        RegularizedLaplacian::from_edges(g.n(), g.edges().iter().copied(), shift)
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = Edge>, shift: Vec<f64>) -> Self {
        assert_eq!(shift.len(), n, "shift length must equal vertex count");
        assert!(
            shift.iter().all(|&s| s >= 0.0),
            "diagonal shift must be nonnegative"
        );
        let mut diag = shift.clone();
        let mut trip = Vec::new();
        for e in edges {
            diag[e.u] += e.w;
            diag[e.v] += e.w;
            trip.push((e.v, e.u, -e.w));
        }
        trip.extend(diag.into_iter().enumerate().map(|(i, d)| (i, i, d)));
        RegularizedLaplacian {
            matrix: SparseSymMatrix::from_triplets(n, trip),
            shift,
        }
    }

    /// Same regularization, graph `S ∪ {(p, q, w)}`.
    pub fn with_edge_added(&self, e: Edge) -> Self {
        let trip = self.matrix.lower_entries().chain([
            (e.u, e.u, e.w),
            (e.v, e.v, e.w),
            (e.v, e.u, -e.w),
        ]);
        RegularizedLaplacian {
            matrix: SparseSymMatrix::from_triplets(self.n(), trip),
            shift: self.shift.clone(),
        }
    }

    /// Same graph with every entry scaled by `factor` (weights and shift).
    pub fn scaled(&self, factor: f64) -> Self {
        RegularizedLaplacian {
            matrix: SparseSymMatrix::from_triplets(
                self.n(),
                self.matrix.lower_entries().map(|(r, c, x)| (r, c, x * factor)),
            ),
            shift: self.shift.iter().map(|s| s * factor).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn matrix(&self) -> &SparseSymMatrix {
        &self.matrix
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    /// Off-diagonal edges `(u, v, w)` recovered from the matrix, `u < v`.
    pub fn edges(&self) -> Vec<Edge> {
        self.matrix
            .lower_entries()
            .filter(|&(r, c, x)| r != c && x != 0.0)
            .map(|(r, c, x)| Edge::new(c, r, -x))
            .collect()
    }

    pub fn has_edge(&self, p: usize, q: usize) -> bool {
        p != q && self.matrix.get(p, q) != 0.0
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.matrix.mul_vec(&vec![1.0; self.n()])
    }
}
