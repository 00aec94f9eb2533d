//! Trace-reduction criticality of off-subgraph edges.
//!
//! Adding edge `(p, q, w)` to a subgraph `S` lowers `Trace(L_S⁻¹ L_G)` by
//!
//! ```text
//! TrRed = w · Σ_{(i,j)∈E} w_ij (e_ijᵀ L_S⁻¹ e_pq)² / (1 + w R_S(p, q))
//! ```
//!
//! The truncated variants restrict the sum to edges bridging the β-layer
//! neighborhoods of `p` and `q` in `S`. On a tree the potentials
//! `e_iᵀ L_S⁻¹ e_pq` follow from BFS along the unique `p -- q` path; on a
//! general subgraph they come from the approximate inverse Cholesky factor.

use rayon::prelude::*;
use serde::Serialize;

use crate::approx_inverse::ApproxInverse;
use crate::dense::{self, DEFAULT_ORACLE_LIMIT};
use crate::error::{Error, Result};
use crate::graph::{Adjacency, Edge, Graph, RegularizedLaplacian, Subgraph};
use crate::scratch::{Marker, SparseAccumulator};
use crate::tree::{bfs_into, offline_lca, tree_effective_resistance, BfsVisit, SpanningTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    TreeExactTruncated,
    ApproxTruncated,
    DenseExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeScore {
    pub edge: usize,
    pub p: usize,
    pub q: usize,
    pub w: f64,
    pub score: f64,
    pub kind: ScoreKind,
}

/// `Trace(L_S⁻¹ L_G)` by dense factorization of `L_S`.
pub fn dense_trace(lg: &RegularizedLaplacian, ls: &RegularizedLaplacian) -> Result<f64> {
    dense_trace_with_limit(lg, ls, DEFAULT_ORACLE_LIMIT)
}

pub fn dense_trace_with_limit(lg: &RegularizedLaplacian, ls: &RegularizedLaplacian, limit: usize) -> Result<f64> {
    dense::check_same_dim(lg.n(), ls.n())?;
    dense::check_size(lg.n(), limit)?;
    let chol = dense::cholesky(ls.matrix())?;
    let x = chol.solve(&lg.matrix().to_dense());
    Ok(x.trace())
}

/// Exact trace reduction of `e` with respect to `ls`, by one dense solve.
///
/// The quadratic form runs over `L_G` itself, so the diagonal regularization
/// contributes like edges to a ground node; the result then equals the exact
/// change of the regularized trace.
pub fn exact_trace_reduction(lg: &RegularizedLaplacian, ls: &RegularizedLaplacian, e: Edge) -> Result<f64> {
    dense::check_same_dim(lg.n(), ls.n())?;
    dense::check_size(lg.n(), DEFAULT_ORACLE_LIMIT)?;
    if ls.has_edge(e.u, e.v) {
        return Err(Error::EdgeInSubgraph { p: e.u, q: e.v });
    }
    let chol = dense::cholesky(ls.matrix())?;
    let mut rhs = nalgebra::DVector::zeros(ls.n());
    rhs[e.u] = 1.0;
    rhs[e.v] = -1.0;
    let x = chol.solve(&rhs);
    let r = x[e.u] - x[e.v];
    let xs = x.as_slice();
    let energy: f64 = xs.iter().zip(lg.mul_vec(xs)).map(|(a, b)| a * b).sum();
    Ok(e.w * energy / (1.0 + e.w * r))
}

/// Returns `(TrRed, Trace(L_S⁻¹L_G) - Trace(L_{S+e}⁻¹L_G))`; the two agree
/// by the Sherman–Morrison rank-one update.
pub fn sherman_morrison_check(lg: &RegularizedLaplacian, ls: &RegularizedLaplacian, e: Edge) -> Result<(f64, f64)> {
    let red = exact_trace_reduction(lg, ls, e)?;
    let before = dense_trace(lg, ls)?;
    let after = dense_trace(lg, &ls.with_edge_added(e))?;
    Ok((red, before - after))
}

/// Node potentials for unit current injected at `p` and drawn at `q` in a
/// tree, restricted to the two β-layer neighborhoods.
#[derive(Debug, Clone)]
pub struct VoltageMap {
    pub resistance: f64,
    /// `(vertex, potential)`; `p`'s neighborhood first, in BFS order.
    pub entries: Vec<(usize, f64)>,
}

impl VoltageMap {
    pub fn get(&self, v: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == v).map(|e| e.1)
    }
}

fn tree_edge_weight(t: &SpanningTree, a: usize, b: usize) -> f64 {
    if t.parent[a] == b {
        t.parent_weight[a]
    } else {
        t.parent_weight[b]
    }
}

/// Fills `volt` with BFS potentials; the p side wins where the
/// neighborhoods overlap.
fn propagate_voltages(
    t: &SpanningTree,
    (p, q, lca): (usize, usize, usize),
    resistance: f64,
    p_side: &[BfsVisit],
    q_side: &[BfsVisit],
    volt: &mut SparseAccumulator,
) {
    volt.clear();
    for (visits, start, sign) in [(p_side, resistance, -1.0), (q_side, 0.0, 1.0)] {
        for v in visits {
            if volt.get(v.vertex).is_some() {
                continue;
            }
            let x = if v.pred == usize::MAX {
                start
            } else {
                let base = volt.values[v.pred];
                if t.edge_on_path(v.pred, v.vertex, p, q, lca) {
                    base + sign / tree_edge_weight(t, v.pred, v.vertex)
                } else {
                    base
                }
            };
            volt.set(v.vertex, x);
        }
    }
}

pub fn tree_voltages(t: &SpanningTree, p: usize, q: usize, beta: usize) -> Result<VoltageMap> {
    let lca = offline_lca(t, &[(p, q)])?[0];
    let r = tree_effective_resistance(t, p, q, lca);
    let n = t.n();
    let (mut seen, mut vp, mut vq) = (Marker::new(n), Vec::new(), Vec::new());
    bfs_into(t, p, beta, &mut seen, &mut vp);
    bfs_into(t, q, beta, &mut seen, &mut vq);
    let mut volt = SparseAccumulator::new(n);
    propagate_voltages(t, (p, q, lca), r, &vp, &vq, &mut volt);
    let mut entries = Vec::new();
    for v in vp.iter().chain(&vq) {
        if !entries.iter().any(|e: &(usize, f64)| e.0 == v.vertex) {
            entries.push((v.vertex, volt.values[v.vertex]));
        }
    }
    Ok(VoltageMap {
        resistance: r,
        entries,
    })
}

/// Per-thread buffers for neighborhood scoring.
struct Scratch {
    seen_p: Marker,
    seen_q: Marker,
    visits_p: Vec<BfsVisit>,
    visits_q: Vec<BfsVisit>,
    cached_p: Option<usize>,
    potential: SparseAccumulator,
    counted: Marker,
    dense: Vec<f64>,
    live: Marker,
    touched: Vec<usize>,
}

impl Scratch {
    fn new(n: usize, m: usize) -> Self {
        Scratch {
            seen_p: Marker::new(n),
            seen_q: Marker::new(n),
            visits_p: Vec::new(),
            visits_q: Vec::new(),
            cached_p: None,
            potential: SparseAccumulator::new(n),
            counted: Marker::new(m),
            dense: vec![0.0; n],
            live: Marker::new(n),
            touched: Vec::new(),
        }
    }

    /// BFS from both endpoints; the p-side neighborhood is reused when
    /// consecutive candidates share `p`.
    fn neighborhoods<A: Adjacency + ?Sized>(&mut self, s: &A, p: usize, q: usize, beta: usize) {
        if self.cached_p != Some(p) {
            bfs_into(s, p, beta, &mut self.seen_p, &mut self.visits_p);
            self.cached_p = Some(p);
        }
        bfs_into(s, q, beta, &mut self.seen_q, &mut self.visits_q);
    }

    /// `Σ w_ij (φ_i - φ_j)²` over graph edges with one endpoint in each
    /// neighborhood, each edge counted once.
    fn bridged_energy(&mut self, g: &Graph) -> f64 {
        self.counted.clear();
        let mut sum = 0.0;
        for v in &self.visits_p {
            let i = v.vertex;
            for &(j, id) in g.neighbors(i) {
                if self.seen_q.contains(j) && self.counted.insert(id) {
                    let d = self.potential.values[i] - self.potential.values[j];
                    sum += g.edge(id).w * d * d;
                }
            }
        }
        sum
    }
}

/// Truncated trace reduction of every off-tree edge of `g`, exact on the
/// tree. Output is in edge-id order.
pub fn tree_truncated_scores(g: &Graph, t: &SpanningTree, beta: usize) -> Result<Vec<EdgeScore>> {
    if t.n() != g.n() || t.in_tree.len() != g.m() {
        return Err(Error::Dimension {
            expected: g.n(),
            found: t.n(),
        });
    }
    let off: Vec<usize> = (0..g.m()).filter(|&id| !t.in_tree[id]).collect();
    let queries: Vec<(usize, usize)> = off.iter().map(|&id| (g.edge(id).u, g.edge(id).v)).collect();
    let lcas = offline_lca(t, &queries)?;
    let (n, m) = (g.n(), g.m());
    let scores = off
        .par_iter()
        .zip(lcas.par_iter())
        .map_init(
            || Scratch::new(n, m),
            |s, (&id, &lca)| {
                let e = g.edge(id);
                let r = tree_effective_resistance(t, e.u, e.v, lca);
                s.neighborhoods(t, e.u, e.v, beta);
                propagate_voltages(t, (e.u, e.v, lca), r, &s.visits_p, &s.visits_q, &mut s.potential);
                let sum = s.bridged_energy(g);
                EdgeScore {
                    edge: id,
                    p: e.u,
                    q: e.v,
                    w: e.w,
                    score: e.w * sum / (1.0 + e.w * r),
                    kind: ScoreKind::TreeExactTruncated,
                }
            },
        )
        .collect();
    Ok(scores)
}

/// Approximate truncated trace reduction of the candidate edges with
/// respect to a general subgraph `s`, using `z ≈ L⁻¹` of `L_S`'s factor.
/// Output follows the order of `edges`.
pub fn approx_truncated_scores(
    g: &Graph,
    s: &Subgraph,
    z: &ApproxInverse,
    beta: usize,
    edges: &[usize],
) -> Result<Vec<EdgeScore>> {
    if z.n() != g.n() || s.num_vertices() != g.n() {
        return Err(Error::Dimension {
            expected: g.n(),
            found: z.n(),
        });
    }
    let (n, m) = (g.n(), g.m());
    let scores = edges
        .par_iter()
        .map_init(
            || Scratch::new(n, m),
            |sc, &id| {
                let e = g.edge(id);
                sc.live.clear();
                sc.touched.clear();
                z.scatter(e.u, 1.0, &mut sc.dense, &mut sc.live, &mut sc.touched);
                z.scatter(e.v, -1.0, &mut sc.dense, &mut sc.live, &mut sc.touched);
                let r: f64 = sc.touched.iter().map(|&k| sc.dense[k] * sc.dense[k]).sum();

                sc.neighborhoods(s, e.u, e.v, beta);
                sc.potential.clear();
                for v in sc.visits_p.iter().chain(&sc.visits_q) {
                    if sc.potential.get(v.vertex).is_none() {
                        let phi = z.dot_dense(v.vertex, &sc.dense);
                        sc.potential.set(v.vertex, phi);
                    }
                }
                let sum = sc.bridged_energy(g);
                for &k in &sc.touched {
                    sc.dense[k] = 0.0;
                }
                EdgeScore {
                    edge: id,
                    p: e.u,
                    q: e.v,
                    w: e.w,
                    score: e.w * sum / (1.0 + e.w * r),
                    kind: ScoreKind::ApproxTruncated,
                }
            },
        )
        .collect();
    Ok(scores)
}

/// CSV `edge,p,q,w,score`.
pub fn write_scores_csv(path: impl AsRef<std::path::Path>, scores: &[EdgeScore]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| crate::mtx::csv_err(path, e))?;
    w.write_record(["edge", "p", "q", "w", "score"])
        .map_err(|e| crate::mtx::csv_err(path, e))?;
    for s in scores {
        w.write_record([
            s.edge.to_string(),
            s.p.to_string(),
            s.q.to_string(),
            s.w.to_string(),
            s.score.to_string(),
        ])
        .map_err(|e| crate::mtx::csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
