//! Spectral sparsification by iterative trace-reduction edge recovery.
//!
//! A maximum-weight spanning tree seeds the sparsifier. Each round scores the
//! remaining off-subgraph edges by their truncated trace reduction, recovers
//! the best unmarked ones and marks edges that short the same region as a
//! recovered edge. The first round scores against the tree exactly; later
//! rounds refactor the current sparsifier and score through a sparse
//! approximate inverse of its Cholesky factor.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::approx_inverse::approx_inverse;
use crate::cholesky::{factorize, CholeskyFactor, Ordering};
use crate::error::{Error, Result};
use crate::graph::{Adjacency, GammaPolicy, Graph, RegularizedLaplacian, Subgraph};
use crate::scratch::Marker;
use crate::solver::{estimate_trace, DEFAULT_TRACE_PROBES};
use crate::trace::{approx_truncated_scores, tree_truncated_scores, EdgeScore};
use crate::tree::{bfs_into, max_weight_spanning_tree, BfsVisit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsifyConfig {
    /// Recover `⌈alpha_frac · n⌉` edges in total.
    pub alpha_frac: f64,
    pub rounds: usize,
    /// BFS depth of the truncated scores.
    pub beta: usize,
    /// Relative pruning threshold of the approximate inverse.
    pub delta: f64,
    /// BFS depth of the similarity marking.
    pub beta_sim: usize,
    pub gamma: GammaPolicy,
    pub seed: u64,
    pub trace_probes: usize,
    pub ordering: Ordering,
}

impl Default for SparsifyConfig {
    fn default() -> Self {
        SparsifyConfig {
            alpha_frac: 0.10,
            rounds: 5,
            beta: 5,
            delta: 0.1,
            beta_sim: 2,
            gamma: GammaPolicy::default(),
            seed: 0,
            trace_probes: DEFAULT_TRACE_PROBES,
            ordering: Ordering::MinimumDegree,
        }
    }
}

impl SparsifyConfig {
    fn check(&self) -> Result<()> {
        if !(self.alpha_frac > 0.0) || !self.alpha_frac.is_finite() {
            return Err(Error::Config(format!("alpha_frac = {} must be positive", self.alpha_frac)));
        }
        if self.rounds == 0 {
            return Err(Error::Config("at least one round is required".into()));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::Config(format!("delta = {} must lie in [0, 1)", self.delta)));
        }
        if self.trace_probes == 0 {
            return Err(Error::Config("trace_probes must be at least 1".into()));
        }
        Ok(())
    }

    /// Total recovery budget for a graph with `n` vertices.
    pub fn alpha(&self, n: usize) -> usize {
        (self.alpha_frac * n as f64).ceil() as usize
    }

    /// Validates the configuration against a graph with `n` vertices and
    /// returns `α`.
    pub fn validate(&self, n: usize) -> Result<usize> {
        self.check()?;
        let alpha = self.alpha(n);
        if alpha < self.rounds {
            return Err(Error::Config(format!(
                "budget alpha = {alpha} is smaller than the number of rounds {}",
                self.rounds
            )));
        }
        Ok(alpha)
    }
}

/// Per-edge "excluded from recovery" flags, indexed by edge id of `G`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExclusionMarks {
    marked: Vec<bool>,
}

impl ExclusionMarks {
    pub fn new(m: usize) -> Self {
        ExclusionMarks { marked: vec![false; m] }
    }

    pub fn is_marked(&self, id: usize) -> bool {
        self.marked[id]
    }

    pub fn mark(&mut self, id: usize) {
        self.marked[id] = true;
    }

    pub fn count(&self) -> usize {
        self.marked.iter().filter(|&&b| b).count()
    }

    pub fn marked_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.marked.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }
}

/// Reusable buffers for [`mark_similar_with`].
pub struct MarkScratch {
    seen_p: Marker,
    seen_q: Marker,
    visits_p: Vec<BfsVisit>,
    visits_q: Vec<BfsVisit>,
}

impl MarkScratch {
    pub fn new(n: usize) -> Self {
        MarkScratch {
            seen_p: Marker::new(n),
            seen_q: Marker::new(n),
            visits_p: Vec::new(),
            visits_q: Vec::new(),
        }
    }
}

/// Marks every off-subgraph edge with one endpoint within `beta_sim` hops of
/// `p` and the other within `beta_sim` hops of `q`, hops taken in `s`.
/// Returns the number of newly marked edges.
pub fn mark_similar(marks: &mut ExclusionMarks, g: &Graph, s: &Subgraph, p: usize, q: usize, beta_sim: usize) -> usize {
    mark_similar_with(marks, g, s, p, q, beta_sim, &mut MarkScratch::new(g.n()))
}

pub fn mark_similar_with(
    marks: &mut ExclusionMarks,
    g: &Graph,
    s: &Subgraph,
    p: usize,
    q: usize,
    beta_sim: usize,
    scratch: &mut MarkScratch,
) -> usize {
    bfs_into(s, p, beta_sim, &mut scratch.seen_p, &mut scratch.visits_p);
    bfs_into(s, q, beta_sim, &mut scratch.seen_q, &mut scratch.visits_q);
    let mut fresh = 0;
    for v in &scratch.visits_p {
        for &(j, id) in g.neighbors(v.vertex) {
            if scratch.seen_q.contains(j) && !s.contains(id) && !marks.is_marked(id) {
                marks.mark(id);
                fresh += 1;
            }
        }
    }
    fresh
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundStats {
    pub added: usize,
    /// Score range over the edges recovered in this round.
    pub score_max: Option<f64>,
    pub score_min: Option<f64>,
    /// Hutchinson estimate of `Trace(L_P⁻¹ L_G)` after the round.
    pub trace_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecoveredEdge {
    pub edge: usize,
    pub round: usize,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct Sparsifier {
    /// Edge ids of `G` in `P`: tree edges first, then recovered edges in
    /// recovery order.
    pub edge_ids: Vec<usize>,
    pub tree_edges: usize,
    pub recovered: Vec<RecoveredEdge>,
    pub rounds: Vec<RoundStats>,
    /// Trace estimate for the bare tree.
    pub tree_trace_estimate: f64,
    pub alpha: usize,
    pub gamma: f64,
    pub marked: usize,
    pub wall_time_s: f64,
}

impl Sparsifier {
    pub fn tree_edge_ids(&self) -> &[usize] {
        &self.edge_ids[..self.tree_edges]
    }

    pub fn graph(&self, g: &Graph) -> Graph {
        g.edge_subgraph(&self.edge_ids)
    }

    pub fn tree_graph(&self, g: &Graph) -> Graph {
        g.edge_subgraph(self.tree_edge_ids())
    }

    pub fn laplacian(&self, g: &Graph) -> RegularizedLaplacian {
        RegularizedLaplacian::with_gamma(&self.graph(g), self.gamma)
    }

    pub fn tree_laplacian(&self, g: &Graph) -> RegularizedLaplacian {
        RegularizedLaplacian::with_gamma(&self.tree_graph(g), self.gamma)
    }
}

/// Every per-round score list, kept only when requested.
pub type ScoreLog = Vec<Vec<EdgeScore>>;

pub fn sparsify(g: &Graph, cfg: &SparsifyConfig) -> Result<Sparsifier> {
    sparsify_logged(g, cfg, None)
}

pub fn sparsify_logged(g: &Graph, cfg: &SparsifyConfig, mut log: Option<&mut ScoreLog>) -> Result<Sparsifier> {
    let start = Instant::now();
    cfg.check()?;
    let (n, m) = (g.n(), g.m());
    if !g.is_connected() {
        return Err(Error::Disconnected {
            components: g.components().0,
        });
    }
    let gamma = cfg.gamma.resolve(g)?;
    let lg = RegularizedLaplacian::with_gamma(g, gamma);
    let tree = max_weight_spanning_tree(g)?;
    let mut s = Subgraph::from_edges(g, tree.edge_ids());
    let mut edge_ids = tree.edge_ids().to_vec();
    let tree_edges = edge_ids.len();
    let factor_of = |s: &Subgraph| -> Result<CholeskyFactor> {
        factorize(&RegularizedLaplacian::with_gamma(&s.to_graph(g), gamma), cfg.ordering)
    };
    let mut factor = factor_of(&s)?;
    let tree_trace_estimate = estimate_trace(&lg, &factor, cfg.trace_probes, cfg.seed)?;

    if m == tree_edges {
        log::info!("input is a tree; nothing to recover");
        return Ok(Sparsifier {
            edge_ids,
            tree_edges,
            recovered: Vec::new(),
            rounds: Vec::new(),
            tree_trace_estimate,
            alpha: 0,
            gamma,
            marked: 0,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }
    let alpha = cfg.validate(n)?;
    let quota = alpha.div_ceil(cfg.rounds);
    let mut remaining = alpha;
    let mut marks = ExclusionMarks::new(m);
    let mut scratch = MarkScratch::new(n);
    let mut recovered = Vec::new();
    let mut rounds = Vec::new();

    for round in 0..cfg.rounds {
        if remaining == 0 {
            break;
        }
        let mut scores = if round == 0 {
            tree_truncated_scores(g, &tree, cfg.beta)?
        } else {
            let z = approx_inverse(&factor, cfg.delta)?;
            let candidates: Vec<usize> = (0..m).filter(|&id| !s.contains(id) && !marks.is_marked(id)).collect();
            log::debug!(
                "round {round}: factor nnz {}, inverse nnz {}, {} candidates",
                factor.nnz(),
                z.nnz(),
                candidates.len()
            );
            approx_truncated_scores(g, &s, &z, cfg.beta, &candidates)?
        };
        scores.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.edge.cmp(&b.edge)));

        let take = quota.min(remaining);
        let mut added = 0;
        let (mut hi, mut lo) = (None, None);
        for sc in &scores {
            if added == take {
                break;
            }
            if marks.is_marked(sc.edge) || s.contains(sc.edge) {
                continue;
            }
            s.add_edge(g, sc.edge);
            edge_ids.push(sc.edge);
            recovered.push(RecoveredEdge {
                edge: sc.edge,
                round,
                score: sc.score,
            });
            mark_similar_with(&mut marks, g, &s, sc.p, sc.q, cfg.beta_sim, &mut scratch);
            hi.get_or_insert(sc.score);
            lo = Some(sc.score);
            added += 1;
        }
        if added < take {
            log::info!("round {round}: candidates exhausted after {added} of {take} edges");
        }
        remaining -= added;
        if let Some(log) = log.as_deref_mut() {
            log.push(scores);
        }
        factor = factor_of(&s)?;
        let trace_estimate = estimate_trace(&lg, &factor, cfg.trace_probes, cfg.seed)?;
        log::info!("round {round}: added {added}, trace estimate {trace_estimate:.6e}");
        rounds.push(RoundStats {
            added,
            score_max: hi,
            score_min: lo,
            trace_estimate,
        });
    }

    Ok(Sparsifier {
        edge_ids,
        tree_edges,
        recovered,
        rounds,
        tree_trace_estimate,
        alpha,
        gamma,
        marked: marks.count(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
