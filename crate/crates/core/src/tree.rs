//! Spanning trees and the tree machinery used for scoring off-tree edges:
//! Kruskal maximum-weight trees, Tarjan's offline LCA, resistive depths,
//! tree paths and β-layer BFS neighborhoods.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::graph::{Adjacency, Graph};
use crate::scratch::Marker;

/// Disjoint sets with path compression and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut x = x;
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    /// Merges the sets of `a` and `b`; returns the new root, or `None` if
    /// they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> Option<usize> {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[small] = big;
        self.size[big] += self.size[small];
        Some(big)
    }
}

/// Chooses the spanning-tree edges of a connected graph.
pub trait TreeBuilder {
    fn tree_edges(&self, g: &Graph) -> Result<Vec<usize>>;
}

/// Kruskal on weights in descending order, ties broken by smaller edge id.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaxWeightTree;

impl TreeBuilder for MaxWeightTree {
    fn tree_edges(&self, g: &Graph) -> Result<Vec<usize>> {
        let mut order: Vec<usize> = (0..g.m()).collect();
        order.sort_by(|&a, &b| g.edge(b).w.total_cmp(&g.edge(a).w).then(a.cmp(&b)));
        let mut uf = UnionFind::new(g.n());
        let mut picked = Vec::with_capacity(g.n().saturating_sub(1));
        for id in order {
            let e = g.edge(id);
            if uf.union(e.u, e.v).is_some() {
                picked.push(id);
                if picked.len() + 1 == g.n() {
                    break;
                }
            }
        }
        if picked.len() + 1 != g.n() {
            let (components, _) = g.components();
            return Err(Error::Disconnected { components });
        }
        Ok(picked)
    }
}

/// A rooted spanning tree of a graph.
#[derive(Debug, Clone)]
pub struct SpanningTree {
    pub root: usize,
    /// `parent[root] == root`.
    pub parent: Vec<usize>,
    /// Graph edge id joining each vertex to its parent (`usize::MAX` at the root).
    pub parent_edge: Vec<usize>,
    pub parent_weight: Vec<f64>,
    pub depth: Vec<usize>,
    /// Sum of `1 / w` along the root path.
    pub rdepth: Vec<f64>,
    /// Per graph edge: is it a tree edge.
    pub in_tree: Vec<bool>,
    tin: Vec<usize>,
    tout: Vec<usize>,
    adj: Vec<Vec<(usize, usize)>>,
    edge_ids: Vec<usize>,
}

impl SpanningTree {
    /// Roots the tree formed by `ids` (edge ids of `g`) at `root`.
    pub fn from_edges(g: &Graph, ids: &[usize], root: usize) -> Result<Self> {
        let n = g.n();
        if ids.len() + 1 != n || root >= n {
            return Err(Error::InvalidGraph(format!(
                "{} edges cannot span {n} vertices",
                ids.len()
            )));
        }
        let mut adj = vec![Vec::new(); n];
        let mut in_tree = vec![false; g.m()];
        for &id in ids {
            let e = g.edge(id);
            in_tree[id] = true;
            adj[e.u].push((e.v, id));
            adj[e.v].push((e.u, id));
        }
        let mut parent = vec![usize::MAX; n];
        let mut parent_edge = vec![usize::MAX; n];
        let mut parent_weight = vec![0.0; n];
        let mut depth = vec![0; n];
        let mut rdepth = vec![0.0; n];
        let mut tin = vec![0; n];
        let mut tout = vec![0; n];
        parent[root] = root;

        // Iterative DFS: (vertex, next adjacency slot).
        let mut clock = 0;
        let mut stack = vec![(root, 0usize)];
        tin[root] = clock;
        clock += 1;
        let mut seen = 1;
        while let Some(&mut (v, ref mut slot)) = stack.last_mut() {
            if let Some(&(x, id)) = adj[v].get(*slot) {
                *slot += 1;
                if x == parent[v] && id == parent_edge[v] {
                    continue;
                }
                if parent[x] != usize::MAX {
                    return Err(Error::InvalidGraph("tree edges contain a cycle".into()));
                }
                let w = g.edge(id).w;
                parent[x] = v;
                parent_edge[x] = id;
                parent_weight[x] = w;
                depth[x] = depth[v] + 1;
                rdepth[x] = rdepth[v] + 1.0 / w;
                tin[x] = clock;
                clock += 1;
                seen += 1;
                stack.push((x, 0));
            } else {
                tout[v] = clock;
                clock += 1;
                stack.pop();
            }
        }
        if seen != n {
            return Err(Error::InvalidGraph("tree edges do not span the graph".into()));
        }
        Ok(SpanningTree {
            root,
            parent,
            parent_edge,
            parent_weight,
            depth,
            rdepth,
            in_tree,
            tin,
            tout,
            adj,
            edge_ids: ids.to_vec(),
        })
    }

    pub fn build(g: &Graph, builder: &dyn TreeBuilder) -> Result<Self> {
        let ids = builder.tree_edges(g)?;
        SpanningTree::from_edges(g, &ids, 0)
    }

    pub fn n(&self) -> usize {
        self.parent.len()
    }

    pub fn edge_ids(&self) -> &[usize] {
        &self.edge_ids
    }

    /// `a` is an ancestor of `b` (or equal).
    pub fn is_ancestor(&self, a: usize, b: usize) -> bool {
        self.tin[a] <= self.tin[b] && self.tout[b] <= self.tout[a]
    }

    /// Whether the tree edge between `a` and `b` (adjacent in the tree) lies
    /// on the path `p -> q` whose LCA is `lca`. O(1).
    pub fn edge_on_path(&self, a: usize, b: usize, p: usize, q: usize, lca: usize) -> bool {
        let child = if self.parent[a] == b { a } else { b };
        debug_assert!(self.parent[child] == a || self.parent[child] == b);
        child != lca
            && self.is_ancestor(lca, child)
            && (self.is_ancestor(child, p) || self.is_ancestor(child, q))
    }
}

impl Adjacency for SpanningTree {
    fn num_vertices(&self) -> usize {
        self.adj.len()
    }

    fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[v]
    }
}

pub fn max_weight_spanning_tree(g: &Graph) -> Result<SpanningTree> {
    SpanningTree::build(g, &MaxWeightTree)
}

/// Tarjan's offline LCA. `answer[k]` is the lowest common ancestor of
/// `queries[k]`.
pub fn offline_lca(t: &SpanningTree, queries: &[(usize, usize)]) -> Result<Vec<usize>> {
    let n = t.n();
    let mut by_vertex: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, &(p, q)) in queries.iter().enumerate() {
        if p >= n || q >= n {
            return Err(Error::Config(format!("LCA query ({p}, {q}) out of range")));
        }
        by_vertex[p].push((q, k));
        if p != q {
            by_vertex[q].push((p, k));
        }
    }
    let mut answer = vec![usize::MAX; queries.len()];
    let mut uf = UnionFind::new(n);
    let mut ancestor: Vec<usize> = (0..n).collect();
    let mut done = vec![false; n];
    let mut stack = vec![(t.root, 0usize)];
    while let Some(&mut (v, ref mut slot)) = stack.last_mut() {
        if let Some(&(x, _)) = t.adj[v].get(*slot) {
            *slot += 1;
            if x != t.root && t.parent[x] == v {
                stack.push((x, 0));
            }
            continue;
        }
        done[v] = true;
        for &(u, k) in &by_vertex[v] {
            if done[u] {
                answer[k] = ancestor[uf.find(u)];
            }
        }
        stack.pop();
        if let Some(&(pv, _)) = stack.last() {
            let r = uf.union(pv, v).unwrap_or_else(|| uf.find(pv));
            ancestor[r] = pv;
        }
    }
    Ok(answer)
}

/// Exact tree resistance between `p` and `q` given their LCA.
pub fn tree_effective_resistance(t: &SpanningTree, p: usize, q: usize, lca: usize) -> f64 {
    t.rdepth[p] + t.rdepth[q] - 2.0 * t.rdepth[lca]
}

/// The tree edges on the unique `p -- q` path.
#[derive(Debug, Clone)]
pub struct TreePath {
    pub lca: usize,
    edges: HashSet<usize>,
}

impl TreePath {
    pub fn contains(&self, edge_id: usize) -> bool {
        self.edges.contains(&edge_id)
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().copied()
    }
}

pub fn tree_path_edges(t: &SpanningTree, p: usize, q: usize) -> TreePath {
    let (mut a, mut b) = (p, q);
    let mut edges = HashSet::new();
    while t.depth[a] > t.depth[b] {
        edges.insert(t.parent_edge[a]);
        a = t.parent[a];
    }
    while t.depth[b] > t.depth[a] {
        edges.insert(t.parent_edge[b]);
        b = t.parent[b];
    }
    while a != b {
        edges.insert(t.parent_edge[a]);
        edges.insert(t.parent_edge[b]);
        a = t.parent[a];
        b = t.parent[b];
    }
    TreePath { lca: a, edges }
}

/// One vertex discovered by a layered BFS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfsVisit {
    pub vertex: usize,
    /// First-discovery predecessor; `usize::MAX` for the center.
    pub pred: usize,
    /// Edge id used to reach the vertex; `usize::MAX` for the center.
    pub edge: usize,
    pub hop: usize,
}

/// Vertices within `beta` hops of `center`, in BFS discovery order.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    pub center: usize,
    pub beta: usize,
    pub visits: Vec<BfsVisit>,
}

impl Neighborhood {
    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.visits.iter().map(|v| v.vertex)
    }

    pub fn contains(&self, v: usize) -> bool {
        self.visits.iter().any(|x| x.vertex == v)
    }

    pub fn len(&self) -> usize {
        self.visits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }
}

pub fn bfs_neighborhood<A: Adjacency + ?Sized>(s: &A, p: usize, beta: usize) -> Neighborhood {
    let mut seen = Marker::new(s.num_vertices());
    let mut visits = Vec::new();
    bfs_into(s, p, beta, &mut seen, &mut visits);
    Neighborhood {
        center: p,
        beta,
        visits,
    }
}

/// Layered BFS into caller-owned buffers. `seen` is cleared first and on
/// return holds exactly the visited vertices.
pub(crate) fn bfs_into<A: Adjacency + ?Sized>(
    s: &A,
    p: usize,
    beta: usize,
    seen: &mut Marker,
    out: &mut Vec<BfsVisit>,
) {
    seen.clear();
    out.clear();
    seen.insert(p);
    out.push(BfsVisit {
        vertex: p,
        pred: usize::MAX,
        edge: usize::MAX,
        hop: 0,
    });
    let mut head = 0;
    while head < out.len() {
        let cur = out[head];
        head += 1;
        if cur.hop == beta {
            continue;
        }
        for &(x, id) in s.neighbors(cur.vertex) {
            if seen.insert(x) {
                out.push(BfsVisit {
                    vertex: x,
                    pred: cur.vertex,
                    edge: id,
                    hop: cur.hop + 1,
                });
            }
        }
    }
}
