#![allow(dead_code)]

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sparsetrace::{Edge, Graph};

/// Random tree on `n` vertices plus up to `extra` chords, weights in [0.5, 4].
pub fn random_connected(n: usize, extra: usize, rng: &mut ChaCha8Rng) -> Graph {
    let mut pairs = HashSet::new();
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        pairs.insert((u, v));
        edges.push(Edge::new(u, v, rng.random_range(0.5..4.0)));
    }
    let mut tries = 0;
    while edges.len() < n - 1 + extra && tries < 20 * (extra + 1) {
        tries += 1;
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let key = (a.min(b), a.max(b));
        if a != b && pairs.insert(key) {
            edges.push(Edge::new(a, b, rng.random_range(0.5..4.0)));
        }
    }
    Graph::new(n, edges).unwrap()
}

/// Edge ids of a random spanning tree of `g` plus each remaining edge with
/// probability `keep`.
pub fn random_spanning_subset(g: &Graph, keep: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..g.m()).collect();
    ids.shuffle(rng);
    let mut parent: Vec<usize> = (0..g.n()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut out = Vec::new();
    for id in ids {
        let e = g.edge(id);
        let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
        if a != b {
            parent[a] = b;
            out.push(id);
        } else if rng.random::<f64>() < keep {
            out.push(id);
        }
    }
    out.sort_unstable();
    out
}

/// Dense `L + shift·I` assembled straight from the edge list.
pub fn dense_laplacian(g: &Graph, shift: f64) -> DMatrix<f64> {
    let n = g.n();
    let mut l = DMatrix::zeros(n, n);
    for e in g.edges() {
        l[(e.u, e.u)] += e.w;
        l[(e.v, e.v)] += e.w;
        l[(e.u, e.v)] -= e.w;
        l[(e.v, e.u)] -= e.w;
    }
    for i in 0..n {
        l[(i, i)] += shift;
    }
    l
}

pub fn dense_trace(lg: &DMatrix<f64>, ls: &DMatrix<f64>) -> f64 {
    ls.clone().cholesky().expect("spd").solve(lg).trace()
}

/// Extreme eigenvalues of the pencil `(a, b)` with `b` SPD.
pub fn pencil_extremes(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (f64, f64) {
    let l = b.clone().cholesky().expect("spd").l();
    let x = l.solve_lower_triangular(a).unwrap();
    let m = l.solve_lower_triangular(&x.transpose()).unwrap();
    let m = (&m + m.transpose()) * 0.5;
    let ev = m.symmetric_eigenvalues();
    (ev.min(), ev.max())
}

/// Inverse of the Laplacian with vertex 0 grounded, padded with a zero row
/// and column. Column differences give potentials for any injection pair.
pub fn grounded_inverse(g: &Graph) -> DMatrix<f64> {
    let n = g.n();
    let l = dense_laplacian(g, 0.0);
    let sub = l.view((1, 1), (n - 1, n - 1)).into_owned();
    let inv = sub.cholesky().expect("connected").inverse();
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((1, 1), (n - 1, n - 1)).copy_from(&inv);
    out
}

/// Vertices within `depth` hops of `s` using only the edges in `ids`.
pub fn ball(g: &Graph, ids: &[usize], s: usize, depth: usize) -> Vec<bool> {
    let mut adj = vec![Vec::new(); g.n()];
    for &id in ids {
        let e = g.edge(id);
        adj[e.u].push(e.v);
        adj[e.v].push(e.u);
    }
    let mut inside = vec![false; g.n()];
    inside[s] = true;
    let mut frontier = vec![s];
    for _ in 0..depth {
        let mut next = Vec::new();
        for v in frontier {
            for &u in &adj[v] {
                if !inside[u] {
                    inside[u] = true;
                    next.push(u);
                }
            }
        }
        frontier = next;
    }
    inside
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}
