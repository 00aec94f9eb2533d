mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use sparsetrace::approx_inverse::approx_inverse;
use sparsetrace::cholesky::{factorize, Ordering};
use sparsetrace::generate::{grid2d, random_geometric};
use sparsetrace::solver::estimate_condition;
use sparsetrace::trace::{approx_truncated_scores, tree_truncated_scores, tree_voltages};
use sparsetrace::tree::max_weight_spanning_tree;
use sparsetrace::{sparsify, Graph, RegularizedLaplacian, Sparsifier, SparsifyConfig, Subgraph};

/// Edge ids of `P` after each completed round, starting with the bare tree.
fn round_prefixes(sp: &Sparsifier) -> Vec<Vec<usize>> {
    let mut out = vec![sp.tree_edge_ids().to_vec()];
    let mut ids = out[0].clone();
    for round in 0..sp.rounds.len() {
        ids.extend(sp.recovered.iter().filter(|r| r.round == round).map(|r| r.edge));
        out.push(ids.clone());
    }
    out
}

#[test]
fn same_round_recoveries_are_not_similar() {
    let g = grid2d(16, 16).unwrap();
    let cfg = SparsifyConfig::default();
    let sp = sparsify(&g, &cfg).unwrap();
    let t = sp.tree_edges;
    let mut checked = 0;
    for (k, first) in sp.recovered.iter().enumerate() {
        // subgraph at the moment `first` was recovered, including it
        let s_ids = &sp.edge_ids[..t + k + 1];
        let e = g.edge(first.edge);
        let (np, nq) = (ball(&g, s_ids, e.u, cfg.beta_sim), ball(&g, s_ids, e.v, cfg.beta_sim));
        for later in sp.recovered[k + 1..].iter().filter(|r| r.round == first.round) {
            let f = g.edge(later.edge);
            let similar = (np[f.u] && nq[f.v]) || (np[f.v] && nq[f.u]);
            assert!(!similar, "edges {} and {} recovered together", first.edge, later.edge);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn dense_trace_strictly_decreases_per_round() {
    for g in [grid2d(16, 16).unwrap(), random_geometric(300, 0.12, 8).unwrap()] {
        let sp = sparsify(&g, &SparsifyConfig::default()).unwrap();
        let lg = dense_laplacian(&g, sp.gamma);
        let traces: Vec<f64> = round_prefixes(&sp)
            .iter()
            .map(|ids| dense_trace(&lg, &dense_laplacian(&g.edge_subgraph(ids), sp.gamma)))
            .collect();
        assert!(traces.windows(2).all(|w| w[1] < w[0]), "{traces:?}");
    }
}

#[test]
fn largest_eigenvalue_never_increases_per_round() {
    let g = grid2d(16, 16).unwrap();
    let sp = sparsify(&g, &SparsifyConfig::default()).unwrap();
    let lg = dense_laplacian(&g, sp.gamma);
    let lambdas: Vec<f64> = round_prefixes(&sp)
        .iter()
        .map(|ids| pencil_extremes(&lg, &dense_laplacian(&g.edge_subgraph(ids), sp.gamma)).1)
        .collect();
    assert!(lambdas.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{lambdas:?}");
}

#[test]
fn condition_estimate_never_increases_per_round_on_grid64() {
    let g = grid2d(64, 64).unwrap();
    let sp = sparsify(&g, &SparsifyConfig::default()).unwrap();
    assert_eq!(sp.edge_ids.len(), 4095 + 410);
    let lg = RegularizedLaplacian::with_gamma(&g, sp.gamma);
    let kappas: Vec<f64> = round_prefixes(&sp)
        .iter()
        .map(|ids| {
            let f = factorize(
                &RegularizedLaplacian::with_gamma(&g.edge_subgraph(ids), sp.gamma),
                Ordering::MinimumDegree,
            )
            .unwrap();
            estimate_condition(&lg, &f, 50, 0).unwrap()
        })
        .collect();
    assert!(kappas.windows(2).all(|w| w[1] <= w[0]), "{kappas:?}");
}

#[test]
fn truncation_is_monotone_and_exact_at_full_depth() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let n = rng.random_range(10..=120);
        let g = random_connected(n, n / 4 + 1, &mut rng);
        let t = max_weight_spanning_tree(&g).unwrap();
        let by_beta: Vec<Vec<f64>> = (0..=n)
            .map(|b| tree_truncated_scores(&g, &t, b).unwrap().iter().map(|s| s.score).collect())
            .collect();
        for w in by_beta.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                // the summation order changes with β, hence the rounding slack
                assert!(*b >= a * (1.0 - 1e-13), "score dropped from {a} to {b}");
            }
        }
        let zinv = grounded_inverse(&g.edge_subgraph(t.edge_ids()));
        for (s, &full) in tree_truncated_scores(&g, &t, n).unwrap().iter().zip(&by_beta[n]) {
            let phi: Vec<f64> = (0..n).map(|i| zinv[(i, s.p)] - zinv[(i, s.q)]).collect();
            let r = phi[s.p] - phi[s.q];
            let sum: f64 = g.edges().iter().map(|e| e.w * (phi[e.u] - phi[e.v]).powi(2)).sum();
            assert!(rel_err(full, s.w * sum / (1.0 + s.w * r)) < 1e-10);
        }
    }
}

#[test]
fn tree_voltages_stay_between_endpoints() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..30 {
        let n = rng.random_range(5..=150);
        let g = random_connected(n, 0, &mut rng);
        let t = max_weight_spanning_tree(&g).unwrap();
        let (p, q) = (rng.random_range(0..n), rng.random_range(0..n));
        if p == q {
            continue;
        }
        let vm = tree_voltages(&t, p, q, rng.random_range(0..8)).unwrap();
        let eps = 1e-12 * vm.resistance;
        for &(v, phi) in &vm.entries {
            assert!(phi >= -eps && phi <= vm.resistance + eps, "vertex {v}: {phi} outside [0, {}]", vm.resistance);
        }
    }
}

#[test]
fn exact_inverse_reproduces_tree_scores() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..10 {
        let n = rng.random_range(10..=400);
        let g = random_connected(n, n / 3 + 1, &mut rng);
        let t = max_weight_spanning_tree(&g).unwrap();
        let s = Subgraph::from_edges(&g, t.edge_ids());
        // the shift biases potentials by O(γ); keep it far below the tolerance
        let ls = RegularizedLaplacian::with_gamma(&g.edge_subgraph(t.edge_ids()), 1e-13);
        let z = approx_inverse(&factorize(&ls, Ordering::MinimumDegree).unwrap(), 0.0).unwrap();
        let beta = rng.random_range(1..=5);
        let tree = tree_truncated_scores(&g, &t, beta).unwrap();
        let ids: Vec<usize> = tree.iter().map(|s| s.edge).collect();
        let approx = approx_truncated_scores(&g, &s, &z, beta, &ids).unwrap();
        for (a, b) in tree.iter().zip(&approx) {
            assert!(rel_err(a.score, b.score) < 1e-9, "edge {}: {} vs {}", a.edge, a.score, b.score);
        }
    }
}

/// Spearman correlation with average ranks for ties.
fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(x: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        let mut r = vec![0.0; x.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let mean = (a.len() - 1) as f64 / 2.0;
    let (mut num, mut da, mut db) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        num += (x - mean) * (y - mean);
        da += (x - mean).powi(2);
        db += (y - mean).powi(2);
    }
    num / (da * db).sqrt()
}

#[test]
fn approximate_scores_rank_like_dense_scores() {
    let g = grid2d(32, 32).unwrap();
    let n = g.n();
    let (beta, gamma) = (5, 1e-6 * 4.0);
    let t = max_weight_spanning_tree(&g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut ids = t.edge_ids().to_vec();
    let mut off: Vec<usize> = (0..g.m()).filter(|&id| !t.in_tree[id]).collect();
    for _ in 0..(n as f64 * 0.02).ceil() as usize {
        ids.push(off.swap_remove(rng.random_range(0..off.len())));
    }
    let s = Subgraph::from_edges(&g, &ids);
    let sg = g.edge_subgraph(&ids);
    let f = factorize(&RegularizedLaplacian::with_gamma(&sg, gamma), Ordering::MinimumDegree).unwrap();
    let z = approx_inverse(&f, 0.1).unwrap();
    let approx: Vec<f64> = approx_truncated_scores(&g, &s, &z, beta, &off)
        .unwrap()
        .iter()
        .map(|s| s.score)
        .collect();

    let inv = dense_laplacian(&sg, gamma).cholesky().unwrap().inverse();
    let dense: Vec<f64> = off
        .iter()
        .map(|&id| {
            let e = g.edge(id);
            let phi: Vec<f64> = (0..n).map(|i| inv[(i, e.u)] - inv[(i, e.v)]).collect();
            let r = phi[e.u] - phi[e.v];
            let (np, nq) = (ball(&g, &ids, e.u, beta), ball(&g, &ids, e.v, beta));
            let sum: f64 = g
                .edges()
                .iter()
                .filter(|x| (np[x.u] && nq[x.v]) || (np[x.v] && nq[x.u]))
                .map(|x| x.w * (phi[x.u] - phi[x.v]).powi(2))
                .sum();
            e.w * sum / (1.0 + e.w * r)
        })
        .collect();
    let rho = spearman(&approx, &dense);
    assert!(rho >= 0.9, "spearman {rho}");
}

#[test]
fn sparsifier_structure_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for _ in 0..10 {
        let n = rng.random_range(20..=300);
        let g: Graph = random_connected(n, 2 * n, &mut rng);
        let cfg = SparsifyConfig::default();
        let sp = sparsify(&g, &cfg).unwrap();
        let p = sp.graph(&g);
        assert!(p.is_connected());
        assert_eq!(sp.tree_edges, n - 1);
        assert!(sp.recovered.len() <= cfg.alpha(n));
        assert_eq!(p.m(), n - 1 + sp.recovered.len());
        let tree = max_weight_spanning_tree(&g).unwrap();
        let mut a = tree.edge_ids().to_vec();
        let mut b = sp.tree_edge_ids().to_vec();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }
}
