//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use common::*;
use sparsetrace::approx_inverse::approx_inverse;
use sparsetrace::cholesky::{factorize, CholeskyFactor, Ordering};
use sparsetrace::generate::{grid2d, random_geometric_in};
use sparsetrace::sim::{
    dense_fiedler, fiedler, partition_relerr, synthetic_power_grid, transient_simulate_observed, Engine,
    FiedlerEngine, PowerGridSpec, TransientOptions,
};
use sparsetrace::solver::{estimate_condition, pcg_solve, SolveContext};
use sparsetrace::trace::{exact_trace_reduction, tree_truncated_scores};
use sparsetrace::tree::max_weight_spanning_tree;
use sparsetrace::{sparsify, GammaPolicy, Graph, RegularizedLaplacian, Sparsifier, SparsifyConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("trace reduction matches dense trace difference", c1_sherman_morrison),
        ("tree scores match dense truncated sums", c2_tree_exact),
        ("approximate inverse exactness and sparsity", c3_approx_inverse),
        ("generalized eigenvalue structure", c4_eigen_structure),
        ("grid128 sparsifier beats tree preconditioner", c5_grid_benchmark),
        ("trace estimates decrease every round", c6_monotone),
        ("transient engines agree on 64x64 power grid", c7_transient),
        ("Fiedler partitions match dense eigensolver", c8_fiedler),
        ("CLI outputs are bit-reproducible", c9_determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(d) => println!("PASS criterion {}: {name} [{d}] ({secs:.1}s)", k + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {}: {name} [{d}] ({secs:.1}s)", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

fn c1_sherman_morrison() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(10..=200);
        let g = random_connected(n, rng.random_range(1..=2 * n), &mut rng);
        let s_ids = random_spanning_subset(&g, 0.3, &mut rng);
        let off: Vec<usize> = (0..g.m()).filter(|id| s_ids.binary_search(id).is_err()).collect();
        if off.is_empty() {
            continue;
        }
        let e = g.edge(off[rng.random_range(0..off.len())]);
        let gamma = GammaPolicy::default().resolve(&g).unwrap();
        let s = g.edge_subgraph(&s_ids);
        let mut plus = s_ids.clone();
        plus.push(g.find_edge(e.u, e.v).unwrap());
        let s_plus = g.edge_subgraph(&plus);

        let red = exact_trace_reduction(
            &RegularizedLaplacian::with_gamma(&g, gamma),
            &RegularizedLaplacian::with_gamma(&s, gamma),
            e,
        )
        .map_err(|e| e.to_string())?;
        let lg = dense_laplacian(&g, gamma);
        let diff = dense_trace(&lg, &dense_laplacian(&s, gamma)) - dense_trace(&lg, &dense_laplacian(&s_plus, gamma));
        worst = worst.max(rel_err(red, diff));
    }
    check(worst <= 1e-8, format!("worst rel err {worst:.2e}"))
}

fn c2_tree_exact() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    let mut scored = 0;
    for _ in 0..50 {
        let n = rng.random_range(10..=500);
        let g = random_connected(n, rng.random_range(1..=n / 5 + 1), &mut rng);
        let beta = rng.random_range(1..=6);
        let t = max_weight_spanning_tree(&g).unwrap();
        let tree_ids = t.edge_ids().to_vec();
        let zinv = grounded_inverse(&g.edge_subgraph(&tree_ids));
        for s in tree_truncated_scores(&g, &t, beta).map_err(|e| e.to_string())? {
            let (p, q) = (s.p, s.q);
            let phi: Vec<f64> = (0..n).map(|i| zinv[(i, p)] - zinv[(i, q)]).collect();
            let r = phi[p] - phi[q];
            let (np, nq) = (ball(&g, &tree_ids, p, beta), ball(&g, &tree_ids, q, beta));
            let sum: f64 = g
                .edges()
                .iter()
                .filter(|e| (np[e.u] && nq[e.v]) || (np[e.v] && nq[e.u]))
                .map(|e| e.w * (phi[e.u] - phi[e.v]).powi(2))
                .sum();
            let oracle = s.w * sum / (1.0 + s.w * r);
            worst = worst.max(rel_err(s.score, oracle));
            scored += 1;
        }
    }
    check(worst <= 1e-10, format!("{scored} edges, worst rel err {worst:.2e}"))
}

/// Exact `L⁻¹` column `j` by forward substitution over the factor's columns.
fn exact_inverse_column(f: &CholeskyFactor, j: usize) -> Vec<f64> {
    let mut x = vec![0.0; f.n()];
    x[j] = 1.0;
    for k in j..f.n() {
        if x[k] == 0.0 {
            continue;
        }
        let (rows, vals) = f.column(k);
        x[k] /= vals[0];
        let xk = x[k];
        for (&r, &v) in rows[1..].iter().zip(&vals[1..]) {
            x[r] -= v * xk;
        }
    }
    x
}

fn c3_approx_inverse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_exact = 0.0f64;
    for _ in 0..10 {
        let n = rng.random_range(10..=200);
        let g = random_connected(n, n, &mut rng);
        let lap = RegularizedLaplacian::build(&g, GammaPolicy::default()).unwrap();
        let f = factorize(&lap, Ordering::MinimumDegree).unwrap();
        let z = approx_inverse(&f, 0.0).unwrap();
        let (mut l, mut zd) = (DMatrix::zeros(n, n), DMatrix::zeros(n, n));
        for j in 0..n {
            let (rows, vals) = f.column(j);
            for (&r, &v) in rows.iter().zip(vals) {
                l[(r, j)] = v;
            }
            let (rows, vals) = z.column(j);
            for (&r, &v) in rows.iter().zip(vals) {
                zd[(r, j)] = v;
            }
        }
        let inv = l.solve_lower_triangular(&DMatrix::identity(n, n)).unwrap();
        worst_exact = worst_exact.max((&zd - &inv).amax());
    }

    let g = grid2d(64, 64).unwrap();
    let n = g.n();
    let sp = sparsify(&g, &SparsifyConfig::default()).unwrap();
    let f = factorize(&sp.laplacian(&g), Ordering::MinimumDegree).unwrap();
    let z = approx_inverse(&f, 0.1).unwrap();
    let bound = 4.0 * n as f64 * (n as f64).ln();
    let mut worst_col = 0.0f64;
    for j in 0..n {
        let exact = exact_inverse_column(&f, j);
        let mut approx = vec![0.0; n];
        let (rows, vals) = z.column(j);
        for (&r, &v) in rows.iter().zip(vals) {
            approx[r] = v;
        }
        let norm = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = exact.iter().zip(&approx).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst_col = worst_col.max(err / norm);
    }
    check(
        worst_exact <= 1e-10 && (z.nnz() as f64) <= bound && worst_col <= 10.0 * 0.1,
        format!(
            "delta=0 max abs err {worst_exact:.2e}; grid64 nnz {} <= {bound:.0}; worst column err {worst_col:.3}",
            z.nnz()
        ),
    )
}

fn c4_eigen_structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut worst_min, mut worst_slack) = (0.0f64, f64::INFINITY);
    for _ in 0..50 {
        let n = rng.random_range(10..=300);
        let g = random_connected(n, rng.random_range(n / 2..=2 * n), &mut rng);
        let s = g.edge_subgraph(&random_spanning_subset(&g, 0.1, &mut rng));
        let gamma = GammaPolicy::default().resolve(&g).unwrap();
        let (lg, ls) = (dense_laplacian(&g, gamma), dense_laplacian(&s, gamma));
        let (lo, hi) = pencil_extremes(&lg, &ls);
        worst_min = worst_min.max((lo - 1.0).abs());
        worst_slack = worst_slack.min(dense_trace(&lg, &ls) - hi);
    }
    check(
        worst_min <= 1e-8 && worst_slack >= 0.0,
        format!("max |lambda_min - 1| {worst_min:.2e}; min (trace - lambda_max) {worst_slack:.3}"),
    )
}

fn grid128_sparsifier() -> &'static (Graph, Sparsifier) {
    static CELL: std::sync::OnceLock<(Graph, Sparsifier)> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let g = grid2d(128, 128).unwrap();
        let sp = sparsify(&g, &SparsifyConfig::default()).unwrap();
        (g, sp)
    })
}

fn c5_grid_benchmark() -> Outcome {
    let (g, _) = grid128_sparsifier();
    let (mut kappa_ratio, mut iter_ratio) = (Vec::new(), Vec::new());
    let mut detail = Vec::new();
    for seed in 0..3u64 {
        let cfg = SparsifyConfig { seed, ..Default::default() };
        let sp = sparsify(g, &cfg).unwrap();
        let lg = RegularizedLaplacian::with_gamma(g, sp.gamma);
        let fp = factorize(&sp.laplacian(g), Ordering::MinimumDegree).unwrap();
        let ft = factorize(&sp.tree_laplacian(g), Ordering::MinimumDegree).unwrap();
        let kp = estimate_condition(&lg, &fp, 50, seed).unwrap();
        let kt = estimate_condition(&lg, &ft, 50, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..g.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, rp) = pcg_solve(&SolveContext::new(&lg, &fp, 1e-3).unwrap(), &b).unwrap();
        let (_, rt) = pcg_solve(&SolveContext::new(&lg, &ft, 1e-3).unwrap(), &b).unwrap();
        if !(rp.converged && rt.converged) {
            return Err(format!("seed {seed}: PCG did not converge"));
        }
        kappa_ratio.push(kt / kp);
        iter_ratio.push(rt.iterations as f64 / rp.iterations as f64);
        detail.push(format!("kappa {kt:.0}/{kp:.0} iters {}/{}", rt.iterations, rp.iterations));
    }
    let (mk, mi) = (median(kappa_ratio), median(iter_ratio));
    check(
        mk >= 2.0 && mi >= 1.5,
        format!("median kappa ratio {mk:.1}, iteration ratio {mi:.2}; {}", detail.join(", ")),
    )
}

fn c6_monotone() -> Outcome {
    let mut graphs: Vec<(String, Graph)> = vec![
        ("grid64".into(), grid2d(64, 64).unwrap()),
        ("rgg2000".into(), {
            let n = 2000;
            let r = (2.5 * (n as f64).ln() / n as f64 * 2.0).sqrt();
            random_geometric_in(n, 2.0, 1.0, r, 5).unwrap()
        }),
        ("pg64".into(), synthetic_power_grid(&PowerGridSpec::new(64, 64, 0)).unwrap().graph),
    ];
    let mut results = vec![("grid128".to_string(), grid128_sparsifier().1.clone())];
    for (name, g) in graphs.drain(..) {
        results.push((name, sparsify(&g, &SparsifyConfig::default()).unwrap()));
    }
    let mut bad = Vec::new();
    for (name, sp) in &results {
        let seq: Vec<f64> = std::iter::once(sp.tree_trace_estimate)
            .chain(sp.rounds.iter().map(|r| r.trace_estimate))
            .collect();
        if !seq.windows(2).all(|w| w[1] < w[0]) {
            bad.push(format!("{name}: {seq:?}"));
        }
    }
    check(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} graphs, {} rounds each", results.len(), results[0].1.rounds.len())
        } else {
            bad.join("; ")
        },
    )
}

fn c7_transient() -> Outcome {
    let sys = synthetic_power_grid(&PowerGridSpec::new(64, 64, 0)).unwrap();
    let mut reference: Vec<f64> = Vec::new();
    let direct = transient_simulate_observed(
        &sys,
        &TransientOptions {
            engine: Engine::Direct,
            ..Default::default()
        },
        |_, x| reference.extend_from_slice(x),
    )
    .map_err(|e| e.to_string())?;
    let mut offset = 0;
    let mut dev = 0.0f64;
    let pcg = transient_simulate_observed(
        &sys,
        &TransientOptions {
            engine: Engine::pcg(),
            ..Default::default()
        },
        |_, x| {
            for (a, b) in x.iter().zip(&reference[offset..]) {
                dev = dev.max((a - b).abs());
            }
            offset += x.len();
        },
    )
    .map_err(|e| e.to_string())?;
    let peak = direct.max_abs_voltage;
    check(
        offset == reference.len() && dev <= 1e-3 * peak,
        format!(
            "{} steps, max deviation {dev:.2e} V, peak {peak:.3} V, {} PCG iterations",
            pcg.steps, pcg.pcg_iterations
        ),
    )
}

fn c8_fiedler() -> Outcome {
    let n = 1000;
    let width = 2.0;
    let r = (2.5 * (n as f64).ln() / n as f64 * width).sqrt();
    let engine = FiedlerEngine::Pcg {
        sparsify: SparsifyConfig::default(),
        tol: 1e-3,
    };
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let g = random_geometric_in(n, width, 1.0, r, seed).unwrap();
        let oracle = dense_fiedler(&g).unwrap();
        let got = fiedler(&g, 5, &engine, seed).unwrap();
        worst = worst.max(partition_relerr(&got.partition, &oracle.partition).unwrap());
    }
    check(worst <= 0.01, format!("20 graphs n={n}, worst RelErr {worst:.4}"))
}

const TIMING_KEYS: [&str; 4] = ["time_s", "wall_time_s", "setup_time_s", "total_time_s"];

fn strip_timings(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| !(TIMING_KEYS.contains(&k.as_str()) || k == "T_s" || k == "T_i"));
            map.values_mut().for_each(strip_timings);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

/// Output files of a run keyed by name; JSON is normalized by dropping timings.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let mut bytes = std::fs::read(&p).unwrap();
            if p.extension().is_some_and(|e| e == "json") {
                let mut v: Value = serde_json::from_slice(&bytes).unwrap();
                strip_timings(&mut v);
                bytes = serde_json::to_vec(&v).unwrap();
            }
            out.insert(p.strip_prefix(dir).unwrap().display().to_string(), bytes);
        }
    }
    out
}

fn c9_determinism() -> Outcome {
    let runs: &[&[&str]] = &[
        &["sparsify", "--in", "grid:24x24", "--out", "p.mtx", "--stats", "s.json", "--dump-dir", "dump"],
        &["solve", "--graph", "grid:24x24", "--precond", "sparsifier", "--report", "solve.json", "--solution", "x.txt"],
        &["stats", "--graph", "rgg:400:0.1:3", "--out", "stats.json"],
        &["transient", "--graph", "pg:16x16:2", "--engine", "both", "--out", "w.csv", "--report", "t.json"],
        &["fiedler", "--graph", "rgg:500:0.1:4", "--out", "f.csv", "--report", "fr.json"],
        &["bench", "--graph", "grid:24x24", "--out", "bench.json"],
    ];
    let exe = env!("CARGO_BIN_EXE_sparsetrace");
    let mut snaps = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        for (k, args) in runs.iter().enumerate() {
            let status = Command::new(exe)
                .current_dir(dir.path())
                .args(["--seed", "7", "--manifest", &format!("run{k}.manifest.json")])
                .args(*args)
                .output()
                .unwrap();
            if !status.status.success() {
                return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&status.stderr)));
            }
        }
        snaps.push(snapshot(dir.path()));
    }
    let differing: Vec<&String> = snaps[0]
        .iter()
        .filter(|(k, v)| snaps[1].get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    check(
        differing.is_empty() && snaps[0].len() == snaps[1].len(),
        format!("{} files compared, differing: {differing:?}", snaps[0].len()),
    )
}
