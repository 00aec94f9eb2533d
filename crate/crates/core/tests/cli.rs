use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsetrace"))
        .current_dir(dir)
        .args(["--manifest", "m.json"])
        .args(args)
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const TRIANGLE: &str = "%%MatrixMarket matrix coordinate real symmetric\n3 3 3\n2 1 1\n3 1 1\n3 2 1\n";

#[test]
fn triangle_sparsifier_keeps_all_edges() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tri.mtx"), TRIANGLE).unwrap();
    let out = run(
        dir.path(),
        &["sparsify", "--in", "tri.mtx", "--alpha-frac", "1.0", "--iters", "1", "--out", "p.mtx", "--stats", "s.json"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p = sparsetrace::mtx::load_matrix_market(dir.path().join("p.mtx")).unwrap();
    assert_eq!(p.graph.m(), 3);
    let s = json(&dir.path().join("s.json"));
    assert_eq!(s["schema"], 1);
    assert_eq!(s["tree_edges"], 2);
    assert_eq!(s["recovered"], 1);
    assert_eq!(s["rounds"].as_array().unwrap().len(), 1);
    let m = json(&dir.path().join("m.json"));
    assert_eq!(m["exit_code"], 0);
}

#[test]
fn exact_preconditioner_takes_one_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["solve", "--graph", "grid:12x12", "--precond", "exact", "--report", "r.json"]);
    assert!(out.status.success());
    let r = json(&dir.path().join("r.json"));
    assert_eq!(r["iterations"], 1);
    assert_eq!(r["converged"], true);
    assert_eq!(r["schema"], 1);
}

#[test]
fn solve_with_saved_sparsifier() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["sparsify", "--in", "grid:20x20", "--out", "p.mtx", "--stats", "s.json"]).status.success());
    let out = run(
        dir.path(),
        &["solve", "--graph", "grid:20x20", "--precond-graph", "p.mtx", "--report", "r.json", "--solution", "x.txt"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&dir.path().join("r.json"));
    assert_eq!(r["precond_edges"], 399 + 40);
    let x = std::fs::read_to_string(dir.path().join("x.txt")).unwrap();
    assert_eq!(x.lines().count(), 400);
}

#[test]
fn bench_reports_tree_and_sparsifier_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["bench", "--graph", "grid:24x24", "--out", "b.json"]);
    assert!(out.status.success());
    let b = json(&dir.path().join("b.json"));
    let rows = b["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["preconditioner"], "tree");
    assert_eq!(rows[1]["preconditioner"], "sparsifier");
    for key in ["T_s", "kappa_est", "N_i", "T_i"] {
        assert!(rows[0].get(key).is_some(), "missing {key}");
    }
    assert!(rows[1]["N_i"].as_u64() < rows[0]["N_i"].as_u64());
    assert_eq!(b["rounds"].as_array().unwrap().len(), 5);
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["--seed", "3", "fiedler", "--graph", "rgg:300:0.12:1", "--out", "f.csv"]).status.success());
    let first = std::fs::read(dir.path().join("f.csv")).unwrap();
    std::fs::copy(dir.path().join("m.json"), dir.path().join("saved.json")).unwrap();
    std::fs::remove_file(dir.path().join("f.csv")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sparsetrace"))
        .current_dir(dir.path())
        .args(["replay", "saved.json"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(dir.path().join("f.csv")).unwrap(), first);
    let header = String::from_utf8(first).unwrap();
    assert!(header.starts_with("node,label_direct,label_pcg\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| run(dir.path(), args).status.code();
    assert_eq!(code(&["nonsense"]), Some(2));
    assert_eq!(code(&["solve", "--graph", "grid:4x4", "--tol", "0"]), Some(2));
    assert_eq!(code(&["sparsify", "--in", "grid:8x8", "--alpha-frac", "0"]), Some(2));
    assert_eq!(code(&["sparsify", "--in", "grid:8x8", "--iters", "0"]), Some(2));
    assert_eq!(code(&["solve", "--graph", "missing.mtx"]), Some(1));
    let slow = ["solve", "--graph", "grid:16x16", "--precond", "tree", "--max-iter", "1", "--report", "r.json"];
    assert_eq!(code(&slow), Some(0));
    assert_eq!(json(&dir.path().join("r.json"))["converged"], false);
    let mut strict = vec!["--strict"];
    strict.extend(slow);
    assert_eq!(code(&strict), Some(1));
    assert_eq!(json(&dir.path().join("m.json"))["exit_code"], 1);
}

#[test]
fn file_input_drops_small_components_and_writes_remap() {
    let dir = tempfile::tempdir().unwrap();
    // a 4-cycle on vertices 1..4 and an isolated edge 5-6
    let mtx = "%%MatrixMarket matrix coordinate real symmetric\n6 6 5\n2 1 1\n3 2 1\n4 3 1\n4 1 2\n6 5 1\n";
    std::fs::write(dir.path().join("g.mtx"), mtx).unwrap();
    let out = run(
        dir.path(),
        &["sparsify", "--in", "g.mtx", "--alpha-frac", "0.25", "--iters", "1", "--remap", "remap.csv", "--stats", "s.json"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&dir.path().join("s.json"));
    assert_eq!(s["n"], 4);
    assert_eq!(s["dropped_vertices"], 2);
    let remap = std::fs::read_to_string(dir.path().join("remap.csv")).unwrap();
    assert_eq!(remap.lines().count(), 5);
}

#[test]
fn transient_on_a_file_graph_with_sources() {
    let dir = tempfile::tempdir().unwrap();
    // SDD matrix: a path 0-1-2 with an extra 1 S to ground at node 0
    let mtx = "%%MatrixMarket matrix coordinate real symmetric\n3 3 5\n1 1 2\n2 2 2\n3 3 1\n2 1 -1\n3 2 -1\n";
    std::fs::write(dir.path().join("g.mtx"), mtx).unwrap();
    std::fs::write(dir.path().join("cap.csv"), "node,value\n0,1e-12\n1,1e-12\n2,1e-12\n").unwrap();
    std::fs::write(
        dir.path().join("src.json"),
        r#"[{"node": 2, "points": [[0.0, 0.0], [1e-10, 1e-3], [1e-9, 1e-3]]}]"#,
    )
    .unwrap();
    let out = run(
        dir.path(),
        &[
            "transient", "--graph", "g.mtx", "--cap", "cap.csv", "--sources", "src.json", "--horizon", "1e-9",
            "--engine", "both", "--probe", "0,2", "--out", "w.csv", "--report", "t.json",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = json(&dir.path().join("t.json"));
    assert_eq!(t["runs"].as_array().unwrap().len(), 2);
    assert!(t["max_deviation"].as_f64().unwrap() < 1e-6);
    let csv = std::fs::read_to_string(dir.path().join("w.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    // steady state: 1 mA into node 2 through 3 Ω to ground gives 3 mV
    let v: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
    assert!((v - 3e-3).abs() < 1e-5, "{last}");
}

#[test]
fn stats_reports_dense_check_for_small_graphs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["stats", "--graph", "grid:10x10", "--out", "s.json"]);
    assert!(out.status.success());
    let s = json(&dir.path().join("s.json"));
    assert!((s["lambda_min_check"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    let kappa = s["kappa_estimate"].as_f64().unwrap();
    let dense = s["lambda_max_dense"].as_f64().unwrap();
    assert!((kappa - dense).abs() <= 1e-3 * dense);
    assert!(s["trace_estimate"].as_f64().unwrap() > kappa);
}
