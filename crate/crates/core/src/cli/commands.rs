use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::io::{emit_json, load_graph, load_rhs, read_node_values, write_vector, InputGraph};
use super::{
    BenchCmd, Cli, CmdResult, Command, EngineKind, Failure, FiedlerCmd, Outcome, PrecondKind, SolveCmd, SparsifyCmd,
    StatsCmd, TransientCmd, SCHEMA,
};
use crate::approx_inverse::approx_inverse;
use crate::cholesky::{factorize, CholeskyFactor, Ordering};
use crate::dense::DEFAULT_ORACLE_LIMIT;
use crate::error::Error;
use crate::graph::{Graph, RegularizedLaplacian};
use crate::mtx::{load_matrix_market, write_graph, write_remap_csv};
use crate::sim::{
    fiedler, partition_relerr, synthetic_power_grid, transient_simulate_observed, Engine, FiedlerEngine,
    PowerGridSpec, Source, StepPolicy, TransientOptions, TransientSystem,
};
use crate::solver::{dense_generalized_eigs, estimate_condition, estimate_trace, pcg_solve, SolveContext};
use crate::sparsify::{sparsify, sparsify_logged, RoundStats, SparsifyConfig};
use crate::trace::write_scores_csv;
use crate::tree::max_weight_spanning_tree;

pub(crate) fn dispatch(cli: &Cli) -> CmdResult<Outcome> {
    match &cli.command {
        Command::Sparsify(c) => sparsify_cmd(cli, c),
        Command::Solve(c) => solve_cmd(cli, c),
        Command::Stats(c) => stats_cmd(cli, c),
        Command::Transient(c) => transient_cmd(cli, c),
        Command::Fiedler(c) => fiedler_cmd(cli, c),
        Command::Bench(c) => bench_cmd(cli, c),
        Command::Replay(_) => unreachable!("replay is handled before dispatch"),
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn positive(name: &str, x: f64) -> CmdResult {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--{name} must be positive, got {x}")))
    }
}

fn at_least_one(name: &str, k: usize) -> CmdResult {
    if k >= 1 {
        Ok(())
    } else {
        Err(usage(format!("--{name} must be at least 1")))
    }
}

fn record(outcome: &mut Outcome, path: Option<&Path>) {
    if let Some(p) = path {
        outcome.outputs.push(p.to_path_buf());
    }
}

#[derive(Serialize)]
struct SparsifyStats {
    schema: u32,
    n: usize,
    m: usize,
    dropped_vertices: usize,
    alpha: usize,
    gamma: f64,
    tree_edges: usize,
    recovered: usize,
    marked: usize,
    tree_trace_estimate: f64,
    rounds: Vec<RoundStats>,
    wall_time_s: f64,
}

fn sparsify_cmd(cli: &Cli, c: &SparsifyCmd) -> CmdResult<Outcome> {
    let cfg = c.opts.config(cli.seed);
    let input = load_graph(&c.input)?;
    let g = &input.graph;
    let mut log = Vec::new();
    let sp = sparsify_logged(g, &cfg, c.dump_dir.as_ref().map(|_| &mut log))?;
    let mut outcome = Outcome::default();

    if let Some(out) = &c.out {
        write_graph(out, &sp.graph(g))?;
        record(&mut outcome, Some(out));
    }
    if let (Some(path), Some(remap)) = (&c.remap, &input.remap) {
        write_remap_csv(path, remap)?;
        record(&mut outcome, Some(path));
    }
    if let Some(dir) = &c.dump_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (k, scores) in log.iter().enumerate() {
            let p = dir.join(format!("scores_round{k}.csv"));
            write_scores_csv(&p, scores)?;
            outcome.outputs.push(p);
        }
        let lg = RegularizedLaplacian::with_gamma(g, sp.gamma);
        let m = lg.matrix();
        let p = dir.join("laplacian.mtx");
        crate::mtx::write_lower_csc(&p, m.n(), m.col_ptr(), m.row_idx(), m.values())?;
        outcome.outputs.push(p);
        let f = factorize(&sp.laplacian(g), Ordering::MinimumDegree)?;
        let p = dir.join("factor.mtx");
        f.write_mtx(&p)?;
        outcome.outputs.push(p);
        let p = dir.join("approx_inverse.mtx");
        approx_inverse(&f, cfg.delta)?.write_mtx(&p)?;
        outcome.outputs.push(p);
    }
    let stats = SparsifyStats {
        schema: SCHEMA,
        n: g.n(),
        m: g.m(),
        dropped_vertices: input.dropped,
        alpha: sp.alpha,
        gamma: sp.gamma,
        tree_edges: sp.tree_edges,
        recovered: sp.recovered.len(),
        marked: sp.marked,
        tree_trace_estimate: sp.tree_trace_estimate,
        rounds: sp.rounds.clone(),
        wall_time_s: sp.wall_time_s,
    };
    emit_json(c.stats.as_deref(), &stats)?;
    record(&mut outcome, c.stats.as_deref());
    Ok(outcome)
}

/// The preconditioner graph: a spanning tree, a sparsifier (built or read)
/// or `G` itself.
fn preconditioner_graph(
    g: &Graph,
    kind: PrecondKind,
    file: Option<&Path>,
    cfg: &SparsifyConfig,
) -> CmdResult<Graph> {
    Ok(match (kind, file) {
        (PrecondKind::Exact, _) => g.clone(),
        (PrecondKind::Tree, _) => g.edge_subgraph(max_weight_spanning_tree(g)?.edge_ids()),
        (PrecondKind::Sparsifier, Some(path)) => {
            let p = load_matrix_market(path)?;
            if p.graph.n() != g.n() {
                return Err(Error::Dimension {
                    expected: g.n(),
                    found: p.graph.n(),
                }
                .into());
            }
            p.graph
        }
        (PrecondKind::Sparsifier, None) => sparsify(g, cfg)?.graph(g),
    })
}

#[derive(Serialize)]
struct SolveReportJson {
    schema: u32,
    precond: PrecondKind,
    n: usize,
    m: usize,
    precond_edges: usize,
    iterations: usize,
    residual: f64,
    converged: bool,
    setup_time_s: f64,
    time_s: f64,
}

fn solve_cmd(cli: &Cli, c: &SolveCmd) -> CmdResult<Outcome> {
    positive("tol", c.tol)?;
    let cfg = c.opts.config(cli.seed);
    let InputGraph { graph: g, .. } = load_graph(&c.graph)?;
    let b = load_rhs(&c.rhs, g.n())?;
    let gamma = cfg.gamma.resolve(&g)?;
    let lg = RegularizedLaplacian::with_gamma(&g, gamma);
    let setup = Instant::now();
    let pg = preconditioner_graph(&g, c.precond, c.precond_graph.as_deref(), &cfg)?;
    let f = factorize(&RegularizedLaplacian::with_gamma(&pg, gamma), Ordering::MinimumDegree)?;
    let setup_time_s = setup.elapsed().as_secs_f64();
    let mut ctx = SolveContext::new(&lg, &f, c.tol)?;
    if let Some(k) = c.max_iter {
        ctx = ctx.with_max_iter(k);
    }
    let (x, rep) = pcg_solve(&ctx, &b)?;
    let mut outcome = Outcome {
        unconverged: !rep.converged,
        ..Default::default()
    };
    if let Some(p) = &c.solution {
        write_vector(p, &x)?;
        record(&mut outcome, Some(p));
    }
    let report = SolveReportJson {
        schema: SCHEMA,
        precond: c.precond,
        n: g.n(),
        m: g.m(),
        precond_edges: pg.m(),
        iterations: rep.iterations,
        residual: rep.residual,
        converged: rep.converged,
        setup_time_s,
        time_s: rep.time_s,
    };
    emit_json(c.report.as_deref(), &report)?;
    record(&mut outcome, c.report.as_deref());
    Ok(outcome)
}

#[derive(Serialize)]
struct StatsJson {
    schema: u32,
    n: usize,
    m: usize,
    precond_edges: usize,
    trace_estimate: f64,
    kappa_estimate: f64,
    /// Smallest generalized eigenvalue by dense solve (small graphs only).
    lambda_min_check: Option<f64>,
    lambda_max_dense: Option<f64>,
}

fn stats_cmd(cli: &Cli, c: &StatsCmd) -> CmdResult<Outcome> {
    at_least_one("kappa-iters", c.kappa_iters)?;
    let cfg = c.opts.config(cli.seed);
    let InputGraph { graph: g, .. } = load_graph(&c.graph)?;
    let gamma = cfg.gamma.resolve(&g)?;
    let lg = RegularizedLaplacian::with_gamma(&g, gamma);
    let pg = preconditioner_graph(&g, PrecondKind::Sparsifier, c.precond_graph.as_deref(), &cfg)?;
    let lp = RegularizedLaplacian::with_gamma(&pg, gamma);
    let f = factorize(&lp, Ordering::MinimumDegree)?;
    let trace_estimate = estimate_trace(&lg, &f, cfg.trace_probes, cli.seed)?;
    let kappa_estimate = estimate_condition(&lg, &f, c.kappa_iters, cli.seed)?;
    let dense = if g.n() <= DEFAULT_ORACLE_LIMIT {
        Some(dense_generalized_eigs(&lg, &lp)?)
    } else {
        None
    };
    let stats = StatsJson {
        schema: SCHEMA,
        n: g.n(),
        m: g.m(),
        precond_edges: pg.m(),
        trace_estimate,
        kappa_estimate,
        lambda_min_check: dense.map(|d| d.0),
        lambda_max_dense: dense.map(|d| d.1),
    };
    emit_json(c.out.as_deref(), &stats)?;
    let mut outcome = Outcome::default();
    record(&mut outcome, c.out.as_deref());
    Ok(outcome)
}

fn parse_power_grid(spec: &str, horizon: f64, seed: u64) -> CmdResult<Option<PowerGridSpec>> {
    let Some(rest) = spec.strip_prefix("pg:") else {
        return Ok(None);
    };
    let bad = || usage(format!("expected pg:<rows>x<cols>[:<seed>], got `{spec}`"));
    let (dims, s) = match rest.split_once(':') {
        Some((d, s)) => (d, s.parse().map_err(|_| bad())?),
        None => (rest, seed),
    };
    let (r, c) = dims.split_once('x').ok_or_else(bad)?;
    let mut pg = PowerGridSpec::new(r.parse().map_err(|_| bad())?, c.parse().map_err(|_| bad())?, s);
    pg.horizon = horizon;
    Ok(Some(pg))
}

fn transient_system(cli: &Cli, c: &TransientCmd) -> CmdResult<TransientSystem> {
    let mut sys = if let Some(spec) = parse_power_grid(&c.graph, c.horizon, cli.seed)? {
        synthetic_power_grid(&spec)?
    } else {
        let input = load_graph(&c.graph)?;
        let n = input.graph.n();
        let ground = match input.excess {
            Some(e) if e.iter().any(|&x| x > 0.0) => e.iter().map(|&x| x.max(0.0)).collect(),
            _ => vec![c.opts.gamma.resolve(&input.graph)?; n],
        };
        TransientSystem::new(input.graph, ground, vec![0.0; n], vec![0.0; n], Vec::new(), c.horizon)?
    };
    let n = sys.n();
    if let Some(p) = &c.cap {
        sys.cap = read_node_values(p, n)?;
    }
    if let Some(p) = &c.sources {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let sources: Vec<Source> = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: p.clone(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        sys.sources = sources;
    }
    Ok(TransientSystem::new(sys.graph, sys.ground, sys.cap, sys.bias, sys.sources, sys.horizon)?)
}

#[derive(Serialize)]
struct EngineRun {
    engine: &'static str,
    steps: usize,
    factorizations: usize,
    pcg_iterations: usize,
    max_abs_voltage: f64,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct TransientReport {
    schema: u32,
    n: usize,
    sources: usize,
    runs: Vec<EngineRun>,
    /// Largest |x_pcg - x_direct| over all nodes and steps.
    max_deviation: Option<f64>,
}

fn transient_cmd(cli: &Cli, c: &TransientCmd) -> CmdResult<Outcome> {
    positive("horizon", c.horizon)?;
    positive("hmax", c.hmax)?;
    positive("tol", c.tol)?;
    if let Some(h) = c.step {
        positive("step", h)?;
    }
    let sys = transient_system(cli, c)?;
    let policy = match c.step {
        Some(h) => StepPolicy::Fixed { h },
        None => StepPolicy::Breakpoints { h_max: c.hmax },
    };
    let mut engines = Vec::new();
    if matches!(c.engine, EngineKind::Direct | EngineKind::Both) {
        engines.push(("direct", Engine::Direct));
    }
    if matches!(c.engine, EngineKind::Pcg | EngineKind::Both) {
        engines.push((
            "pcg",
            Engine::Pcg {
                sparsify: c.opts.config(cli.seed),
                tol: c.tol,
            },
        ));
    }
    let mut runs = Vec::new();
    let mut waves = Vec::new();
    let mut reference: Vec<f64> = Vec::new();
    let mut deviation: Option<f64> = None;
    for (k, (name, engine)) in engines.into_iter().enumerate() {
        let opts = TransientOptions {
            policy,
            engine,
            source_at_step_end: !c.source_at_start,
            probes: c.probe.clone(),
        };
        let mut offset = 0;
        let res = transient_simulate_observed(&sys, &opts, |_, x| {
            if k == 0 {
                reference.extend_from_slice(x);
            } else {
                let d = x
                    .iter()
                    .zip(&reference[offset..offset + x.len()])
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                deviation = Some(deviation.unwrap_or(0.0).max(d));
                offset += x.len();
            }
        })?;
        runs.push(EngineRun {
            engine: name,
            steps: res.steps,
            factorizations: res.factorizations,
            pcg_iterations: res.pcg_iterations,
            max_abs_voltage: res.max_abs_voltage,
            wall_time_s: res.wall_time_s,
        });
        waves.push(res.waveforms);
    }

    let mut outcome = Outcome::default();
    if let Some(path) = &c.out {
        let mut w = csv::Writer::from_path(path).map_err(|e| crate::mtx::csv_err(path, e))?;
        let mut header = vec!["time".to_string(), "node".to_string()];
        if runs.len() == 1 {
            header.push("voltage".into());
        } else {
            header.extend(runs.iter().map(|r| format!("voltage_{}", r.engine)));
        }
        w.write_record(&header).map_err(|e| crate::mtx::csv_err(path, e))?;
        for (p, wf) in waves[0].iter().enumerate() {
            for (s, &(t, v)) in wf.samples.iter().enumerate() {
                let mut row = vec![t.to_string(), wf.node.to_string(), v.to_string()];
                row.extend(waves[1..].iter().map(|other| other[p].samples[s].1.to_string()));
                w.write_record(&row).map_err(|e| crate::mtx::csv_err(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        record(&mut outcome, Some(path));
    }
    let report = TransientReport {
        schema: SCHEMA,
        n: sys.n(),
        sources: sys.sources.len(),
        runs,
        max_deviation: deviation,
    };
    emit_json(c.report.as_deref(), &report)?;
    record(&mut outcome, c.report.as_deref());
    Ok(outcome)
}

#[derive(Serialize)]
struct FiedlerReport {
    schema: u32,
    n: usize,
    steps: usize,
    engines: Vec<&'static str>,
    pcg_iterations: Option<usize>,
    /// Fraction of vertices the two engines assign differently.
    relerr: Option<f64>,
    cut_sizes: Vec<usize>,
}

fn fiedler_cmd(cli: &Cli, c: &FiedlerCmd) -> CmdResult<Outcome> {
    at_least_one("steps", c.steps)?;
    positive("tol", c.tol)?;
    let InputGraph { graph: g, .. } = load_graph(&c.graph)?;
    let mut results = Vec::new();
    if matches!(c.engine, EngineKind::Direct | EngineKind::Both) {
        results.push(("direct", fiedler(&g, c.steps, &FiedlerEngine::Direct, cli.seed)?));
    }
    if matches!(c.engine, EngineKind::Pcg | EngineKind::Both) {
        let engine = FiedlerEngine::Pcg {
            sparsify: c.opts.config(cli.seed),
            tol: c.tol,
        };
        results.push(("pcg", fiedler(&g, c.steps, &engine, cli.seed)?));
    }
    let relerr = match results.as_slice() {
        [(_, a), (_, b)] => Some(partition_relerr(&a.partition, &b.partition)?),
        _ => None,
    };
    let mut outcome = Outcome::default();
    if let Some(path) = &c.out {
        let mut w = csv::Writer::from_path(path).map_err(|e| crate::mtx::csv_err(path, e))?;
        let mut header = vec!["node".to_string()];
        if results.len() == 1 {
            header.push("label".into());
        } else {
            header.extend(results.iter().map(|r| format!("label_{}", r.0)));
        }
        w.write_record(&header).map_err(|e| crate::mtx::csv_err(path, e))?;
        for v in 0..g.n() {
            let mut row = vec![v.to_string()];
            row.extend(results.iter().map(|r| r.1.partition[v].to_string()));
            w.write_record(&row).map_err(|e| crate::mtx::csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        record(&mut outcome, Some(path));
    }
    let first = &results[0].1;
    let ones = first.partition.iter().filter(|&&l| l == 1).count();
    let report = FiedlerReport {
        schema: SCHEMA,
        n: g.n(),
        steps: c.steps,
        engines: results.iter().map(|r| r.0).collect(),
        pcg_iterations: results.iter().find(|r| r.0 == "pcg").map(|r| r.1.pcg_iterations),
        relerr,
        cut_sizes: vec![g.n() - ones, ones],
    };
    emit_json(c.report.as_deref(), &report)?;
    record(&mut outcome, c.report.as_deref());
    Ok(outcome)
}

#[derive(Serialize)]
struct BenchRow {
    preconditioner: &'static str,
    repeat: usize,
    edges: usize,
    #[serde(rename = "T_s")]
    t_s: f64,
    kappa_est: f64,
    #[serde(rename = "N_i")]
    n_i: usize,
    #[serde(rename = "T_i")]
    t_i: f64,
    converged: bool,
}

#[derive(Serialize)]
struct BenchReport {
    schema: u32,
    graph: String,
    n: usize,
    m: usize,
    tol: f64,
    alpha: usize,
    tree_trace_estimate: f64,
    rounds: Vec<RoundStats>,
    rows: Vec<BenchRow>,
}

#[allow(clippy::too_many_arguments)]
fn bench_row(
    name: &'static str,
    repeat: usize,
    lg: &RegularizedLaplacian,
    p: &Graph,
    setup: Instant,
    f: &CholeskyFactor,
    c: &BenchCmd,
    seed: u64,
) -> CmdResult<BenchRow> {
    let t_s = setup.elapsed().as_secs_f64();
    let kappa_est = estimate_condition(lg, f, c.kappa_iters, seed)?;
    let b = load_rhs(&format!("random:{seed}"), lg.n())?;
    let (_, rep) = pcg_solve(&SolveContext::new(lg, f, c.tol)?, &b)?;
    Ok(BenchRow {
        preconditioner: name,
        repeat,
        edges: p.m(),
        t_s,
        kappa_est,
        n_i: rep.iterations,
        t_i: rep.time_s,
        converged: rep.converged,
    })
}

fn bench_cmd(cli: &Cli, c: &BenchCmd) -> CmdResult<Outcome> {
    positive("tol", c.tol)?;
    at_least_one("repeat", c.repeat)?;
    at_least_one("kappa-iters", c.kappa_iters)?;
    let cfg = c.opts.config(cli.seed);
    let InputGraph { graph: g, .. } = load_graph(&c.graph)?;
    let gamma = cfg.gamma.resolve(&g)?;
    let lg = RegularizedLaplacian::with_gamma(&g, gamma);
    let mut rows = Vec::new();
    let mut first = None;
    for r in 0..c.repeat {
        let setup = Instant::now();
        let tree = g.edge_subgraph(max_weight_spanning_tree(&g)?.edge_ids());
        let ft = factorize(&RegularizedLaplacian::with_gamma(&tree, gamma), Ordering::MinimumDegree)?;
        rows.push(bench_row("tree", r, &lg, &tree, setup, &ft, c, cli.seed)?);

        let setup = Instant::now();
        let sp = sparsify(&g, &cfg)?;
        let pg = sp.graph(&g);
        let fp = factorize(&sp.laplacian(&g), Ordering::MinimumDegree)?;
        rows.push(bench_row("sparsifier", r, &lg, &pg, setup, &fp, c, cli.seed)?);
        first.get_or_insert(sp);
    }
    let sp = first.expect("repeat >= 1");
    let unconverged = rows.iter().any(|r| !r.converged);
    let report = BenchReport {
        schema: SCHEMA,
        graph: c.graph.clone(),
        n: g.n(),
        m: g.m(),
        tol: c.tol,
        alpha: sp.alpha,
        tree_trace_estimate: sp.tree_trace_estimate,
        rounds: sp.rounds,
        rows,
    };
    emit_json(c.out.as_deref(), &report)?;
    let mut outcome = Outcome {
        unconverged,
        ..Default::default()
    };
    record(&mut outcome, c.out.as_deref());
    Ok(outcome)
}
