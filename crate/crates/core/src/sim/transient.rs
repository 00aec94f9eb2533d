//! Backward-Euler transient analysis of RC networks:
//! `(L_G + C/h) x(t+h) = (C/h) x(t) + u(t+h)`, started from the DC solution.

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cholesky::{factorize, CholeskyFactor, Ordering};
use crate::error::{Error, Result};
use crate::generate::grid2d;
use crate::graph::{Graph, RegularizedLaplacian, SparseSymMatrix};
use crate::solver::{pcg_solve_observed, SolveContext};
use crate::sparsify::{sparsify, SparsifyConfig};

/// Piecewise-linear waveform, constant outside its first and last points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pwl {
    pub points: Vec<(f64, f64)>,
}

impl Pwl {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("waveform needs at least one point".into()));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Config("waveform times must be strictly increasing".into()));
        }
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::Config("waveform samples must be finite".into()));
        }
        Ok(Pwl { points })
    }

    pub fn constant(value: f64) -> Self {
        Pwl {
            points: vec![(0.0, value)],
        }
    }

    /// Trapezoidal pulse train from `low` to `high`, repeated every `period`
    /// until `horizon`.
    #[allow(clippy::too_many_arguments)]
    pub fn pulse(low: f64, high: f64, delay: f64, rise: f64, width: f64, fall: f64, period: f64, horizon: f64) -> Result<Self> {
        if !(rise > 0.0 && fall > 0.0 && width >= 0.0 && delay >= 0.0) || rise + width + fall > period {
            return Err(Error::Config("inconsistent pulse timing".into()));
        }
        let mut pts = vec![(0.0, low)];
        let mut start = delay;
        while start < horizon {
            for (dt, v) in [(0.0, low), (rise, high), (rise + width, high), (rise + width + fall, low)] {
                let t = start + dt;
                if t > horizon {
                    break;
                }
                if t > pts.last().unwrap().0 {
                    pts.push((t, v));
                }
            }
            start += period;
        }
        Pwl::new(pts)
    }

    pub fn value(&self, t: f64) -> f64 {
        let p = &self.points;
        if t <= p[0].0 {
            return p[0].1;
        }
        let k = p.partition_point(|s| s.0 <= t);
        if k == p.len() {
            return p[k - 1].1;
        }
        let (t0, v0) = p[k - 1];
        let (t1, v1) = p[k];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub node: usize,
    #[serde(flatten)]
    pub waveform: Pwl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepPolicy {
    Fixed { h: f64 },
    /// Land on every source breakpoint; no step longer than `h_max`.
    Breakpoints { h_max: f64 },
}

/// An RC network: conductance graph, conductance to ground per node,
/// capacitance per node, constant injections and time-varying sources.
#[derive(Debug, Clone)]
pub struct TransientSystem {
    pub graph: Graph,
    pub ground: Vec<f64>,
    pub cap: Vec<f64>,
    pub bias: Vec<f64>,
    pub sources: Vec<Source>,
    pub horizon: f64,
}

impl TransientSystem {
    pub fn new(graph: Graph, ground: Vec<f64>, cap: Vec<f64>, bias: Vec<f64>, sources: Vec<Source>, horizon: f64) -> Result<Self> {
        let n = graph.n();
        for v in [&ground, &cap, &bias] {
            crate::dense::check_same_dim(n, v.len())?;
        }
        if !(horizon > 0.0) {
            return Err(Error::Config(format!("horizon {horizon} must be positive")));
        }
        if ground.iter().chain(&cap).any(|&x| !(x >= 0.0)) {
            return Err(Error::Config("capacitance and ground conductance must be nonnegative".into()));
        }
        for s in &sources {
            if s.node >= n {
                return Err(Error::Config(format!("source node {} out of range", s.node)));
            }
            if s.waveform.breakpoints().any(|t| !(0.0..=horizon).contains(&t)) {
                return Err(Error::Config(format!("waveform at node {} leaves [0, horizon]", s.node)));
            }
        }
        Ok(TransientSystem {
            graph,
            ground,
            cap,
            bias,
            sources,
            horizon,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn conductance(&self) -> RegularizedLaplacian {
        RegularizedLaplacian::with_shift(&self.graph, self.ground.clone())
    }

    pub fn rhs_source(&self, t: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for s in &self.sources {
            out[s.node] += s.waveform.value(t);
        }
    }

    /// Step end times after 0.
    pub fn step_times(&self, policy: StepPolicy) -> Result<Vec<f64>> {
        let horizon = self.horizon;
        let mut times = Vec::new();
        match policy {
            StepPolicy::Fixed { h } => {
                if !(h > 0.0) {
                    return Err(Error::Config(format!("step {h} must be positive")));
                }
                let steps = (horizon / h - 1e-9).ceil().max(1.0) as usize;
                times.extend((1..steps).map(|k| k as f64 * h));
                times.push(horizon);
            }
            StepPolicy::Breakpoints { h_max } => {
                if !(h_max > 0.0) {
                    return Err(Error::Config(format!("h_max {h_max} must be positive")));
                }
                let mut marks: Vec<f64> = self
                    .sources
                    .iter()
                    .flat_map(|s| s.waveform.breakpoints())
                    .filter(|&t| t > 0.0 && t < horizon)
                    .collect();
                marks.push(horizon);
                marks.sort_by(f64::total_cmp);
                marks.dedup();
                let mut prev = 0.0;
                for m in marks {
                    let k = ((m - prev) / h_max - 1e-9).ceil().max(1.0) as usize;
                    let h = (m - prev) / k as f64;
                    times.extend((1..k).map(|i| prev + i as f64 * h));
                    times.push(m);
                    prev = m;
                }
            }
        }
        Ok(times)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Direct,
    /// PCG preconditioned by a sparsifier of the conductance graph, built
    /// once for the DC system and kept for every step.
    Pcg { sparsify: SparsifyConfig, tol: f64 },
}

impl Engine {
    pub fn pcg() -> Self {
        Engine::Pcg {
            sparsify: SparsifyConfig::default(),
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransientOptions {
    pub policy: StepPolicy,
    pub engine: Engine,
    /// Evaluate the source at the end of each step (fully implicit);
    /// `false` uses its value at the start.
    pub source_at_step_end: bool,
    pub probes: Vec<usize>,
}

impl Default for TransientOptions {
    fn default() -> Self {
        TransientOptions {
            policy: StepPolicy::Breakpoints { h_max: 200e-12 },
            engine: Engine::Direct,
            source_at_step_end: true,
            probes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Waveform {
    pub node: usize,
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransientResult {
    pub waveforms: Vec<Waveform>,
    pub steps: usize,
    pub factorizations: usize,
    pub pcg_iterations: usize,
    pub max_abs_voltage: f64,
    pub wall_time_s: f64,
}

enum Solver {
    Direct {
        factors: HashMap<u64, CholeskyFactor>,
    },
    Pcg {
        precond: CholeskyFactor,
        matrices: HashMap<u64, SparseSymMatrix>,
        tol: f64,
    },
}

pub fn transient_simulate(sys: &TransientSystem, opts: &TransientOptions) -> Result<TransientResult> {
    transient_simulate_observed(sys, opts, |_, _| {})
}

/// Runs the simulation, calling `observe(t, x)` at `t = 0` and after every
/// step.
pub fn transient_simulate_observed(
    sys: &TransientSystem,
    opts: &TransientOptions,
    mut observe: impl FnMut(f64, &[f64]),
) -> Result<TransientResult> {
    let start = Instant::now();
    let n = sys.n();
    if let Some(&p) = opts.probes.iter().find(|&&p| p >= n) {
        return Err(Error::Config(format!("probe node {p} out of range")));
    }
    let times = sys.step_times(opts.policy)?;
    let lg = sys.conductance();
    let mut factorizations = 0;
    let mut pcg_iterations = 0;

    let mut u = vec![0.0; n];
    sys.rhs_source(0.0, &mut u);
    let (mut solver, mut x) = match &opts.engine {
        Engine::Direct => {
            let f = factorize(&lg, Ordering::MinimumDegree)?;
            factorizations += 1;
            let x = f.solve(&u);
            let mut factors = HashMap::new();
            factors.insert(0f64.to_bits(), f);
            (Solver::Direct { factors }, x)
        }
        Engine::Pcg { sparsify: cfg, tol } => {
            let precond = if sys.graph.m() + 1 > n {
                let sp = sparsify(&sys.graph, cfg)?;
                let lp = RegularizedLaplacian::with_shift(&sp.graph(&sys.graph), sys.ground.clone());
                factorize(&lp, Ordering::MinimumDegree)?
            } else {
                factorize(&lg, Ordering::MinimumDegree)?
            };
            factorizations += 1;
            let ctx = SolveContext::new(&lg, &precond, *tol)?;
            let (x, rep) = pcg_solve_observed(&ctx, &u, None, |_, _| {})?;
            pcg_iterations += rep.iterations;
            check_converged(rep.converged, 0.0)?;
            (
                Solver::Pcg {
                    precond,
                    matrices: HashMap::new(),
                    tol: *tol,
                },
                x,
            )
        }
    };

    let mut waveforms: Vec<Waveform> = opts
        .probes
        .iter()
        .map(|&node| Waveform {
            node,
            samples: vec![(0.0, x[node])],
        })
        .collect();
    let mut max_abs = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    observe(0.0, &x);

    let mut rhs = vec![0.0; n];
    let mut t = 0.0;
    for &t_next in &times {
        let h = t_next - t;
        sys.rhs_source(if opts.source_at_step_end { t_next } else { t }, &mut u);
        for i in 0..n {
            rhs[i] = sys.cap[i] / h * x[i] + u[i];
        }
        let key = h.to_bits();
        let step_matrix = || lg.matrix().add_diagonal(&sys.cap.iter().map(|c| c / h).collect::<Vec<_>>());
        match &mut solver {
            Solver::Direct { factors } => {
                if let std::collections::hash_map::Entry::Vacant(slot) = factors.entry(key) {
                    slot.insert(CholeskyFactor::factorize(&step_matrix(), Ordering::MinimumDegree)?);
                    factorizations += 1;
                }
                x = factors[&key].solve(&rhs);
            }
            Solver::Pcg { precond, matrices, tol } => {
                let a = matrices.entry(key).or_insert_with(step_matrix);
                let ctx = SolveContext::for_matrix(a, &*precond, *tol)?;
                let (next, rep) = pcg_solve_observed(&ctx, &rhs, Some(&x), |_, _| {})?;
                pcg_iterations += rep.iterations;
                check_converged(rep.converged, t_next)?;
                x = next;
            }
        }
        t = t_next;
        for w in waveforms.iter_mut() {
            w.samples.push((t, x[w.node]));
        }
        max_abs = x.iter().fold(max_abs, |a, v| a.max(v.abs()));
        observe(t, &x);
    }

    Ok(TransientResult {
        waveforms,
        steps: times.len(),
        factorizations,
        pcg_iterations,
        max_abs_voltage: max_abs,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn check_converged(converged: bool, t: f64) -> Result<()> {
    if converged {
        Ok(())
    } else {
        Err(Error::Singular(format!("PCG did not converge at t = {t:e}")))
    }
}

/// Parameters of the synthetic power grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerGridSpec {
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    /// Every `pad_stride`-th row and column crossing holds a supply pad.
    pub pad_stride: usize,
    pub pad_conductance: f64,
    pub vdd: f64,
    /// Fraction of nodes drawing a pulsed load current.
    pub load_fraction: f64,
    pub load_peak: f64,
    pub horizon: f64,
}

impl PowerGridSpec {
    pub fn new(rows: usize, cols: usize, seed: u64) -> Self {
        PowerGridSpec {
            rows,
            cols,
            seed,
            pad_stride: 8,
            pad_conductance: 10.0,
            vdd: 1.0,
            load_fraction: 0.1,
            load_peak: 1e-2,
            horizon: 5e-9,
        }
    }
}

/// Grid with conductances in [1, 10] S, capacitances in [1, 10] pF, supply
/// pads modeled as Norton sources and periodic trapezoidal load pulses on a
/// 50 ps timing grid.
pub fn synthetic_power_grid(spec: &PowerGridSpec) -> Result<TransientSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let base = grid2d(spec.rows, spec.cols)?;
    let edges = base
        .edges()
        .iter()
        .map(|e| crate::graph::Edge::new(e.u, e.v, rng.random_range(1.0..=10.0)))
        .collect();
    let graph = Graph::new(base.n(), edges)?;
    let n = graph.n();
    let cap: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..=10.0) * 1e-12).collect();
    let mut ground = vec![0.0; n];
    let mut bias = vec![0.0; n];
    let stride = spec.pad_stride.max(1);
    for r in (0..spec.rows).step_by(stride) {
        for c in (0..spec.cols).step_by(stride) {
            let v = r * spec.cols + c;
            ground[v] = spec.pad_conductance;
            bias[v] = spec.pad_conductance * spec.vdd;
        }
    }
    let tick = 50e-12;
    let mut sources = Vec::new();
    for (node, &g0) in ground.iter().enumerate() {
        if g0 > 0.0 || rng.random::<f64>() >= spec.load_fraction {
            continue;
        }
        let peak = -spec.load_peak * rng.random_range(0.2..=1.0);
        let delay = tick * rng.random_range(0..10) as f64;
        let width = tick * rng.random_range(1..=6) as f64;
        let wf = Pwl::pulse(0.0, peak, delay, tick, width, tick, 1e-9, spec.horizon)?;
        sources.push(Source { node, waveform: wf });
    }
    TransientSystem::new(graph, ground, cap, bias, sources, spec.horizon)
}
