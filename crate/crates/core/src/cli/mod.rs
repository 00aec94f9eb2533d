//! Command-line front end: argument definitions, dispatch, exit codes and
//! run manifests.

mod commands;
mod io;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GammaPolicy;
use crate::sparsify::SparsifyConfig;

pub const SCHEMA: u32 = 1;

#[derive(Parser, Debug, Clone, Serialize, Deserialize)]
#[command(name = "sparsetrace", version, about = "Spectral sparsification by approximate trace reduction")]
pub struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Log filter, e.g. `info` or `sparsetrace=debug`.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    /// Where to write the run manifest [default: <command>.manifest.json].
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Treat solver non-convergence as a failure (exit code 1).
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
pub enum Command {
    /// Build a sparsifier and write it as Matrix Market.
    Sparsify(SparsifyCmd),
    /// Solve L_G x = b by PCG.
    Solve(SolveCmd),
    /// Trace and condition-number estimates of a preconditioner.
    Stats(StatsCmd),
    /// Backward-Euler transient simulation of an RC network.
    Transient(TransientCmd),
    /// Spectral bipartition from inverse power iteration.
    Fiedler(FiedlerCmd),
    /// Tree versus sparsifier preconditioner comparison.
    Bench(BenchCmd),
    /// Rerun the command recorded in a manifest.
    Replay(ReplayCmd),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sparsify(_) => "sparsify",
            Command::Solve(_) => "solve",
            Command::Stats(_) => "stats",
            Command::Transient(_) => "transient",
            Command::Fiedler(_) => "fiedler",
            Command::Bench(_) => "bench",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SparsifyOpts {
    /// Recover ⌈alpha_frac·n⌉ off-tree edges.
    #[arg(long, default_value_t = 0.10)]
    pub alpha_frac: f64,
    /// Number of recovery rounds.
    #[arg(long, default_value_t = 5)]
    pub iters: usize,
    /// BFS depth of the truncated scores.
    #[arg(long, default_value_t = 5)]
    pub beta: usize,
    /// Pruning threshold of the approximate inverse.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// BFS depth of the similarity marking.
    #[arg(long, default_value_t = 2)]
    pub beta_sim: usize,
    /// Diagonal regularization: `rel:<factor>` of the largest degree or `abs:<value>`.
    #[arg(long, default_value = "rel:1e-6", value_parser = parse_gamma)]
    pub gamma: GammaPolicy,
    /// Probes of the trace estimator.
    #[arg(long, default_value_t = crate::solver::DEFAULT_TRACE_PROBES)]
    pub probes: usize,
}

impl SparsifyOpts {
    pub fn config(&self, seed: u64) -> SparsifyConfig {
        SparsifyConfig {
            alpha_frac: self.alpha_frac,
            rounds: self.iters,
            beta: self.beta,
            delta: self.delta,
            beta_sim: self.beta_sim,
            gamma: self.gamma,
            seed,
            trace_probes: self.probes,
            ..Default::default()
        }
    }
}

fn parse_gamma(s: &str) -> std::result::Result<GammaPolicy, String> {
    let (kind, val) = s.split_once(':').unwrap_or(("rel", s));
    let x: f64 = val.parse().map_err(|_| format!("bad number `{val}`"))?;
    if !(x > 0.0) {
        return Err("gamma must be positive".into());
    }
    match kind {
        "rel" => Ok(GammaPolicy::Relative(x)),
        "abs" => Ok(GammaPolicy::Absolute(x)),
        _ => Err(format!("expected rel:<x> or abs:<x>, got `{s}`")),
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SparsifyCmd {
    /// Input graph: Matrix Market file, `grid:<r>x<c>` or `rgg:<n>:<radius>:<seed>`.
    #[arg(long = "in", alias = "graph")]
    pub input: String,
    /// Sparsifier output (Matrix Market).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Statistics output (JSON).
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Vertex remapping table output (CSV), for file inputs.
    #[arg(long)]
    pub remap: Option<PathBuf>,
    /// Directory for debug dumps: per-round scores, final factor and approximate inverse.
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
    #[command(flatten)]
    pub opts: SparsifyOpts,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecondKind {
    Tree,
    Sparsifier,
    Exact,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SolveCmd {
    #[arg(long)]
    pub graph: String,
    #[arg(long, value_enum, default_value_t = PrecondKind::Sparsifier)]
    pub precond: PrecondKind,
    /// Use this graph as the sparsifier instead of building one.
    #[arg(long)]
    pub precond_graph: Option<PathBuf>,
    /// `random:<seed>` or a file of whitespace-separated values.
    #[arg(long, default_value = "random:0")]
    pub rhs: String,
    #[arg(long, default_value_t = crate::solver::DEFAULT_TOLERANCE)]
    pub tol: f64,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Report output (JSON); printed to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Solution vector output, one value per line.
    #[arg(long)]
    pub solution: Option<PathBuf>,
    #[command(flatten)]
    pub opts: SparsifyOpts,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct StatsCmd {
    #[arg(long)]
    pub graph: String,
    #[arg(long)]
    pub precond_graph: Option<PathBuf>,
    /// Power iterations of the condition estimate.
    #[arg(long, default_value_t = crate::solver::DEFAULT_CONDITION_ITERS)]
    pub kappa_iters: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub opts: SparsifyOpts,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    Direct,
    Pcg,
    Both,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TransientCmd {
    /// Conductance network: file, inline generator, or `pg:<r>x<c>:<seed>` for a synthetic power grid.
    #[arg(long)]
    pub graph: String,
    /// Node capacitances, CSV `node,value`.
    #[arg(long)]
    pub cap: Option<PathBuf>,
    /// Piecewise-linear current sources, JSON `[{"node": i, "points": [[t, v], ...]}]`.
    #[arg(long)]
    pub sources: Option<PathBuf>,
    #[arg(long, default_value_t = 5e-9)]
    pub horizon: f64,
    /// Largest step of the breakpoint-driven policy.
    #[arg(long, default_value_t = 200e-12)]
    pub hmax: f64,
    /// Use a fixed step instead of the breakpoint-driven policy.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, value_enum, default_value_t = EngineKind::Direct)]
    pub engine: EngineKind,
    /// PCG relative tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Evaluate sources at the start of each step instead of its end.
    #[arg(long)]
    pub source_at_start: bool,
    /// Nodes to record, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub probe: Vec<usize>,
    /// Waveform output, CSV `time,node,voltage`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub opts: SparsifyOpts,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FiedlerCmd {
    #[arg(long)]
    pub graph: String,
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = EngineKind::Both)]
    pub engine: EngineKind,
    #[arg(long, default_value_t = crate::solver::DEFAULT_TOLERANCE)]
    pub tol: f64,
    /// Partition output, CSV `node,label` (one label column per engine).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub opts: SparsifyOpts,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct BenchCmd {
    #[arg(long)]
    pub graph: String,
    #[arg(long, default_value_t = crate::solver::DEFAULT_TOLERANCE)]
    pub tol: f64,
    #[arg(long, default_value_t = crate::solver::DEFAULT_CONDITION_ITERS)]
    pub kappa_iters: usize,
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub opts: SparsifyOpts,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ReplayCmd {
    pub manifest: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub tool: String,
    pub version: String,
    pub argv: Vec<String>,
    pub config: Cli,
    pub outputs: Vec<PathBuf>,
    pub exit_code: i32,
    pub total_time_s: f64,
}

/// Failure classes mapped to exit codes.
pub(crate) enum Failure {
    Usage(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Compute(e.to_string()),
        }
    }
}

pub(crate) type CmdResult<T = ()> = std::result::Result<T, Failure>;

/// What a command produced.
#[derive(Default)]
pub(crate) struct Outcome {
    pub outputs: Vec<PathBuf>,
    /// Set when a solve did not converge.
    pub unconverged: bool,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code: 0 success, 1 compute failure, 2 usage error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .try_init();
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    execute(cli, argv)
}

fn execute(cli: Cli, argv: Vec<String>) -> i32 {
    if let Command::Replay(r) = &cli.command {
        return match read_manifest(&r.manifest) {
            Ok(m) => run(m.argv),
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        };
    }
    let start = Instant::now();
    let result = commands::dispatch(&cli);
    let (code, outcome) = match result {
        Ok(o) if o.unconverged && cli.strict => {
            eprintln!("error: solver did not converge (--strict)");
            (1, o)
        }
        Ok(o) => (0, o),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            (2, Outcome::default())
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            (1, Outcome::default())
        }
    };
    let path = cli
        .manifest
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.manifest.json", cli.command.name())));
    let manifest = Manifest {
        schema: SCHEMA,
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        argv,
        config: cli,
        outputs: outcome.outputs,
        exit_code: code,
        total_time_s: start.elapsed().as_secs_f64(),
    };
    if let Err(e) = io::write_json(&path, &manifest) {
        eprintln!("error: could not write manifest: {e}");
        return code.max(1);
    }
    code
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })
}
