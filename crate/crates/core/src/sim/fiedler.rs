//! Spectral bipartitioning from a few steps of inverse power iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cholesky::{factorize, Ordering};
use crate::dense::{self, DEFAULT_ORACLE_LIMIT};
use crate::error::{Error, Result};
use crate::graph::{GammaPolicy, Graph, RegularizedLaplacian};
use crate::solver::{normalize, pcg_solve, SolveContext};
use crate::sparsify::{sparsify, SparsifyConfig};

const START_STREAM: u64 = 0x66;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiedlerEngine {
    Direct,
    Pcg { sparsify: SparsifyConfig, tol: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiedlerResult {
    /// Unit norm, orthogonal to the constant vector.
    pub vector: Vec<f64>,
    /// 0/1 label per vertex from the median split.
    pub partition: Vec<u8>,
    pub steps: usize,
    pub pcg_iterations: usize,
}

pub fn fiedler(g: &Graph, steps: usize, engine: &FiedlerEngine, seed: u64) -> Result<FiedlerResult> {
    if !g.is_connected() {
        return Err(Error::Disconnected {
            components: g.components().0,
        });
    }
    let n = g.n();
    if n < 2 {
        return Err(Error::InvalidGraph("a bipartition needs at least two vertices".into()));
    }
    let gamma = GammaPolicy::default().resolve(g)?;
    let lg = RegularizedLaplacian::with_gamma(g, gamma);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // keep the start independent of generators seeded with the same value
    rng.set_stream(START_STREAM);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    deflate(&mut x);
    normalize(&mut x);
    let mut pcg_iterations = 0;

    match engine {
        FiedlerEngine::Direct => {
            let f = factorize(&lg, Ordering::MinimumDegree)?;
            let mut work = Vec::new();
            for _ in 0..steps {
                f.solve_in_place(&mut x, &mut work);
                deflate(&mut x);
                normalize(&mut x);
            }
        }
        FiedlerEngine::Pcg { sparsify: cfg, tol } => {
            let precond = if g.m() + 1 > n {
                factorize(&sparsify(g, cfg)?.laplacian(g), Ordering::MinimumDegree)?
            } else {
                factorize(&lg, Ordering::MinimumDegree)?
            };
            let ctx = SolveContext::new(&lg, &precond, *tol)?;
            for _ in 0..steps {
                let (y, rep) = pcg_solve(&ctx, &x)?;
                pcg_iterations += rep.iterations;
                x = y;
                deflate(&mut x);
                normalize(&mut x);
            }
        }
    }
    let partition = median_partition(&x);
    Ok(FiedlerResult {
        vector: x,
        partition,
        steps,
        pcg_iterations,
    })
}

/// Eigenvector of the second smallest eigenvalue of the plain Laplacian,
/// by a dense symmetric eigensolve.
pub fn dense_fiedler(g: &Graph) -> Result<FiedlerResult> {
    let n = g.n();
    dense::check_size(n, DEFAULT_ORACLE_LIMIT)?;
    if n < 2 {
        return Err(Error::InvalidGraph("a bipartition needs at least two vertices".into()));
    }
    let l = RegularizedLaplacian::with_gamma(g, 0.0).matrix().to_dense();
    let eig = l.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut x: Vec<f64> = eig.eigenvectors.column(order[1]).iter().copied().collect();
    deflate(&mut x);
    normalize(&mut x);
    let partition = median_partition(&x);
    Ok(FiedlerResult {
        vector: x,
        partition,
        steps: 0,
        pcg_iterations: 0,
    })
}

fn deflate(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

/// Label 1 for entries at or above the upper median, 0 otherwise.
pub fn median_partition(x: &[f64]) -> Vec<u8> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = sorted[x.len() / 2];
    x.iter().map(|&v| u8::from(v >= med)).collect()
}

/// Fraction of vertices assigned differently, minimized over the label swap.
pub fn partition_relerr(a: &[u8], b: &[u8]) -> Result<f64> {
    dense::check_same_dim(a.len(), b.len())?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let diff = a.iter().zip(b).filter(|(x, y)| x != y).count();
    Ok(diff.min(a.len() - diff) as f64 / a.len() as f64)
}
