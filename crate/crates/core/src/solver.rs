//! Preconditioned conjugate gradient and the spectral estimators used to
//! judge a sparsifier as a preconditioner.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cholesky::CholeskyFactor;
use crate::dense::{self, DEFAULT_ORACLE_LIMIT};
use crate::error::{Error, Result};
use crate::graph::{RegularizedLaplacian, SparseSymMatrix};

pub const DEFAULT_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_CONDITION_ITERS: usize = 50;
pub const DEFAULT_TRACE_PROBES: usize = 32;

/// Approximate inverse action `z = M⁻¹ r`.
pub trait Preconditioner: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, r: &[f64], z: &mut [f64], work: &mut Vec<f64>);
}

impl Preconditioner for CholeskyFactor {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, r: &[f64], z: &mut [f64], work: &mut Vec<f64>) {
        z.copy_from_slice(r);
        self.solve_in_place(z, work);
    }
}

/// No preconditioning.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl Preconditioner for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, r: &[f64], z: &mut [f64], _work: &mut Vec<f64>) {
        z.copy_from_slice(r);
    }
}

#[derive(Clone, Copy)]
pub struct SolveContext<'a> {
    pub a: &'a SparseSymMatrix,
    pub precond: &'a dyn Preconditioner,
    pub tol: f64,
    pub max_iter: usize,
}

impl<'a> SolveContext<'a> {
    pub fn new(lg: &'a RegularizedLaplacian, precond: &'a dyn Preconditioner, tol: f64) -> Result<Self> {
        Self::for_matrix(lg.matrix(), precond, tol)
    }

    pub fn for_matrix(a: &'a SparseSymMatrix, precond: &'a dyn Preconditioner, tol: f64) -> Result<Self> {
        dense::check_same_dim(a.n(), precond.dim())?;
        if !(tol > 0.0) {
            return Err(Error::Config(format!("tolerance {tol} must be positive")));
        }
        Ok(SolveContext {
            a,
            precond,
            tol,
            max_iter: a.n().max(100) * 2,
        })
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Recurrence residual `‖r_k‖ / ‖b‖` at exit.
    pub residual: f64,
    pub converged: bool,
    pub time_s: f64,
}

pub fn pcg_solve(ctx: &SolveContext, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
    pcg_solve_observed(ctx, b, None, |_, _| {})
}

/// PCG from `x0` (zero when `None`), calling `observe(k, x_k)` after every
/// iteration.
pub fn pcg_solve_observed(
    ctx: &SolveContext,
    b: &[f64],
    x0: Option<&[f64]>,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = ctx.a.n();
    dense::check_same_dim(n, b.len())?;
    let mut x = match x0 {
        Some(x0) => {
            dense::check_same_dim(n, x0.len())?;
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let bnorm = norm(b);
    let report = |iterations, residual: f64, converged| SolveReport {
        iterations,
        residual,
        converged,
        time_s: start.elapsed().as_secs_f64(),
    };
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok((x, report(0, 0.0, true)));
    }

    let mut r = b.to_vec();
    if x0.is_some() {
        let ax = ctx.a.mul_vec(&x);
        r.iter_mut().zip(&ax).for_each(|(ri, ai)| *ri -= ai);
    }
    let mut rel = norm(&r) / bnorm;
    if rel <= ctx.tol {
        return Ok((x, report(0, rel, true)));
    }
    let mut work = Vec::new();
    let mut z = vec![0.0; n];
    ctx.precond.apply(&r, &mut z, &mut work);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for k in 1..=ctx.max_iter {
        ctx.a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Singular(format!("PCG breakdown at iteration {k}: pᵀAp = {pap}")));
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= alpha * ai);
        observe(k, &x);
        rel = norm(&r) / bnorm;
        if rel <= ctx.tol {
            return Ok((x, report(k, rel, true)));
        }
        ctx.precond.apply(&r, &mut z, &mut work);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    log::warn!("PCG did not converge in {} iterations (residual {rel:.3e})", ctx.max_iter);
    Ok((x, report(ctx.max_iter, rel, false)))
}

/// Power iteration on `L_P⁻¹ L_G`, returning the final Rayleigh quotient
/// `xᵀL_G L_P⁻¹ L_G x / xᵀL_G x`. With a shared regularization the
/// smallest generalized eigenvalue is 1, so this estimates `κ(L_G, L_P)`.
pub fn estimate_condition(lg: &RegularizedLaplacian, lp: &dyn Preconditioner, iters: usize, seed: u64) -> Result<f64> {
    let n = lg.n();
    dense::check_same_dim(n, lp.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut x);
    let (mut y, mut z, mut work) = (vec![0.0; n], vec![0.0; n], Vec::new());
    let mut lambda = 0.0;
    for _ in 0..iters.max(1) {
        lg.matrix().mul_vec_into(&x, &mut y);
        lp.apply(&y, &mut z, &mut work);
        lambda = dot(&y, &z) / dot(&y, &x);
        std::mem::swap(&mut x, &mut z);
        normalize(&mut x);
    }
    Ok(lambda)
}

/// Hutchinson estimate of `Trace(L_P⁻¹ L_G)` from Rademacher probes.
pub fn estimate_trace(lg: &RegularizedLaplacian, lp: &dyn Preconditioner, probes: usize, seed: u64) -> Result<f64> {
    let n = lg.n();
    dense::check_same_dim(n, lp.dim())?;
    if probes == 0 {
        return Err(Error::Config("trace estimation needs at least one probe".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vs: Vec<Vec<f64>> = (0..probes)
        .map(|_| (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect())
        .collect();
    let samples: Vec<f64> = vs
        .par_iter()
        .map(|v| {
            let y = lg.mul_vec(v);
            let mut z = vec![0.0; n];
            lp.apply(&y, &mut z, &mut Vec::new());
            dot(v, &z)
        })
        .collect();
    Ok(samples.iter().sum::<f64>() / probes as f64)
}

/// Extremal generalized eigenvalues `(λ_min, λ_max)` of `L_S⁻¹ L_G` by a
/// dense symmetric eigensolve.
pub fn dense_generalized_eigs(lg: &RegularizedLaplacian, ls: &RegularizedLaplacian) -> Result<(f64, f64)> {
    dense::check_same_dim(lg.n(), ls.n())?;
    dense::check_size(lg.n(), DEFAULT_ORACLE_LIMIT)?;
    dense::generalized_extremes(lg.matrix(), ls.matrix())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn normalize(a: &mut [f64]) {
    let s = norm(a);
    if s > 0.0 {
        a.iter_mut().for_each(|x| *x /= s);
    }
}
