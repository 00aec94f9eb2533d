//! Synthetic graphs: unit-weight 2D grids and random geometric graphs.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphKind {
    Grid2d { rows: usize, cols: usize },
    RandomGeometric { n: usize, radius: f64, seed: u64 },
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GraphKind::Grid2d { rows, cols } => write!(f, "grid:{rows}x{cols}"),
            GraphKind::RandomGeometric { n, radius, seed } => write!(f, "rgg:{n}:{radius}:{seed}"),
        }
    }
}

impl FromStr for GraphKind {
    type Err = Error;

    /// `grid:<rows>x<cols>` or `rgg:<n>:<radius>:<seed>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unrecognized graph spec `{s}`"));
        if let Some(rest) = s.strip_prefix("grid:") {
            let (r, c) = rest.split_once('x').ok_or_else(bad)?;
            return Ok(GraphKind::Grid2d {
                rows: r.parse().map_err(|_| bad())?,
                cols: c.parse().map_err(|_| bad())?,
            });
        }
        if let Some(rest) = s.strip_prefix("rgg:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            return Ok(GraphKind::RandomGeometric {
                n: parts[0].parse().map_err(|_| bad())?,
                radius: parts[1].parse().map_err(|_| bad())?,
                seed: parts[2].parse().map_err(|_| bad())?,
            });
        }
        Err(bad())
    }
}

pub fn generate(kind: GraphKind) -> Result<Graph> {
    match kind {
        GraphKind::Grid2d { rows, cols } => grid2d(rows, cols),
        GraphKind::RandomGeometric { n, radius, seed } => random_geometric(n, radius, seed),
    }
}

/// `rows x cols` lattice with unit weights. Vertex `(r, c)` has id
/// `r * cols + c`; edges are emitted row-major, right neighbor before down
/// neighbor.
pub fn grid2d(rows: usize, cols: usize) -> Result<Graph> {
    if rows == 0 || cols == 0 || rows * cols < 2 {
        return Err(Error::Config(format!("grid {rows}x{cols} has fewer than 2 vertices")));
    }
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push(Edge::new(id(r, c), id(r, c + 1), 1.0));
            }
            if r + 1 < rows {
                edges.push(Edge::new(id(r, c), id(r + 1, c), 1.0));
            }
        }
    }
    Graph::new(rows * cols, edges)
}

/// Random geometric graph on the unit square; see [`random_geometric_in`].
pub fn random_geometric(n: usize, radius: f64, seed: u64) -> Result<Graph> {
    random_geometric_in(n, 1.0, 1.0, radius, seed)
}

/// `n` uniform points in `[0, width] x [0, height]`, an edge of weight
/// `1 / distance` between every pair closer than `radius`. Leftover
/// components are joined by repeatedly linking each component to its
/// nearest outside point, so the result is always connected.
pub fn random_geometric_in(n: usize, width: f64, height: f64, radius: f64, seed: u64) -> Result<Graph> {
    if n < 2 || !(radius > 0.0) || !(width > 0.0) || !(height > 0.0) {
        return Err(Error::Config(format!(
            "random geometric graph needs n >= 2 and positive extents (n = {n}, radius = {radius})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random::<f64>() * width, rng.random::<f64>() * height))
        .collect();
    let dist = |a: usize, b: usize| {
        let (dx, dy) = (pts[a].0 - pts[b].0, pts[a].1 - pts[b].1);
        (dx * dx + dy * dy).sqrt().max(1e-12)
    };

    // Bucket points into radius-sized cells.
    let cw = ((width / radius).ceil() as usize).max(1);
    let ch = ((height / radius).ceil() as usize).max(1);
    let cell = |p: (f64, f64)| {
        (
            ((p.0 / radius) as usize).min(cw - 1),
            ((p.1 / radius) as usize).min(ch - 1),
        )
    };
    let mut buckets = vec![Vec::new(); cw * ch];
    for (i, &p) in pts.iter().enumerate() {
        let (cx, cy) = cell(p);
        buckets[cy * cw + cx].push(i);
    }
    let mut edges = Vec::new();
    for (i, &pt) in pts.iter().enumerate() {
        let (cx, cy) = cell(pt);
        for ny in cy.saturating_sub(1)..=(cy + 1).min(ch - 1) {
            for nx in cx.saturating_sub(1)..=(cx + 1).min(cw - 1) {
                for &j in &buckets[ny * cw + nx] {
                    if j > i {
                        let d = dist(i, j);
                        if d <= radius {
                            edges.push((i, j, d));
                        }
                    }
                }
            }
        }
    }
    edges.sort_by_key(|e| (e.0, e.1));

    let mut g = Graph::new(n, edges.iter().map(|&(i, j, d)| Edge::new(i, j, 1.0 / d)).collect())?;
    loop {
        let (count, label) = g.components();
        if count == 1 {
            break;
        }
        let mut best: Vec<Option<(f64, usize, usize)>> = vec![None; count];
        for i in 0..n {
            for j in (i + 1)..n {
                if label[i] == label[j] {
                    continue;
                }
                let d = dist(i, j);
                for c in [label[i], label[j]] {
                    if best[c].is_none_or(|(bd, _, _)| d < bd) {
                        best[c] = Some((d, i, j));
                    }
                }
            }
        }
        let mut links: Vec<(usize, usize, f64)> = best.into_iter().flatten().map(|(d, i, j)| (i, j, d)).collect();
        links.sort_by_key(|e| (e.0, e.1));
        links.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
        let mut all: Vec<Edge> = g.edges().to_vec();
        all.extend(links.into_iter().map(|(i, j, d)| Edge::new(i, j, 1.0 / d)));
        g = Graph::new(n, all)?;
    }
    Ok(g)
}
