//! Matrix Market coordinate files <-> [`Graph`].
//!
//! Ingestion accepts real, integer or pattern fields with general or
//! symmetric storage. If any off-diagonal entry is negative the file is read
//! as a Laplacian/SDD matrix (weight = -a_ij); otherwise as an adjacency
//! matrix (weight = a_ij). Only the largest connected component is kept.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Laplacian,
    Adjacency,
}

#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    /// `remap[internal] = original` (0-based original row index).
    pub remap: Vec<usize>,
    pub original_n: usize,
    pub kind: MatrixKind,
    /// For Laplacian-style input, `a_ii - Σ_j |a_ij|` per internal vertex.
    pub diag_excess: Option<Vec<f64>>,
}

impl LoadedGraph {
    pub fn dropped(&self) -> usize {
        self.original_n - self.graph.n()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
}

pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<LoadedGraph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix_market(BufReader::new(file), path)
}

/// Parses from any reader; `label` is used in error messages.
pub fn read_matrix_market<R: BufRead>(reader: R, label: impl Into<PathBuf>) -> Result<LoadedGraph> {
    let label = label.into();
    let err = |line: usize, msg: String| Error::Parse {
        path: label.clone(),
        line,
        msg,
    };

    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hline, header) = match lines.next() {
        Some((n, Ok(l))) => (n, l),
        Some((n, Err(e))) => return Err(err(n, e.to_string())),
        None => return Err(err(1, "empty file".into())),
    };
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(hline, format!("malformed header `{header}`")));
    }
    if tokens[2] != "coordinate" {
        return Err(err(hline, format!("unsupported format `{}`", tokens[2])));
    }
    let pattern = match tokens[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" => true,
        other => return Err(err(hline, format!("unsupported field `{other}`"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(err(hline, format!("unsupported symmetry `{other}`"))),
    };

    let mut size: Option<(usize, usize)> = None;
    let mut offdiag: BTreeMap<(usize, usize), (f64, f64, usize)> = BTreeMap::new();
    let mut diag: Vec<f64> = Vec::new();
    for (lineno, line) in lines {
        let line = line.map_err(|e| err(lineno, e.to_string()))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        let Some((nrows, _)) = size else {
            if fields.len() != 3 {
                return Err(err(lineno, format!("malformed size line `{t}`")));
            }
            let nums: Vec<usize> = fields
                .iter()
                .map(|f| f.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(lineno, format!("bad size line: {e}")))?;
            if nums[0] != nums[1] {
                return Err(err(lineno, format!("matrix is not square ({} x {})", nums[0], nums[1])));
            }
            size = Some((nums[0], nums[2]));
            diag = vec![0.0; nums[0]];
            continue;
        };
        let want = if pattern { 2 } else { 3 };
        if fields.len() < want {
            return Err(err(lineno, format!("expected {want} fields, got `{t}`")));
        }
        let parse_idx = |f: &str| -> Result<usize> {
            let i: usize = f
                .parse()
                .map_err(|_| err(lineno, format!("bad index `{f}`")))?;
            if i == 0 || i > nrows {
                return Err(err(lineno, format!("index {i} out of range 1..={nrows}")));
            }
            Ok(i - 1)
        };
        let i = parse_idx(fields[0])?;
        let j = parse_idx(fields[1])?;
        let x: f64 = if pattern {
            1.0
        } else {
            fields[2]
                .parse()
                .map_err(|_| err(lineno, format!("bad value `{}`", fields[2])))?
        };
        if !x.is_finite() {
            return Err(err(lineno, format!("non-finite value {x}")));
        }
        if i == j {
            diag[i] += x;
            continue;
        }
        let key = (i.min(j), i.max(j));
        let slot = offdiag.entry(key).or_insert((0.0, 0.0, lineno));
        if symmetry == Symmetry::Symmetric || i > j {
            slot.0 += x;
        } else {
            slot.1 += x;
        }
    }
    let Some((n, _)) = size else {
        return Err(err(hline, "missing size line".into()));
    };

    // For general storage a mirrored pair describes one edge.
    let values: Vec<((usize, usize), f64, usize)> = offdiag
        .into_iter()
        .map(|(k, (lo, up, line))| {
            let v = match symmetry {
                Symmetry::Symmetric => lo,
                Symmetry::General if lo != 0.0 && up != 0.0 => 0.5 * (lo + up),
                Symmetry::General => lo + up,
            };
            (k, v, line)
        })
        .collect();

    let kind = if values.iter().any(|&(_, v, _)| v < 0.0) {
        MatrixKind::Laplacian
    } else {
        MatrixKind::Adjacency
    };
    let mut edges = Vec::with_capacity(values.len());
    let mut absrow = vec![0.0; n];
    for ((i, j), v, line) in values {
        let w = match kind {
            MatrixKind::Laplacian if v > 0.0 => {
                return Err(err(
                    line,
                    format!("positive off-diagonal {v} at ({}, {}) in a Laplacian-style matrix", i + 1, j + 1),
                ))
            }
            MatrixKind::Laplacian => -v,
            MatrixKind::Adjacency => v,
        };
        if w == 0.0 {
            continue;
        }
        absrow[i] += w;
        absrow[j] += w;
        edges.push(Edge::new(i, j, w));
    }
    let full = Graph::new(n, edges).map_err(|e| err(hline, e.to_string()))?;
    let (graph, remap) = full.largest_component();
    let diag_excess = (kind == MatrixKind::Laplacian)
        .then(|| remap.iter().map(|&o| diag[o] - absrow[o]).collect());
    if graph.n() < n {
        log::info!(
            "{}: kept largest component, {} vertices dropped",
            label.display(),
            n - graph.n()
        );
    }
    Ok(LoadedGraph {
        graph,
        remap,
        original_n: n,
        kind,
        diag_excess,
    })
}

/// Writes `g` as a symmetric adjacency matrix (lower triangle, 1-based).
pub fn write_graph(path: impl AsRef<Path>, g: &Graph) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "%%MatrixMarket matrix coordinate real symmetric").map_err(io)?;
    writeln!(out, "{} {} {}", g.n(), g.n(), g.m()).map_err(io)?;
    for e in g.edges() {
        writeln!(out, "{} {} {}", e.v + 1, e.u + 1, e.w).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes a lower-triangular column-compressed matrix as a general
/// coordinate file.
pub fn write_lower_csc(
    path: impl AsRef<Path>,
    n: usize,
    col_ptr: &[usize],
    row_idx: &[usize],
    values: &[f64],
) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "%%MatrixMarket matrix coordinate real general").map_err(io)?;
    writeln!(out, "{} {} {}", n, n, row_idx.len()).map_err(io)?;
    for c in 0..n {
        for k in col_ptr[c]..col_ptr[c + 1] {
            writeln!(out, "{} {} {}", row_idx[k] + 1, c + 1, values[k]).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

/// Two-column CSV `original_id,internal_id`; original ids are the 1-based
/// Matrix Market indices.
pub fn write_remap_csv(path: impl AsRef<Path>, remap: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["original_id", "internal_id"])
        .map_err(|e| csv_err(path, e))?;
    for (internal, &orig) in remap.iter().enumerate() {
        w.write_record([(orig + 1).to_string(), internal.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}
