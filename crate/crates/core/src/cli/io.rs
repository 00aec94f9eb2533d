use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generate::{generate, GraphKind};
use crate::graph::Graph;
use crate::mtx::{load_matrix_market, MatrixKind};

pub(crate) struct InputGraph {
    pub graph: Graph,
    /// `remap[internal] = original` for file inputs.
    pub remap: Option<Vec<usize>>,
    /// Diagonal excess of an SDD input, per internal vertex.
    pub excess: Option<Vec<f64>>,
    pub dropped: usize,
}

/// Resolves an inline generator spec or a Matrix Market path.
pub(crate) fn load_graph(spec: &str) -> Result<InputGraph> {
    if spec.starts_with("grid:") || spec.starts_with("rgg:") {
        let kind: GraphKind = spec.parse()?;
        return Ok(InputGraph {
            graph: generate(kind)?,
            remap: None,
            excess: None,
            dropped: 0,
        });
    }
    let loaded = load_matrix_market(spec)?;
    let dropped = loaded.dropped();
    if dropped > 0 {
        log::warn!("{spec}: {dropped} vertices dropped outside the largest component");
    }
    let excess = match loaded.kind {
        MatrixKind::Laplacian => loaded.diag_excess,
        MatrixKind::Adjacency => None,
    };
    Ok(InputGraph {
        graph: loaded.graph,
        remap: Some(loaded.remap),
        excess,
        dropped,
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| io(e.into()))?;
    writeln!(out).map_err(io)?;
    out.flush().map_err(io)
}

/// Writes to `path`, or pretty-prints to stdout when no path is given.
pub(crate) fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    match path {
        Some(p) => write_json(p, value),
        None => {
            let s = serde_json::to_string_pretty(value).map_err(|e| Error::io("<stdout>", e.into()))?;
            println!("{s}");
            Ok(())
        }
    }
}

/// `random:<seed>` or a file of whitespace-separated values.
pub(crate) fn load_rhs(spec: &str, n: usize) -> Result<Vec<f64>> {
    if let Some(seed) = spec.strip_prefix("random:") {
        let seed: u64 = seed
            .parse()
            .map_err(|_| Error::Config(format!("bad rhs seed in `{spec}`")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return Ok((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
    }
    let text = std::fs::read_to_string(spec).map_err(|e| Error::io(spec, e))?;
    let b = read_vector(&text, spec)?;
    crate::dense::check_same_dim(n, b.len())?;
    Ok(b)
}

fn read_vector(text: &str, label: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        for tok in line.split_whitespace() {
            out.push(tok.parse().map_err(|_| Error::Parse {
                path: label.into(),
                line: i + 1,
                msg: format!("not a number: `{tok}`"),
            })?);
        }
    }
    Ok(out)
}

pub(crate) fn write_vector(path: &Path, x: &[f64]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for v in x {
        writeln!(out, "{v}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// CSV `node,value` with a header row.
pub(crate) fn read_node_values(path: &Path, n: usize) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| crate::mtx::csv_err(path, e))?;
    let mut out = vec![0.0; n];
    for (i, rec) in rdr.deserialize::<(usize, f64)>().enumerate() {
        let (node, v) = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            msg: e.to_string(),
        })?;
        if node >= n {
            return Err(Error::Config(format!("{}: node {node} out of range", path.display())));
        }
        out[node] = v;
    }
    Ok(out)
}
