//! Per-epoch term co-occurrence graphs and the term-vector matrices fed to
//! the map trainer.
//!
//! Co-occurrence is counted at the record level with set semantics: entry
//! (i, j) is the number of records containing both terms, so weights read as
//! record counts. The diagonal holds each term's own record count and is
//! excluded from edge semantics.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Read, Write};

use rayon::prelude::*;

use crate::catalog::{EpochCorpus, IndexLevel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceGraph {
    /// Row/column index, sorted lexicographically.
    terms: Vec<String>,
    /// n x n symmetric counts, row-major.
    weights: Vec<f64>,
}

impl CooccurrenceGraph {
    /// Validates symmetry and non-negativity. Terms are re-sorted
    /// lexicographically (with the matrix permuted to match) so the index is
    /// deterministic regardless of input order.
    pub fn new(terms: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        let n = terms.len();
        if weights.len() != n * n {
            return Err(Error::Input(format!(
                "weight matrix has {} entries, expected {}x{}",
                weights.len(),
                n,
                n
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if weights[i * n + j] != weights[j * n + i] {
                    return Err(Error::Input(format!(
                        "weights must be symmetric; ({i}, {j}) differs"
                    )));
                }
            }
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Input("weights must be finite and non-negative".into()));
        }
        let (terms, weights) = if terms.windows(2).all(|w| w[0] < w[1]) {
            (terms, weights)
        } else {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| terms[a].cmp(&terms[b]));
            let sorted: Vec<String> = order.iter().map(|&i| terms[i].clone()).collect();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Input("duplicate term in graph".into()));
            }
            let mut permuted = vec![0.0; n * n];
            for (new_i, &old_i) in order.iter().enumerate() {
                for (new_j, &old_j) in order.iter().enumerate() {
                    permuted[new_i * n + new_j] = weights[old_i * n + old_j];
                }
            }
            (sorted, permuted)
        };
        Ok(CooccurrenceGraph { terms, weights })
    }

    pub fn n(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n() + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.terms.binary_search_by(|t| t.as_str().cmp(term)).ok()
    }

    /// Number of records containing term `i` (the self-count diagonal).
    pub fn record_count(&self, i: usize) -> f64 {
        self.weights[i * self.n() + i]
    }
}

/// Counts co-occurrences of `vocabulary` terms in one epoch at one level.
/// Terms absent from the epoch get zero rows. Counting is parallel over
/// records; integer entrywise merges make the result order-independent.
pub fn build_graph(
    epoch: &EpochCorpus,
    level: IndexLevel,
    vocabulary: &BTreeSet<String>,
) -> CooccurrenceGraph {
    let terms: Vec<String> = vocabulary.iter().cloned().collect();
    let n = terms.len();
    let index: HashMap<&str, usize> = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();

    let counts: Vec<u64> = epoch
        .records
        .par_iter()
        .fold(
            || vec![0u64; n * n],
            |mut acc, record| {
                // BTreeSet iteration is sorted, so indices come out ascending.
                let present: Vec<usize> = level
                    .terms_of(record)
                    .iter()
                    .filter_map(|t| index.get(t.as_str()).copied())
                    .collect();
                for (a, &i) in present.iter().enumerate() {
                    acc[i * n + i] += 1;
                    for &j in &present[a + 1..] {
                        acc[i * n + j] += 1;
                        acc[j * n + i] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; n * n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    CooccurrenceGraph {
        terms,
        weights: counts.into_iter().map(|c| c as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermMatrix {
    terms: Vec<String>,
    /// m x n row-major; row i is term i's feature vector.
    rows: Vec<f64>,
    dim: usize,
    /// Rows that were all-zero before (and after) normalization.
    zero_rows: Vec<usize>,
}

impl TermMatrix {
    pub fn new(terms: Vec<String>, rows: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || rows.len() != terms.len() * dim {
            return Err(Error::Input(format!(
                "matrix shape mismatch: {} values for {} terms x {} dims",
                rows.len(),
                terms.len(),
                dim
            )));
        }
        let zero_rows = (0..terms.len())
            .filter(|&i| rows[i * dim..(i + 1) * dim].iter().all(|v| *v == 0.0))
            .collect();
        Ok(TermMatrix {
            terms,
            rows,
            dim,
            zero_rows,
        })
    }

    pub fn m(&self) -> usize {
        self.terms.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn zero_rows(&self) -> &[usize] {
        &self.zero_rows
    }
}

/// Term vectors: co-occurrence rows with the diagonal zeroed, optionally
/// L2-normalized. All-zero rows are kept as zero and flagged.
pub fn term_matrix(graph: &CooccurrenceGraph, l2_normalize: bool) -> TermMatrix {
    let n = graph.n();
    let mut rows = vec![0.0; n * n];
    let mut zero_rows = Vec::new();
    for i in 0..n {
        let mut norm_sq = 0.0;
        for j in 0..n {
            if j != i {
                let w = graph.weight(i, j);
                rows[i * n + j] = w;
                norm_sq += w * w;
            }
        }
        if norm_sq == 0.0 {
            zero_rows.push(i);
        } else if l2_normalize {
            let inv = 1.0 / norm_sq.sqrt();
            for j in 0..n {
                rows[i * n + j] *= inv;
            }
        }
    }
    TermMatrix {
        terms: graph.terms.clone(),
        rows,
        dim: n,
        zero_rows,
    }
}

/// Writes the sparse triplet text form: a term-index header, then the strict
/// upper triangle of nonzero edges, then nonzero self-counts.
pub fn write_graph(graph: &CooccurrenceGraph, mut w: impl Write) -> Result<()> {
    let io_err = |e| Error::io("<graph stream>", e);
    let n = graph.n();
    writeln!(w, "cooccur-graph v1").map_err(io_err)?;
    writeln!(w, "terms\t{n}").map_err(io_err)?;
    for (i, term) in graph.terms.iter().enumerate() {
        writeln!(w, "{i}\t{term}").map_err(io_err)?;
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let weight = graph.weight(i, j);
            if weight != 0.0 {
                edges.push((i, j, weight));
            }
        }
    }
    writeln!(w, "edges\t{}", edges.len()).map_err(io_err)?;
    for (i, j, weight) in edges {
        writeln!(w, "{i}\t{j}\t{weight}").map_err(io_err)?;
    }
    writeln!(w, "diag").map_err(io_err)?;
    for i in 0..n {
        let c = graph.record_count(i);
        if c != 0.0 {
            writeln!(w, "{i}\t{c}").map_err(io_err)?;
        }
    }
    Ok(())
}

pub fn read_graph(r: impl BufRead) -> Result<CooccurrenceGraph> {
    let bad = |msg: &str| Error::Format(format!("co-occurrence graph: {msg}"));
    let mut lines = r.lines();
    let mut next_line = || -> Result<Option<String>> {
        match lines.next() {
            Some(Ok(l)) => Ok(Some(l)),
            Some(Err(e)) => Err(Error::io("<graph stream>", e)),
            None => Ok(None),
        }
    };
    let header = next_line()?.ok_or_else(|| bad("empty input"))?;
    if header.trim() != "cooccur-graph v1" {
        return Err(bad("unrecognized header"));
    }
    let terms_line = next_line()?.ok_or_else(|| bad("missing terms header"))?;
    let n: usize = terms_line
        .strip_prefix("terms\t")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| bad("malformed terms header"))?;
    let mut terms = Vec::with_capacity(n);
    for i in 0..n {
        let line = next_line()?.ok_or_else(|| bad("truncated term list"))?;
        let (idx, term) = line.split_once('\t').ok_or_else(|| bad("malformed term line"))?;
        if idx.parse::<usize>().ok() != Some(i) {
            return Err(bad("term indices must be dense and ordered"));
        }
        terms.push(term.to_string());
    }
    let edges_line = next_line()?.ok_or_else(|| bad("missing edges header"))?;
    let m: usize = edges_line
        .strip_prefix("edges\t")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| bad("malformed edges header"))?;
    let mut weights = vec![0.0; n * n];
    for _ in 0..m {
        let line = next_line()?.ok_or_else(|| bad("truncated edge list"))?;
        let mut parts = line.split('\t');
        let i: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad edge"))?;
        let j: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad edge"))?;
        let w: f64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad edge"))?;
        if i >= n || j >= n {
            return Err(bad("edge index out of range"));
        }
        weights[i * n + j] = w;
        weights[j * n + i] = w;
    }
    match next_line()? {
        Some(line) if line.trim() == "diag" => {}
        _ => return Err(bad("missing diag header")),
    }
    while let Some(line) = next_line()? {
        if line.trim().is_empty() {
            continue;
        }
        let (i, c) = line.split_once('\t').ok_or_else(|| bad("bad diag line"))?;
        let i: usize = i.parse().map_err(|_| bad("bad diag index"))?;
        let c: f64 = c.parse().map_err(|_| bad("bad diag count"))?;
        if i >= n {
            return Err(bad("diag index out of range"));
        }
        weights[i * n + i] = c;
    }
    CooccurrenceGraph::new(terms, weights)
}

const MATRIX_MAGIC: &[u8; 4] = b"DFTM";

/// Dense binary form: magic, version, shape, term table, zero-row flags,
/// row-major f64 little-endian payload.
pub fn write_matrix(matrix: &TermMatrix, mut w: impl Write) -> Result<()> {
    let io_err = |e| Error::io("<matrix stream>", e);
    w.write_all(MATRIX_MAGIC).map_err(io_err)?;
    w.write_all(&1u32.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(matrix.m() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(matrix.dim() as u32).to_le_bytes()).map_err(io_err)?;
    for term in &matrix.terms {
        let bytes = term.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(bytes).map_err(io_err)?;
    }
    w.write_all(&(matrix.zero_rows.len() as u32).to_le_bytes()).map_err(io_err)?;
    for &i in &matrix.zero_rows {
        w.write_all(&(i as u32).to_le_bytes()).map_err(io_err)?;
    }
    for v in &matrix.rows {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

pub fn read_matrix(mut r: impl Read) -> Result<TermMatrix> {
    let io_err = |e| Error::io("<matrix stream>", e);
    let bad = |msg: &str| Error::Format(format!("term matrix: {msg}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MATRIX_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |r: &mut dyn Read| -> Result<u32> {
        r.read_exact(&mut u32buf).map_err(io_err)?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let version = read_u32(&mut r)?;
    if version != 1 {
        return Err(bad("unsupported version"));
    }
    let m = read_u32(&mut r)? as usize;
    let dim = read_u32(&mut r)? as usize;
    let mut terms = Vec::with_capacity(m);
    for _ in 0..m {
        let len = read_u32(&mut r)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf).map_err(io_err)?;
        terms.push(String::from_utf8(buf).map_err(|_| bad("term is not utf-8"))?);
    }
    let n_zero = read_u32(&mut r)? as usize;
    let mut zero_rows = Vec::with_capacity(n_zero);
    for _ in 0..n_zero {
        zero_rows.push(read_u32(&mut r)? as usize);
    }
    let mut rows = vec![0.0; m * dim];
    let mut f64buf = [0u8; 8];
    for v in rows.iter_mut() {
        r.read_exact(&mut f64buf).map_err(io_err)?;
        *v = f64::from_le_bytes(f64buf);
    }
    Ok(TermMatrix {
        terms,
        rows,
        dim,
        zero_rows,
    })
}
