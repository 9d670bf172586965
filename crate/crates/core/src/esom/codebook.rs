//! Codebook storage and serialization.

use std::io::{BufRead, Read, Write};

use super::{GridCoord, GridSpec, Topology};
use crate::error::{Error, Result};

/// Node weight vectors of one map, row-major over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    spec: GridSpec,
    dim: usize,
    weights: Vec<f64>,
    /// Hash of the schedule that trained this codebook; 0 when untrained.
    schedule_hash: u64,
}

impl Codebook {
    pub fn new(spec: GridSpec, dim: usize, weights: Vec<f64>, schedule_hash: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("codebook dimension must be positive".into()));
        }
        if weights.len() != spec.n_nodes() * dim {
            return Err(Error::Input(format!(
                "codebook expects {} x {} = {} weights, got {}",
                spec.n_nodes(),
                dim,
                spec.n_nodes() * dim,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Input("codebook weights must be finite".into()));
        }
        Ok(Codebook {
            spec,
            dim,
            weights,
            schedule_hash,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.spec.n_nodes()
    }

    pub fn schedule_hash(&self) -> u64 {
        self.schedule_hash
    }

    pub fn node_weight(&self, index: usize) -> &[f64] {
        &self.weights[index * self.dim..(index + 1) * self.dim]
    }

    pub fn weight_at(&self, coord: GridCoord) -> &[f64] {
        self.node_weight(self.spec.index(coord))
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(super) fn replace_weights(&self, weights: Vec<f64>, schedule_hash: u64) -> Result<Self> {
        Codebook::new(self.spec, self.dim, weights, schedule_hash)
    }
}

const CODEBOOK_MAGIC: &[u8; 4] = b"DFCB";

/// Binary form: magic, version, width, height, dim, topology, schedule hash,
/// then row-major f64 little-endian weights.
pub fn write_codebook(codebook: &Codebook, mut w: impl Write) -> Result<()> {
    let io_err = |e| Error::io("<codebook stream>", e);
    w.write_all(CODEBOOK_MAGIC).map_err(io_err)?;
    w.write_all(&1u32.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(codebook.spec.width as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(codebook.spec.height as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(codebook.dim as u32).to_le_bytes()).map_err(io_err)?;
    let topo: u8 = match codebook.spec.topology {
        Topology::Toroid => 0,
        Topology::Planar => 1,
    };
    w.write_all(&[topo]).map_err(io_err)?;
    w.write_all(&codebook.schedule_hash.to_le_bytes()).map_err(io_err)?;
    for v in &codebook.weights {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

pub fn read_codebook(mut r: impl Read) -> Result<Codebook> {
    let io_err = |e| Error::io("<codebook stream>", e);
    let bad = |msg: &str| Error::Format(format!("codebook: {msg}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != CODEBOOK_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |r: &mut dyn Read| -> Result<u32> {
        r.read_exact(&mut u32buf).map_err(io_err)?;
        Ok(u32::from_le_bytes(u32buf))
    };
    if read_u32(&mut r)? != 1 {
        return Err(bad("unsupported version"));
    }
    let width = read_u32(&mut r)? as usize;
    let height = read_u32(&mut r)? as usize;
    let dim = read_u32(&mut r)? as usize;
    let mut topo = [0u8; 1];
    r.read_exact(&mut topo).map_err(io_err)?;
    let topology = match topo[0] {
        0 => Topology::Toroid,
        1 => Topology::Planar,
        _ => return Err(bad("unknown topology tag")),
    };
    let mut hash_buf = [0u8; 8];
    r.read_exact(&mut hash_buf).map_err(io_err)?;
    let schedule_hash = u64::from_le_bytes(hash_buf);
    let spec = GridSpec::new(width, height, topology)?;
    let mut weights = vec![0.0; spec.n_nodes() * dim];
    let mut f64buf = [0u8; 8];
    for v in weights.iter_mut() {
        r.read_exact(&mut f64buf).map_err(io_err)?;
        *v = f64::from_le_bytes(f64buf);
    }
    Codebook::new(spec, dim, weights, schedule_hash)
}

/// Text export for interoperability: a header comment, then one line per
/// node (col, row, weights), whitespace-separated, row-major order.
pub fn write_codebook_text(codebook: &Codebook, mut w: impl Write) -> Result<()> {
    let io_err = |e| Error::io("<codebook stream>", e);
    let topo = match codebook.spec.topology {
        Topology::Toroid => "toroid",
        Topology::Planar => "planar",
    };
    writeln!(
        w,
        "# codebook {}x{} dim={} topology={} schedule={:016x}",
        codebook.spec.width, codebook.spec.height, codebook.dim, topo, codebook.schedule_hash
    )
    .map_err(io_err)?;
    for i in 0..codebook.n_nodes() {
        let c = codebook.spec.coord(i);
        write!(w, "{} {}", c.col, c.row).map_err(io_err)?;
        for v in codebook.node_weight(i) {
            write!(w, " {v}").map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
    }
    Ok(())
}

/// Parses the text export. Used by tests to confirm the export is lossless;
/// the binary form is the canonical interchange format.
pub fn read_codebook_text(r: impl BufRead) -> Result<Codebook> {
    let bad = |msg: &str| Error::Format(format!("codebook text: {msg}"));
    let mut lines = r.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::io("<codebook stream>", e))?
        .ok_or_else(|| bad("empty input"))?;
    let rest = header.strip_prefix("# codebook ").ok_or_else(|| bad("missing header"))?;
    let mut fields = rest.split_whitespace();
    let shape = fields.next().ok_or_else(|| bad("missing shape"))?;
    let (w, h) = shape.split_once('x').ok_or_else(|| bad("bad shape"))?;
    let width: usize = w.parse().map_err(|_| bad("bad width"))?;
    let height: usize = h.parse().map_err(|_| bad("bad height"))?;
    let mut dim = 0usize;
    let mut topology = Topology::Toroid;
    let mut schedule_hash = 0u64;
    for field in fields {
        if let Some(v) = field.strip_prefix("dim=") {
            dim = v.parse().map_err(|_| bad("bad dim"))?;
        } else if let Some(v) = field.strip_prefix("topology=") {
            topology = match v {
                "toroid" => Topology::Toroid,
                "planar" => Topology::Planar,
                _ => return Err(bad("bad topology")),
            };
        } else if let Some(v) = field.strip_prefix("schedule=") {
            schedule_hash = u64::from_str_radix(v, 16).map_err(|_| bad("bad schedule hash"))?;
        }
    }
    let spec = GridSpec::new(width, height, topology)?;
    let mut weights = vec![0.0; spec.n_nodes() * dim];
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io("<codebook stream>", e))?;
        if i >= spec.n_nodes() {
            return Err(bad("too many node lines"));
        }
        let mut parts = line.split_whitespace();
        let col: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad col"))?;
        let row: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad row"))?;
        if spec.index(GridCoord::new(col, row)) != i {
            return Err(bad("nodes must appear in row-major order"));
        }
        for d in 0..dim {
            weights[i * dim + d] = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("missing weight"))?;
        }
        if parts.next().is_some() {
            return Err(bad("trailing weight values"));
        }
    }
    Codebook::new(spec, dim, weights, schedule_hash)
}
