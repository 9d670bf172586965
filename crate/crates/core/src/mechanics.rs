//! Inverse-square mechanics over the term maps: PageRank scores act as
//! masses, BMU distances as separations. Pairwise force/potential matrices
//! plus sampled potential surfaces and their negative-gradient force fields
//! on the grid.

use rayon::prelude::*;

use crate::driftlog::TermDistanceMatrix;
use crate::error::{Error, Result};
use crate::esom::{BmuMap, GridSpec, Topology};
use crate::termgraph::PageRankScores;

/// Term masses for one epoch. Built from PageRank scores (positive, sum 1)
/// or directly from hand-picked values for experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct MassTable {
    pub terms: Vec<String>,
    pub masses: Vec<f64>,
}

impl MassTable {
    pub fn new(terms: Vec<String>, masses: Vec<f64>) -> Result<Self> {
        if terms.len() != masses.len() {
            return Err(Error::Input(format!(
                "{} terms but {} masses",
                terms.len(),
                masses.len()
            )));
        }
        if terms.is_empty() {
            return Err(Error::Input("mass table needs at least one term".into()));
        }
        if masses.iter().any(|m| !m.is_finite() || *m <= 0.0) {
            return Err(Error::Input("masses must be finite and positive".into()));
        }
        Ok(MassTable { terms, masses })
    }

    pub fn from_pagerank(scores: &PageRankScores) -> Result<Self> {
        MassTable::new(scores.terms.clone(), scores.scores.clone())
    }
}

/// F(i,j) = m_i * m_j / (r_ij + epsilon)^2, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceMatrix {
    pub terms: Vec<String>,
    pub values: Vec<f64>,
    pub epsilon: f64,
}

/// U(i,j) = -m_i * m_j / (r_ij + epsilon), zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialMatrix {
    pub terms: Vec<String>,
    pub values: Vec<f64>,
    pub epsilon: f64,
}

impl ForceMatrix {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.terms.len() + j]
    }
}

impl PotentialMatrix {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.terms.len() + j]
    }
}

/// Softened attraction between two masses at separation `r`.
pub fn softened_force(m1: f64, m2: f64, r: f64, epsilon: f64) -> f64 {
    let d = r + epsilon;
    m1 * m2 / (d * d)
}

/// Softened potential whose negative radial derivative is [`softened_force`].
pub fn softened_potential(m1: f64, m2: f64, r: f64, epsilon: f64) -> f64 {
    -(m1 * m2) / (r + epsilon)
}

/// Softening offset scaled to the data: 1e-3 times the mean off-diagonal
/// distance. Falls back to a flat 1e-3 when every distance is zero.
pub fn default_epsilon(distances: &TermDistanceMatrix) -> f64 {
    let n = distances.terms.len();
    if n < 2 {
        return 1e-3;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += distances.value(i, j);
            }
        }
    }
    let mean = sum / (n * (n - 1)) as f64;
    if mean > 0.0 {
        1e-3 * mean
    } else {
        1e-3
    }
}

fn check_pair_inputs(
    masses: &MassTable,
    distances: &TermDistanceMatrix,
    epsilon: f64,
) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Input(format!("epsilon must be positive, got {epsilon}")));
    }
    if masses.terms != distances.terms {
        return Err(Error::Input(
            "mass table and distance matrix cover different terms".into(),
        ));
    }
    Ok(())
}

pub fn pairwise_force(
    masses: &MassTable,
    distances: &TermDistanceMatrix,
    epsilon: f64,
) -> Result<ForceMatrix> {
    check_pair_inputs(masses, distances, epsilon)?;
    let n = masses.terms.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let f = softened_force(masses.masses[i], masses.masses[j], distances.value(i, j), epsilon);
            values[i * n + j] = f;
            values[j * n + i] = f;
        }
    }
    Ok(ForceMatrix { terms: masses.terms.clone(), values, epsilon })
}

pub fn pairwise_potential(
    masses: &MassTable,
    distances: &TermDistanceMatrix,
    epsilon: f64,
) -> Result<PotentialMatrix> {
    check_pair_inputs(masses, distances, epsilon)?;
    let n = masses.terms.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let u =
                softened_potential(masses.masses[i], masses.masses[j], distances.value(i, j), epsilon);
            values[i * n + j] = u;
            values[j * n + i] = u;
        }
    }
    Ok(PotentialMatrix { terms: masses.terms.clone(), values, epsilon })
}

/// Potential sampled by a unit probe mass at every grid node. Masses sit at
/// their BMU nodes; separations are toroidal grid distances normalized by
/// the grid diagonal so surfaces compare across grid sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSurface {
    pub spec: GridSpec,
    /// Row-major width x height values, finite everywhere.
    pub values: Vec<f64>,
    pub epoch_index: usize,
    pub epsilon: f64,
}

pub fn potential_surface(
    bmus: &BmuMap,
    masses: &MassTable,
    spec: &GridSpec,
    epsilon: f64,
    epoch_index: usize,
) -> Result<PotentialSurface> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Input(format!("epsilon must be positive, got {epsilon}")));
    }
    if masses.terms != bmus.terms {
        return Err(Error::Input("mass table and BMU map cover different terms".into()));
    }
    for coord in &bmus.coords {
        if !spec.contains(*coord) {
            return Err(Error::Input(format!(
                "BMU {coord} lies outside the {}x{} grid",
                spec.width, spec.height
            )));
        }
    }
    let diagonal = spec.diagonal();
    let values: Vec<f64> = (0..spec.n_nodes())
        .into_par_iter()
        .map(|node| {
            let p = spec.coord(node);
            let mut u = 0.0;
            for (coord, mass) in bmus.coords.iter().zip(&masses.masses) {
                let d = spec.distance(p, *coord) / diagonal;
                u -= mass / (d + epsilon);
            }
            u
        })
        .collect();
    Ok(PotentialSurface { spec: *spec, values, epoch_index, epsilon })
}

/// Negative finite-difference gradient of a potential surface, in grid
/// units: central differences, wrapping on toroids, one-sided at planar
/// edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceField {
    pub spec: GridSpec,
    /// Row-major (col component, row component) per node.
    pub vectors: Vec<(f64, f64)>,
    pub epoch_index: usize,
}

pub fn force_field(surface: &PotentialSurface) -> ForceField {
    let spec = surface.spec;
    let (w, h) = (spec.width, spec.height);
    let at = |c: usize, r: usize| surface.values[r * w + c];
    let wrap = spec.topology == Topology::Toroid;
    let mut vectors = Vec ::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let du_dc = if wrap {
                (at((c + 1) % w, r) - at((c + w - 1) % w, r)) / 2.0
            } else if c == 0 {
                at(1, r) - at(0, r)
            } else if c == w - 1 {
                at(w - 1, r) - at(w - 2, r)
            } else {
                (at(c + 1, r) - at(c - 1, r)) / 2.0
            };
            let du_dr = if wrap {
                (at(c, (r + 1) % h) - at(c, (r + h - 1) % h)) / 2.0
            } else if r == 0 {
                at(c, 1) - at(c, 0)
            } else if r == h - 1 {
                at(c, h - 1) - at(c, h - 2)
            } else {
                (at(c, r + 1) - at(c, r - 1)) / 2.0
            };
            vectors.push((-du_dc, -du_dr));
        }
    }
    ForceField { spec, vectors, epoch_index: surface.epoch_index }
}

/// How the softening offset is chosen per epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonPolicy {
    /// 1e-3 times the epoch's mean off-diagonal distance.
    MeanScaled,
    Fixed(f64),
}

impl EpsilonPolicy {
    pub fn resolve(self, distances: &TermDistanceMatrix) -> f64 {
        match self {
            EpsilonPolicy::MeanScaled => default_epsilon(distances),
            EpsilonPolicy::Fixed(e) => e,
        }
    }
}

pub struct EpochInputs<'a> {
    pub epoch_index: usize,
    pub bmus: &'a BmuMap,
    pub masses: &'a MassTable,
    pub distances: &'a TermDistanceMatrix,
    pub spec: &'a GridSpec,
}

/// Everything the mechanics stage emits for one epoch, with the softening
/// value that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMechanics {
    pub epoch_index: usize,
    pub epsilon: f64,
    pub force: ForceMatrix,
    pub potential: PotentialMatrix,
    pub surface: PotentialSurface,
    pub field: ForceField,
}

pub fn epoch_series(inputs: &[EpochInputs], policy: EpsilonPolicy) -> Result<Vec<EpochMechanics>> {
    if inputs.is_empty() {
        return Err(Error::Input("epoch series needs at least one epoch".into()));
    }
    inputs
        .iter()
        .map(|e| {
            let epsilon = policy.resolve(e.distances);
            let force = pairwise_force(e.masses, e.distances, epsilon)?;
            let potential = pairwise_potential(e.masses, e.distances, epsilon)?;
            let surface = potential_surface(e.bmus, e.masses, e.spec, epsilon, e.epoch_index)?;
            let field = force_field(&surface);
            Ok(EpochMechanics { epoch_index: e.epoch_index, epsilon, force, potential, surface, field })
        })
        .collect()
}

/// CSV with term headers: first column `term`, then one column per term.
pub fn write_term_matrix_csv(
    terms: &[String],
    values: &[f64],
    w: impl std::io::Write,
) -> Result<()> {
    let n = terms.len();
    if values.len() != n * n {
        return Err(Error::Input(format!(
            "matrix has {} entries, expected {}",
            values.len(),
            n * n
        )));
    }
    let mut csv = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Format(format!("writing matrix csv: {e}"));
    let mut header = vec!["term".to_string()];
    header.extend(terms.iter().cloned());
    csv.write_record(&header).map_err(err)?;
    for i in 0..n {
        let mut row = vec![terms[i].clone()];
        row.extend(values[i * n..(i + 1) * n].iter().map(|v| format!("{v}")));
        csv.write_record(&row).map_err(err)?;
    }
    csv.flush().map_err(|e| Error::io("<csv stream>", e))?;
    Ok(())
}

/// Plain grid CSV: one line per grid row, comma-separated values.
pub fn write_surface_csv(surface: &PotentialSurface, mut w: impl std::io::Write) -> Result<()> {
    let err = |e: std::io::Error| Error::io("<surface stream>", e);
    for r in 0..surface.spec.height {
        let row: Vec<String> = (0..surface.spec.width)
            .map(|c| format!("{}", surface.values[r * surface.spec.width + c]))
            .collect();
        writeln!(w, "{}", row.join(",")).map_err(err)?;
    }
    Ok(())
}

pub fn write_field_csv(field: &ForceField, w: impl std::io::Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Format(format!("writing field csv: {e}"));
    csv.write_record(["node_col", "node_row", "force_col", "force_row"]).map_err(err)?;
    for (node, (fc, fr)) in field.vectors.iter().enumerate() {
        let coord = field.spec.coord(node);
        csv.write_record([
            coord.col.to_string(),
            coord.row.to_string(),
            format!("{fc}"),
            format!("{fr}"),
        ])
        .map_err(err)?;
    }
    csv.flush().map_err(|e| Error::io("<csv stream>", e))?;
    Ok(())
}
