//! Drift bookkeeping between consecutive epoch maps: split/merge events,
//! participation rates, anchor-relative coordinates, and normalized
//! BMU-distance matrices.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::catalog::IndexLevel;
use crate::error::{Error, Result};
use crate::esom::{signed_axis_delta, BmuMap, Codebook, GridCoord, GridSpec, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DriftKind {
    Split,
    Merge,
}

impl DriftKind {
    pub fn label(self) -> &'static str {
        match self {
            DriftKind::Split => "split",
            DriftKind::Merge => "merge",
        }
    }
}

/// One drift event at a transition. A split starts from a single shared
/// node, a merge ends on one; the other side lists the nodes spanned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEvent {
    pub kind: DriftKind,
    /// (epoch t, epoch t+1) indices.
    pub transition: (usize, usize),
    pub nodes_before: Vec<GridCoord>,
    pub nodes_after: Vec<GridCoord>,
    /// Participating terms, sorted.
    pub terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftLog {
    pub period: String,
    pub level: IndexLevel,
    /// Sorted by (transition, kind, first term).
    pub events: Vec<DriftEvent>,
    /// Transition -> percentage of tracked terms participating.
    pub rates: BTreeMap<(usize, usize), f64>,
}

/// Detects split and merge events for one transition.
///
/// A split is a node at t hosting at least two tracked terms whose BMUs at
/// t+1 span at least two nodes; every term on the source node participates.
/// Merges are the same rule with the epochs swapped. A multi-way scatter
/// counts as one event per source node.
pub fn detect_events(
    bmus_t: &BmuMap,
    bmus_t1: &BmuMap,
    terms: &[String],
    spec: &GridSpec,
    transition: (usize, usize),
) -> Result<Vec<DriftEvent>> {
    let mut tracked: Vec<&str> = terms.iter().map(String::as_str).collect();
    tracked.sort_unstable();
    tracked.dedup();

    let mut placed: Vec<(&str, GridCoord, GridCoord)> = Vec::with_capacity(tracked.len());
    for term in tracked {
        let before = bmus_t.coord_of(term).ok_or_else(|| {
            Error::Input(format!("term {term:?} missing from the epoch {} map", transition.0))
        })?;
        let after = bmus_t1.coord_of(term).ok_or_else(|| {
            Error::Input(format!("term {term:?} missing from the epoch {} map", transition.1))
        })?;
        for coord in [before, after] {
            if !spec.contains(coord) {
                return Err(Error::Input(format!(
                    "term {term:?} maps to {coord} outside the {}x{} grid",
                    spec.width, spec.height
                )));
            }
        }
        placed.push((term, before, after));
    }

    let mut events = Vec::new();
    collect_kind(&placed, DriftKind::Split, transition, &mut events);
    let reversed: Vec<(&str, GridCoord, GridCoord)> =
        placed.iter().map(|&(t, b, a)| (t, a, b)).collect();
    collect_kind(&reversed, DriftKind::Merge, transition, &mut events);
    events.sort_by(|x, y| {
        x.transition
            .cmp(&y.transition)
            .then(x.kind.cmp(&y.kind))
            .then_with(|| x.terms[0].cmp(&y.terms[0]))
    });
    Ok(events)
}

/// Finds nodes on the `from` side shared by >= 2 terms spreading over >= 2
/// nodes on the other side. `placed` carries (term, from, to) triples.
fn collect_kind(
    placed: &[(&str, GridCoord, GridCoord)],
    kind: DriftKind,
    transition: (usize, usize),
    events: &mut Vec<DriftEvent>,
) {
    let mut by_node: BTreeMap<GridCoord, Vec<usize>> = BTreeMap::new();
    for (i, (_, from, _)) in placed.iter().enumerate() {
        by_node.entry(*from).or_default().push(i);
    }
    for (node, members) in &by_node {
        if members.len() < 2 {
            continue;
        }
        let spread: BTreeSet<GridCoord> = members.iter().map(|&i| placed[i].2).collect();
        if spread.len() < 2 {
            continue;
        }
        let mut terms: Vec<String> =
            members.iter().map(|&i| placed[i].0.to_string()).collect();
        terms.sort_unstable();
        let (nodes_before, nodes_after) = match kind {
            DriftKind::Split => (vec![*node], spread.into_iter().collect()),
            DriftKind::Merge => (spread.into_iter().collect(), vec![*node]),
        };
        events.push(DriftEvent { kind, transition, nodes_before, nodes_after, terms });
    }
}

/// Percentage of tracked terms participating in at least one event.
pub fn drift_rate(events: &[DriftEvent], terms: &[String]) -> Result<f64> {
    if terms.is_empty() {
        return Err(Error::Input("drift rate needs a non-empty term set".into()));
    }
    let tracked: BTreeSet<&str> = terms.iter().map(String::as_str).collect();
    let participating: BTreeSet<&str> = events
        .iter()
        .flat_map(|e| e.terms.iter().map(String::as_str))
        .filter(|t| tracked.contains(t))
        .collect();
    Ok(100.0 * participating.len() as f64 / tracked.len() as f64)
}

/// Runs event detection over every consecutive epoch pair and records the
/// per-transition rates.
pub fn build_drift_log(
    period: &str,
    level: IndexLevel,
    bmus_per_epoch: &[BmuMap],
    terms: &[String],
    spec: &GridSpec,
) -> Result<DriftLog> {
    if bmus_per_epoch.is_empty() {
        return Err(Error::Input("drift log needs at least one epoch".into()));
    }
    let mut events = Vec::new();
    let mut rates = BTreeMap::new();
    for (t, pair) in bmus_per_epoch.windows(2).enumerate() {
        let transition = (t, t + 1);
        let step = detect_events(&pair[0], &pair[1], terms, spec, transition)?;
        rates.insert(transition, drift_rate(&step, terms)?);
        events.extend(step);
    }
    Ok(DriftLog { period: period.to_string(), level, events, rates })
}

/// Per-epoch term coordinates relative to the anchor's BMU, as signed
/// shortest displacements (columns then rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchoredCoordinates {
    pub anchor: String,
    pub per_epoch: Vec<BTreeMap<String, (i64, i64)>>,
}

pub fn anchored_coordinates(
    bmus_per_epoch: &[BmuMap],
    anchor: &str,
    spec: &GridSpec,
) -> Result<AnchoredCoordinates> {
    let wrap = spec.topology == Topology::Toroid;
    let mut per_epoch = Vec::with_capacity(bmus_per_epoch.len());
    for (e, bmus) in bmus_per_epoch.iter().enumerate() {
        let origin = bmus.coord_of(anchor).ok_or_else(|| {
            Error::Input(format!("anchor term {anchor:?} has no BMU in epoch {e}"))
        })?;
        let mut coords = BTreeMap::new();
        for (term, coord) in bmus.terms.iter().zip(&bmus.coords) {
            if !spec.contains(*coord) {
                return Err(Error::Input(format!(
                    "term {term:?} maps to {coord} outside the {}x{} grid",
                    spec.width, spec.height
                )));
            }
            let dc = signed_axis_delta(origin.col, coord.col, spec.width, wrap);
            let dr = signed_axis_delta(origin.row, coord.row, spec.height, wrap);
            coords.insert(term.clone(), (dc, dr));
        }
        per_epoch.push(coords);
    }
    Ok(AnchoredCoordinates { anchor: anchor.to_string(), per_epoch })
}

/// Term-to-term Euclidean distances between BMU weight vectors, with the
/// strict upper triangle normalized to sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TermDistanceMatrix {
    pub terms: Vec<String>,
    /// Row-major n x n, symmetric, zero diagonal.
    pub values: Vec<f64>,
    /// False when every raw distance was zero: normalization was skipped.
    pub normalized: bool,
}

impl TermDistanceMatrix {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.terms.len() + j]
    }
}

/// One matrix per epoch. Every epoch must carry the same term set; each
/// epoch's distances come from its own codebook.
pub fn distance_matrices(
    bmus_per_epoch: &[BmuMap],
    codebooks: &[Codebook],
) -> Result<Vec<TermDistanceMatrix>> {
    if bmus_per_epoch.is_empty() {
        return Err(Error::Input("distance matrices need at least one epoch".into()));
    }
    if bmus_per_epoch.len() != codebooks.len() {
        return Err(Error::Input(format!(
            "{} BMU maps but {} codebooks",
            bmus_per_epoch.len(),
            codebooks.len()
        )));
    }
    let terms = &bmus_per_epoch[0].terms;
    for (e, bmus) in bmus_per_epoch.iter().enumerate().skip(1) {
        if &bmus.terms != terms {
            return Err(Error::Input(format!(
                "epoch {e} does not share the epoch 0 term set"
            )));
        }
    }

    let mut out = Vec::with_capacity(bmus_per_epoch.len());
    for (e, (bmus, codebook)) in bmus_per_epoch.iter().zip(codebooks).enumerate() {
        let n = terms.len();
        let spec = codebook.spec();
        for coord in &bmus.coords {
            if !spec.contains(*coord) {
                return Err(Error::Input(format!(
                    "epoch {e} BMU {coord} lies outside its codebook grid"
                )));
            }
        }
        let mut values = vec![0.0; n * n];
        let mut sum = 0.0;
        for i in 0..n {
            let wi = codebook.weight_at(bmus.coords[i]);
            for j in (i + 1)..n {
                let wj = codebook.weight_at(bmus.coords[j]);
                let d: f64 =
                    wi.iter().zip(wj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                values[i * n + j] = d;
                values[j * n + i] = d;
                sum += d;
            }
        }
        let normalized = sum > 0.0;
        if normalized {
            for v in &mut values {
                *v /= sum;
            }
        }
        out.push(TermDistanceMatrix { terms: terms.clone(), values, normalized });
    }
    Ok(out)
}

/// Line format: a header line, one `rate` line per transition, one `event`
/// line per event with nodes and terms joined by `|`.
pub fn write_drift_log_text(log: &DriftLog, mut w: impl Write) -> Result<()> {
    let err = |e: std::io::Error| Error::io("<drift log stream>", e);
    writeln!(w, "drift-log v1 period={} level={}", log.period, log.level.label()).map_err(err)?;
    for ((a, b), rate) in &log.rates {
        writeln!(w, "rate {a}->{b} {rate}").map_err(err)?;
    }
    for e in &log.events {
        writeln!(
            w,
            "event {}->{} {} before={} after={} terms={}",
            e.transition.0,
            e.transition.1,
            e.kind.label(),
            join_coords(&e.nodes_before),
            join_coords(&e.nodes_after),
            e.terms.join("|"),
        )
        .map_err(err)?;
    }
    Ok(())
}

pub fn write_drift_log_csv(log: &DriftLog, w: impl Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Format(format!("writing drift log csv: {e}"));
    csv.write_record([
        "period",
        "level",
        "transition_from",
        "transition_to",
        "kind",
        "nodes_before",
        "nodes_after",
        "terms",
    ])
    .map_err(err)?;
    for e in &log.events {
        csv.write_record([
            log.period.clone(),
            log.level.label().to_string(),
            e.transition.0.to_string(),
            e.transition.1.to_string(),
            e.kind.label().to_string(),
            join_coords(&e.nodes_before),
            join_coords(&e.nodes_after),
            e.terms.join("|"),
        ])
        .map_err(err)?;
    }
    csv.flush().map_err(|e| Error::io("<csv stream>", e))?;
    Ok(())
}

fn join_coords(coords: &[GridCoord]) -> String {
    coords
        .iter()
        .map(|c| format!("{},{}", c.col, c.row))
        .collect::<Vec<_>>()
        .join("|")
}
