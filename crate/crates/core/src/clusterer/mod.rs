//! Codebook clustering: affinity propagation for the primary labeling,
//! complete-linkage HCA as a robustness cross-check.

mod affinity;
mod hca;

pub use affinity::{affinity_propagation, AffinityParams, ClusterAssignment, Preference};
pub use hca::{hca_complete_linkage, write_dendrogram, Dendrogram, Merge};

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::esom::{BmuMap, Codebook, GridSpec};

/// Clusters the codebook's node weights with affinity propagation,
/// similarity = negative squared Euclidean distance.
pub fn cluster_codebook(codebook: &Codebook, params: &AffinityParams) -> Result<ClusterAssignment> {
    let n = codebook.n_nodes();
    let mut similarity = vec![0.0; n * n];
    for i in 0..n {
        let wi = codebook.node_weight(i);
        for j in (i + 1)..n {
            let wj = codebook.node_weight(j);
            let d2: f64 = wi.iter().zip(wj).map(|(a, b)| (a - b) * (a - b)).sum();
            similarity[i * n + j] = -d2;
            similarity[j * n + i] = -d2;
        }
    }
    affinity_propagation(&similarity, n, params)
}

/// Complete-linkage dendrogram over the codebook's node weights.
pub fn hca_codebook(codebook: &Codebook) -> Result<Dendrogram> {
    let n = codebook.n_nodes();
    let mut distance = vec![0.0; n * n];
    for i in 0..n {
        let wi = codebook.node_weight(i);
        for j in (i + 1)..n {
            let wj = codebook.node_weight(j);
            let d: f64 = wi.iter().zip(wj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            distance[i * n + j] = d;
            distance[j * n + i] = d;
        }
    }
    hca_complete_linkage(&distance, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterShare {
    pub terms: Vec<String>,
    /// Fraction of all mapped terms that live in this cluster.
    pub proportion: f64,
}

/// Groups terms by the cluster label of their BMU node. Proportions are
/// relative to the total mapped term count, so they sum to 1.
pub fn cluster_composition(
    assignment: &ClusterAssignment,
    bmus: &BmuMap,
    spec: &GridSpec,
) -> Result<BTreeMap<usize, ClusterShare>> {
    if assignment.labels.len() != spec.n_nodes() {
        return Err(Error::Input(format!(
            "assignment covers {} nodes but the grid has {}",
            assignment.labels.len(),
            spec.n_nodes()
        )));
    }
    let mut clusters: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (term, coord) in bmus.terms.iter().zip(&bmus.coords) {
        if !spec.contains(*coord) {
            return Err(Error::Input(format!(
                "term {term:?} maps to {coord} outside the {}x{} grid",
                spec.width, spec.height
            )));
        }
        let label = assignment.labels[spec.index(*coord)];
        clusters.entry(label).or_default().push(term.clone());
    }
    let total: usize = clusters.values().map(Vec::len).sum();
    Ok(clusters
        .into_iter()
        .map(|(label, terms)| {
            let proportion = terms.len() as f64 / total as f64;
            (label, ClusterShare { terms, proportion })
        })
        .collect())
}

/// CSV rows: node_col, node_row, cluster_id, exemplar_flag.
pub fn write_assignment_csv(
    assignment: &ClusterAssignment,
    spec: &GridSpec,
    w: impl Write,
) -> Result<()> {
    if assignment.labels.len() != spec.n_nodes() {
        return Err(Error::Input("assignment does not match the grid".into()));
    }
    let mut csv = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Format(format!("writing assignment csv: {e}"));
    csv.write_record(["node_col", "node_row", "cluster_id", "exemplar_flag"]).map_err(err)?;
    for node in 0..spec.n_nodes() {
        let c = spec.coord(node);
        let exemplar = assignment.exemplars.contains(&node);
        csv.write_record([
            c.col.to_string(),
            c.row.to_string(),
            assignment.labels[node].to_string(),
            u8::from(exemplar).to_string(),
        ])
        .map_err(err)?;
    }
    csv.flush().map_err(|e| Error::io("<csv stream>", e))?;
    Ok(())
}

/// CSV rows: cluster_id, term, cluster_proportion.
pub fn write_composition_csv(
    composition: &BTreeMap<usize, ClusterShare>,
    w: impl Write,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Format(format!("writing composition csv: {e}"));
    csv.write_record(["cluster_id", "term", "cluster_proportion"]).map_err(err)?;
    for (label, share) in composition {
        for term in &share.terms {
            csv.write_record([label.to_string(), term.clone(), format!("{:.6}", share.proportion)])
                .map_err(err)?;
        }
    }
    csv.flush().map_err(|e| Error::io("<csv stream>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::esom::{GridCoord, Topology};

    fn tiny_codebook(weights: Vec<f64>, dim: usize, w: usize, h: usize) -> Codebook {
        let spec = GridSpec::new(w, h, Topology::Toroid).unwrap();
        Codebook::new(spec, dim, weights, 0).unwrap()
    }

    #[test]
    fn constant_codebook_is_one_cluster() {
        let cb = tiny_codebook(vec![0.5; 12], 2, 3, 2);
        let assignment = cluster_codebook(&cb, &AffinityParams::default()).unwrap();
        assert_eq!(assignment.exemplars.len(), 1);
        assert!(assignment.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn clustering_is_deterministic() {
        let weights: Vec<f64> = (0..24).map(|i| ((i * 7 % 13) as f64) * 0.3).collect();
        let cb = tiny_codebook(weights, 2, 4, 3);
        let a = cluster_codebook(&cb, &AffinityParams::default()).unwrap();
        let b = cluster_codebook(&cb, &AffinityParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn composition_proportions_follow_cluster_sizes() {
        let spec = GridSpec::new(3, 2, Topology::Toroid).unwrap();
        let assignment = ClusterAssignment {
            // Nodes 0-2 in cluster 0, nodes 3-5 in cluster 1.
            labels: vec![0, 0, 0, 1, 1, 1],
            exemplars: vec![0, 3],
            iterations_used: 1,
            converged: true,
        };
        let bmus = BmuMap {
            terms: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            coords: vec![
                GridCoord::new(0, 0),
                GridCoord::new(1, 0),
                GridCoord::new(2, 0),
                GridCoord::new(0, 1),
            ],
            quantization_error: 0.0,
        };
        let comp = cluster_composition(&assignment, &bmus, &spec).unwrap();
        assert_eq!(comp[&0].proportion, 0.75);
        assert_eq!(comp[&1].proportion, 0.25);
        assert_eq!(comp[&0].terms, vec!["a", "b", "c"]);
        let total: usize = comp.values().map(|s| s.terms.len()).sum();
        assert_eq!(total, 4);
    }

    #[test]
    fn composition_single_node_holds_everything() {
        let spec = GridSpec::new(3, 2, Topology::Toroid).unwrap();
        let assignment = ClusterAssignment {
            labels: vec![0; 6],
            exemplars: vec![0],
            iterations_used: 1,
            converged: true,
        };
        let bmus = BmuMap {
            terms: vec!["a".into(), "b".into()],
            coords: vec![GridCoord::new(1, 1), GridCoord::new(1, 1)],
            quantization_error: 0.0,
        };
        let comp = cluster_composition(&assignment, &bmus, &spec).unwrap();
        assert_eq!(comp.len(), 1);
        assert_eq!(comp[&0].proportion, 1.0);
    }

    #[test]
    fn composition_rejects_grid_mismatch() {
        let spec = GridSpec::new(3, 2, Topology::Toroid).unwrap();
        let assignment = ClusterAssignment {
            labels: vec![0; 5],
            exemplars: vec![0],
            iterations_used: 1,
            converged: true,
        };
        let bmus = BmuMap {
            terms: vec![],
            coords: vec![],
            quantization_error: 0.0,
        };
        assert!(cluster_composition(&assignment, &bmus, &spec).is_err());
    }

    #[test]
    fn assignment_csv_lists_every_node() {
        let cb = tiny_codebook(vec![0.5; 12], 2, 3, 2);
        let assignment = cluster_codebook(&cb, &AffinityParams::default()).unwrap();
        let mut buf = Vec::new();
        write_assignment_csv(&assignment, cb.spec(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 6);
        assert!(text.lines().any(|l| l.ends_with(",1")));
    }
}
