//! Queries against a trained codebook: BMU assignment and the U-matrix.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::find_bmu_in;
use super::{Codebook, GridCoord, GridSpec, Topology};
use crate::cooccur::TermMatrix;
use crate::error::{Error, Result};

/// Best-matching unit per term, plus the mean quantization error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmuMap {
    pub terms: Vec<String>,
    pub coords: Vec<GridCoord>,
    pub quantization_error: f64,
}

impl BmuMap {
    pub fn coord_of(&self, term: &str) -> Option<GridCoord> {
        self.terms
            .binary_search_by(|t| t.as_str().cmp(term))
            .ok()
            .map(|i| self.coords[i])
    }
}

/// BMU of a single vector: the node minimizing Euclidean distance, exact
/// ties going to the smallest (row, col).
pub fn find_bmu(codebook: &Codebook, vector: &[f64]) -> Result<GridCoord> {
    if vector.len() != codebook.dim() {
        return Err(Error::Input(format!(
            "query vector has dimension {}, codebook expects {}",
            vector.len(),
            codebook.dim()
        )));
    }
    let (node, _) = find_bmu_in(codebook.weights(), codebook.n_nodes(), codebook.dim(), vector);
    Ok(codebook.spec().coord(node))
}

/// BMU per term vector, parallel over terms.
pub fn best_matching_units(codebook: &Codebook, data: &TermMatrix) -> Result<BmuMap> {
    if data.dim() != codebook.dim() {
        return Err(Error::Input(format!(
            "term vectors have dimension {}, codebook expects {}",
            data.dim(),
            codebook.dim()
        )));
    }
    let spec = codebook.spec();
    let results: Vec<(usize, f64)> = (0..data.m())
        .into_par_iter()
        .map(|i| find_bmu_in(codebook.weights(), codebook.n_nodes(), codebook.dim(), data.row(i)))
        .collect();
    let coords: Vec<GridCoord> = results.iter().map(|(node, _)| spec.coord(*node)).collect();
    let quantization_error = if results.is_empty() {
        0.0
    } else {
        results.iter().map(|(_, d2)| d2.sqrt()).sum::<f64>() / results.len() as f64
    };
    Ok(BmuMap {
        terms: data.terms().to_vec(),
        coords,
        quantization_error,
    })
}

/// Per-node mean weight distance to the 8-neighborhood. Toroidal grids wrap;
/// planar grids average over the neighbors that exist.
#[derive(Debug, Clone, PartialEq)]
pub struct UMatrix {
    pub spec: GridSpec,
    pub heights: Vec<f64>,
}

pub fn umatrix(codebook: &Codebook) -> UMatrix {
    let spec = *codebook.spec();
    let (w, h) = (spec.width as i64, spec.height as i64);
    let heights: Vec<f64> = (0..spec.n_nodes())
        .map(|node| {
            let c = spec.coord(node);
            let mut total = 0.0;
            let mut count = 0u32;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (col, row) = (c.col as i64 + dc, c.row as i64 + dr);
                    let neighbor = match spec.topology {
                        Topology::Toroid => {
                            GridCoord::new((col.rem_euclid(w)) as usize, (row.rem_euclid(h)) as usize)
                        }
                        Topology::Planar => {
                            if col < 0 || col >= w || row < 0 || row >= h {
                                continue;
                            }
                            GridCoord::new(col as usize, row as usize)
                        }
                    };
                    let a = codebook.node_weight(node);
                    let b = codebook.weight_at(neighbor);
                    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                    total += d2.sqrt();
                    count += 1;
                }
            }
            total / count as f64
        })
        .collect();
    UMatrix { spec, heights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: Vec<Vec<f64>>) -> TermMatrix {
        let dim = rows[0].len();
        let terms = (0..rows.len()).map(|i| format!("t{i:03}")).collect();
        TermMatrix::new(terms, rows.into_iter().flatten().collect(), dim).unwrap()
    }

    fn random_codebook(seed: u64, spec: GridSpec, dim: usize) -> Codebook {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..spec.n_nodes() * dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Codebook::new(spec, dim, weights, 0).unwrap()
    }

    #[test]
    fn node_weight_maps_to_its_own_node() {
        let spec = GridSpec::toroid(6, 4).unwrap();
        let cb = random_codebook(3, spec, 5);
        for node in 0..cb.n_nodes() {
            let coord = find_bmu(&cb, cb.node_weight(node)).unwrap();
            assert_eq!(coord, spec.coord(node));
        }
    }

    #[test]
    fn exact_ties_choose_smallest_row_col() {
        let spec = GridSpec::toroid(6, 6).unwrap();
        let mut weights = vec![0.0; spec.n_nodes() * 2];
        // Two identical nodes at (0,0) and (5,5); everything else far away.
        for node in 0..spec.n_nodes() {
            weights[node * 2] = 100.0 + node as f64;
            weights[node * 2 + 1] = -50.0;
        }
        let target = spec.index(GridCoord::new(5, 5));
        weights[0] = 1.0;
        weights[1] = 1.0;
        weights[target * 2] = 1.0;
        weights[target * 2 + 1] = 1.0;
        let cb = Codebook::new(spec, 2, weights, 0).unwrap();
        let coord = find_bmu(&cb, &[1.0, 1.0]).unwrap();
        assert_eq!(coord, GridCoord::new(0, 0));
    }

    #[test]
    fn bmu_map_matches_per_vector_queries_and_qe() {
        let spec = GridSpec::toroid(5, 4).unwrap();
        let cb = random_codebook(9, spec, 3);
        let data = matrix(vec![
            vec![0.1, 0.2, 0.3],
            cb.node_weight(7).to_vec(),
            vec![-0.5, 0.5, 0.0],
        ]);
        let map = best_matching_units(&cb, &data).unwrap();
        assert_eq!(map.coords[1], spec.coord(7));
        for (i, term) in map.terms.iter().enumerate() {
            assert_eq!(map.coord_of(term), Some(map.coords[i]));
            assert_eq!(find_bmu(&cb, data.row(i)).unwrap(), map.coords[i]);
        }
        let mut expect_qe = 0.0;
        for i in 0..data.m() {
            let w = cb.weight_at(map.coords[i]);
            expect_qe += data.row(i).iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        }
        expect_qe /= data.m() as f64;
        assert!((map.quantization_error - expect_qe).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_input_error() {
        let spec = GridSpec::toroid(4, 3).unwrap();
        let cb = random_codebook(1, spec, 3);
        assert!(find_bmu(&cb, &[1.0, 2.0]).is_err());
        let data = matrix(vec![vec![0.0, 1.0]]);
        assert!(best_matching_units(&cb, &data).is_err());
    }

    #[test]
    fn constant_codebook_has_zero_umatrix() {
        let spec = GridSpec::toroid(5, 4).unwrap();
        let cb = Codebook::new(spec, 3, vec![0.7; spec.n_nodes() * 3], 0).unwrap();
        let u = umatrix(&cb);
        assert!(u.heights.iter().all(|h| *h == 0.0));
    }

    #[test]
    fn planar_two_by_two_matches_hand_computation() {
        let spec = GridSpec::new(2, 2, Topology::Planar).unwrap();
        // Weights: (0,0)=0, (1,0)=1, (0,1)=2, (1,1)=3 in one dimension.
        let cb = Codebook::new(spec, 1, vec![0.0, 1.0, 2.0, 3.0], 0).unwrap();
        let u = umatrix(&cb);
        // Node (0,0): neighbors 1, 2, 3 -> mean 2. Node (1,0): 0, 2, 3 ->
        // mean (1 + 1 + 2)/3. Symmetric for the others.
        assert!((u.heights[0] - 2.0).abs() < 1e-15);
        assert!((u.heights[1] - 4.0 / 3.0).abs() < 1e-15);
        assert!((u.heights[2] - 4.0 / 3.0).abs() < 1e-15);
        assert!((u.heights[3] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn toroidal_umatrix_wraps_to_far_edges() {
        let spec = GridSpec::toroid(6, 4).unwrap();
        let base = Codebook::new(spec, 1, vec![0.0; spec.n_nodes()], 0).unwrap();
        let mut bumped_weights = base.weights().to_vec();
        // Bump the far-right node in row 0; the left-edge node's height must
        // move because its wrapped neighborhood includes column 5.
        bumped_weights[spec.index(GridCoord::new(5, 0))] = 9.0;
        let bumped = Codebook::new(spec, 1, bumped_weights, 0).unwrap();
        let before = umatrix(&base);
        let after = umatrix(&bumped);
        let left_edge = spec.index(GridCoord::new(0, 0));
        assert_ne!(before.heights[left_edge], after.heights[left_edge]);
    }
}
