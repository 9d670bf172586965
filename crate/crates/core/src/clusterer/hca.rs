//! Agglomerative clustering with complete linkage.
//!
//! Every step merges the globally closest pair of clusters, distance between
//! clusters being the maximum pairwise point distance. Ties break toward the
//! lexicographically smallest cluster-id pair, so the merge sequence is a
//! pure function of the input matrix.

use std::io::Write;

use crate::error::{Error, Result};

/// One agglomeration step. `a < b` are cluster ids: original points carry
/// ids `0..n`, the cluster created by merge `k` carries id `n + k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub leaf_count: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Nested text form: leaves are 0-based point indices, each merge is
    /// `(left,right):height` with children in (a, b) order, terminated by
    /// a semicolon.
    pub fn to_text(&self) -> String {
        let mut texts: Vec<String> = (0..self.leaf_count).map(|i| i.to_string()).collect();
        texts.reserve(self.merges.len());
        for m in &self.merges {
            texts.push(format!("({},{}):{}", texts[m.a], texts[m.b], m.height));
        }
        let mut out = texts.pop().unwrap_or_default();
        out.push(';');
        out
    }
}

pub fn write_dendrogram(dendrogram: &Dendrogram, mut w: impl Write) -> Result<()> {
    writeln!(w, "{}", dendrogram.to_text()).map_err(|e| Error::io("<dendrogram stream>", e))
}

/// Builds the complete-linkage dendrogram of an `n` x `n` row-major distance
/// matrix. The matrix must be symmetric, non-negative, finite, and zero on
/// the diagonal.
pub fn hca_complete_linkage(distance: &[f64], n: usize) -> Result<Dendrogram> {
    if n == 0 {
        return Err(Error::Input("clustering needs at least one point".into()));
    }
    if distance.len() != n * n {
        return Err(Error::Input(format!(
            "distance matrix must be {n}x{n}, got {} entries",
            distance.len()
        )));
    }
    for i in 0..n {
        if distance[i * n + i] != 0.0 {
            return Err(Error::Input(format!("distance matrix diagonal is nonzero at {i}")));
        }
        for j in (i + 1)..n {
            let d = distance[i * n + j];
            if !d.is_finite() || d < 0.0 {
                return Err(Error::Input(format!(
                    "distance matrix entry ({i}, {j}) is {d}, expected finite and non-negative"
                )));
            }
            if d != distance[j * n + i] {
                return Err(Error::Input(format!(
                    "distance matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    if n == 1 {
        return Ok(Dendrogram { leaf_count: 1, merges: Vec::new() });
    }

    // Slots hold the working matrix; merged clusters collapse into the lower
    // slot. Each active slot caches its best partner, keyed by
    // (distance, low id, high id); complete linkage only grows distances, so
    // a cache entry stays valid until its partner is itself merged.
    let mut d = distance.to_vec();
    let mut cluster_id: Vec<usize> = (0..n).collect();
    let mut active = vec![true; n];
    let mut cache: Vec<Option<(f64, usize)>> = vec![None; n];
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for si in 0..n {
            if !active[si] {
                continue;
            }
            if cache[si].is_none_or(|(_, p)| !active[p]) {
                cache[si] = best_partner(&d, n, si, &active, &cluster_id);
            }
            let (dist, sj) = cache[si].unwrap();
            let (lo, hi) = ordered(cluster_id[si], cluster_id[sj]);
            if best.is_none_or(|(bd, bl, bh, _, _)| (dist, lo, hi) < (bd, bl, bh)) {
                best = Some((dist, lo, hi, si, sj));
            }
        }
        let (dist, lo, hi, si, sj) = best.unwrap();
        merges.push(Merge { a: lo, b: hi, height: dist });

        let keep = si.min(sj);
        let gone = si.max(sj);
        for k in 0..n {
            if active[k] && k != keep && k != gone {
                let nd = d[keep * n + k].max(d[gone * n + k]);
                d[keep * n + k] = nd;
                d[k * n + keep] = nd;
            }
        }
        active[gone] = false;
        cluster_id[keep] = n + step;
        cache[keep] = None;
        for c in cache.iter_mut() {
            if c.is_some_and(|(_, p)| p == keep || p == gone) {
                *c = None;
            }
        }
    }
    Ok(Dendrogram { leaf_count: n, merges })
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn best_partner(
    d: &[f64],
    n: usize,
    si: usize,
    active: &[bool],
    ids: &[usize],
) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize, usize, usize)> = None;
    for sj in 0..n {
        if sj == si || !active[sj] {
            continue;
        }
        let dist = d[si * n + sj];
        let (lo, hi) = ordered(ids[si], ids[sj]);
        if best.is_none_or(|(bd, bl, bh, _)| (dist, lo, hi) < (bd, bl, bh)) {
            best = Some((dist, lo, hi, sj));
        }
    }
    best.map(|(dist, _, _, sj)| (dist, sj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn from_points_1d(points: &[f64]) -> Vec<f64> {
        let n = points.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = (points[i] - points[j]).abs();
            }
        }
        d
    }

    #[test]
    fn evenly_spaced_line_merges_lowest_pair_first() {
        let d = from_points_1d(&[1.0, 2.0, 3.0]);
        let dendro = hca_complete_linkage(&d, 3).unwrap();
        assert_eq!(dendro.merges.len(), 2);
        // d(0,1) == d(1,2) == 1: the (0,1) pair wins the tie.
        assert_eq!((dendro.merges[0].a, dendro.merges[0].b), (0, 1));
        assert_eq!(dendro.merges[0].height, 1.0);
        // Complete linkage: d({0,1}, {2}) = max(2, 1) = 2.
        assert_eq!((dendro.merges[1].a, dendro.merges[1].b), (2, 3));
        assert_eq!(dendro.merges[1].height, 2.0);
    }

    #[test]
    fn equal_distance_tie_takes_smallest_id_pair() {
        // d(0,3) == d(1,2) == 1, everything else 5.
        let mut d = vec![5.0; 16];
        for i in 0..4 {
            d[i * 4 + i] = 0.0;
        }
        d[3] = 1.0;
        d[12] = 1.0;
        d[6] = 1.0;
        d[9] = 1.0;
        let dendro = hca_complete_linkage(&d, 4).unwrap();
        assert_eq!((dendro.merges[0].a, dendro.merges[0].b), (0, 3));
    }

    #[test]
    fn duplicate_points_merge_at_height_zero() {
        let d = from_points_1d(&[2.0, 2.0, 7.0]);
        let dendro = hca_complete_linkage(&d, 3).unwrap();
        assert_eq!(dendro.merges[0].height, 0.0);
        assert_eq!((dendro.merges[0].a, dendro.merges[0].b), (0, 1));
    }

    #[test]
    fn single_point_has_no_merges() {
        let dendro = hca_complete_linkage(&[0.0], 1).unwrap();
        assert_eq!(dendro.leaf_count, 1);
        assert!(dendro.merges.is_empty());
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let d = vec![0.0, 1.0, 2.0, 0.0];
        let err = hca_complete_linkage(&d, 2).unwrap_err();
        assert!(err.to_string().contains("symmetric"), "{err}");
    }

    #[test]
    fn negative_distance_is_rejected() {
        let d = vec![0.0, -1.0, -1.0, 0.0];
        assert!(hca_complete_linkage(&d, 2).is_err());
    }

    #[test]
    fn nonzero_diagonal_is_rejected() {
        let d = vec![0.5, 1.0, 1.0, 0.0];
        assert!(hca_complete_linkage(&d, 2).is_err());
    }

    #[test]
    fn text_export_nests_merges() {
        let d = from_points_1d(&[1.0, 2.0, 3.0]);
        let dendro = hca_complete_linkage(&d, 3).unwrap();
        // Second merge is (2, 3) with 3 = the {0,1} cluster, so the leaf
        // renders first.
        assert_eq!(dendro.to_text(), "(2,(0,1):1):2;");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn merge_heights_never_decrease(
            points in proptest::collection::vec(-50.0f64..50.0, 2..=10)
        ) {
            let d = from_points_1d(&points);
            let dendro = hca_complete_linkage(&d, points.len()).unwrap();
            prop_assert_eq!(dendro.merges.len(), points.len() - 1);
            for pair in dendro.merges.windows(2) {
                prop_assert!(pair[0].height <= pair[1].height);
            }
        }

        #[test]
        fn every_cluster_id_is_used_exactly_once(
            points in proptest::collection::vec(-50.0f64..50.0, 2..=10)
        ) {
            let n = points.len();
            let d = from_points_1d(&points);
            let dendro = hca_complete_linkage(&d, n).unwrap();
            let mut seen = vec![false; 2 * n - 1];
            for m in &dendro.merges {
                prop_assert!(m.a < m.b);
                for id in [m.a, m.b] {
                    prop_assert!(!seen[id], "cluster {} merged twice", id);
                    seen[id] = true;
                }
            }
            // Only the root stays unmerged.
            prop_assert_eq!(seen.iter().filter(|&&s| !s).count(), 1);
            prop_assert!(!seen[2 * n - 2]);
        }
    }
}
