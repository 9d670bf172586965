//! Self-organizing map over a toroidal (or planar) grid: PCA-seeded
//! initialization, deterministic batch training, BMU queries, U-matrix.
//!
//! Determinism contract: training results are bit-identical across thread
//! counts. BMU search is read-only and element-independent; per-node batch
//! updates accumulate their inputs in a fixed order.

mod codebook;
mod init;
mod query;
mod train;

pub use codebook::{read_codebook, read_codebook_text, write_codebook, write_codebook_text, Codebook};
pub use init::{pca_initialize, random_initialize};
pub use query::{best_matching_units, find_bmu, umatrix, BmuMap, UMatrix};
pub use train::{train, Neighborhood, TrainingSchedule};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Toroid,
    Planar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub topology: Topology,
}

impl GridSpec {
    pub fn new(width: usize, height: usize, topology: Topology) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::Config(format!(
                "grid must be at least 2x2, got {width}x{height}"
            )));
        }
        Ok(GridSpec {
            width,
            height,
            topology,
        })
    }

    pub fn toroid(width: usize, height: usize) -> Result<Self> {
        GridSpec::new(width, height, Topology::Toroid)
    }

    pub fn n_nodes(&self) -> usize {
        self.width * self.height
    }

    /// Row-major node index.
    pub fn index(&self, coord: GridCoord) -> usize {
        coord.row * self.width + coord.col
    }

    pub fn coord(&self, index: usize) -> GridCoord {
        GridCoord {
            col: index % self.width,
            row: index / self.width,
        }
    }

    pub fn contains(&self, coord: GridCoord) -> bool {
        coord.col < self.width && coord.row < self.height
    }

    /// Length of the grid diagonal, used to normalize grid distances.
    pub fn diagonal(&self) -> f64 {
        ((self.width * self.width + self.height * self.height) as f64).sqrt()
    }

    /// Grid distance under this topology: toroidal wraparound or plain
    /// Euclidean for planar grids.
    pub fn distance(&self, a: GridCoord, b: GridCoord) -> f64 {
        match self.topology {
            Topology::Toroid => toroidal_distance(a, b, self),
            Topology::Planar => {
                let dc = a.col.abs_diff(b.col) as f64;
                let dr = a.row.abs_diff(b.row) as f64;
                (dc * dc + dr * dr).sqrt()
            }
        }
    }
}

/// Grid position. Ordering is (row, col) lexicographic, matching the BMU
/// tie-break rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridCoord {
    pub col: usize,
    pub row: usize,
}

impl GridCoord {
    pub fn new(col: usize, row: usize) -> Self {
        GridCoord { col, row }
    }
}

impl PartialOrd for GridCoord {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GridCoord {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.row, self.col).cmp(&(other.row, other.col))
    }
}

impl std::fmt::Display for GridCoord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.col, self.row)
    }
}

/// Euclidean distance with per-axis wraparound:
/// delta_c = min(|c1 - c2|, width - |c1 - c2|), likewise for rows.
pub fn toroidal_distance(a: GridCoord, b: GridCoord, spec: &GridSpec) -> f64 {
    let dc = a.col.abs_diff(b.col);
    let dc = dc.min(spec.width - dc) as f64;
    let dr = a.row.abs_diff(b.row);
    let dr = dr.min(spec.height - dr) as f64;
    (dc * dc + dr * dr).sqrt()
}

/// Signed displacement from `from` to `to` along one axis of length `len`,
/// taking the shorter way around when `wrap` is set. An exact half-length
/// tie resolves to the positive direction.
pub fn signed_axis_delta(from: usize, to: usize, len: usize, wrap: bool) -> i64 {
    let raw = to as i64 - from as i64;
    if !wrap {
        return raw;
    }
    let len = len as i64;
    let rem = ((raw % len) + len) % len;
    if rem * 2 > len {
        rem - len
    } else {
        rem
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(w: usize, h: usize) -> GridSpec {
        GridSpec::toroid(w, h).unwrap()
    }

    #[test]
    fn wraparound_distance_examples() {
        let s = spec(20, 12);
        assert_eq!(toroidal_distance(GridCoord::new(0, 0), GridCoord::new(19, 0), &s), 1.0);
        let antipode = toroidal_distance(GridCoord::new(0, 0), GridCoord::new(10, 6), &s);
        assert!((antipode - (136.0f64).sqrt()).abs() < 1e-12);
        assert!((antipode - 11.6619).abs() < 1e-4);
    }

    #[test]
    fn planar_distance_ignores_wrap() {
        let s = GridSpec::new(20, 12, Topology::Planar).unwrap();
        assert_eq!(s.distance(GridCoord::new(0, 0), GridCoord::new(19, 0)), 19.0);
    }

    #[test]
    fn grid_index_round_trips() {
        let s = spec(7, 5);
        for i in 0..s.n_nodes() {
            assert_eq!(s.index(s.coord(i)), i);
            assert!(s.contains(s.coord(i)));
        }
        assert_eq!(s.coord(0), GridCoord::new(0, 0));
        assert_eq!(s.coord(7), GridCoord::new(0, 1));
    }

    #[test]
    fn coord_ordering_is_row_major() {
        let mut coords = vec![
            GridCoord::new(5, 5),
            GridCoord::new(0, 0),
            GridCoord::new(0, 1),
            GridCoord::new(3, 0),
        ];
        coords.sort();
        assert_eq!(
            coords,
            vec![
                GridCoord::new(0, 0),
                GridCoord::new(3, 0),
                GridCoord::new(0, 1),
                GridCoord::new(5, 5),
            ]
        );
    }

    #[test]
    fn degenerate_grids_are_rejected() {
        assert!(GridSpec::toroid(1, 5).is_err());
        assert!(GridSpec::toroid(5, 1).is_err());
        assert!(GridSpec::toroid(2, 2).is_ok());
    }

    #[test]
    fn signed_delta_takes_shorter_way_and_positive_ties() {
        assert_eq!(signed_axis_delta(0, 19, 20, true), -1);
        assert_eq!(signed_axis_delta(19, 0, 20, true), 1);
        assert_eq!(signed_axis_delta(0, 10, 20, true), 10);
        assert_eq!(signed_axis_delta(10, 0, 20, true), 10);
        assert_eq!(signed_axis_delta(0, 19, 20, false), 19);
        assert_eq!(signed_axis_delta(3, 3, 20, true), 0);
    }

    #[test]
    fn triangle_inequality_holds_on_small_grids() {
        for (w, h) in [(4usize, 3usize), (5, 5), (6, 4)] {
            let s = spec(w, h);
            let coords: Vec<GridCoord> = (0..s.n_nodes()).map(|i| s.coord(i)).collect();
            for &a in &coords {
                for &b in &coords {
                    for &c in &coords {
                        let ab = toroidal_distance(a, b, &s);
                        let bc = toroidal_distance(b, c, &s);
                        let ac = toroidal_distance(a, c, &s);
                        assert!(ac <= ab + bc + 1e-12, "triangle violated on {w}x{h}");
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn toroidal_distance_is_symmetric_and_separating(
            w in 2usize..12, h in 2usize..12, seed in 0u64..10_000
        ) {
            use rand::Rng;
            use rand::SeedableRng;
            let s = spec(w, h);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = GridCoord::new(rng.random_range(0..w), rng.random_range(0..h));
            let b = GridCoord::new(rng.random_range(0..w), rng.random_range(0..h));
            prop_assert_eq!(toroidal_distance(a, b, &s), toroidal_distance(b, a, &s));
            prop_assert_eq!(toroidal_distance(a, b, &s) == 0.0, a == b);
        }

        #[test]
        fn signed_delta_magnitude_matches_wrap_distance(
            len in 2usize..30, from in 0usize..30, to in 0usize..30
        ) {
            let from = from % len;
            let to = to % len;
            let d = signed_axis_delta(from, to, len, true);
            let direct = from.abs_diff(to);
            let wrapped = direct.min(len - direct);
            prop_assert_eq!(d.unsigned_abs() as usize, wrapped);
        }
    }
}
