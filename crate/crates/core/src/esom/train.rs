//! Deterministic batch training.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Codebook, GridSpec};
use crate::cooccur::TermMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    pub epochs: usize,
    pub radius_start: f64,
    pub radius_end: f64,
    pub rate_start: f64,
    pub rate_end: f64,
    pub neighborhood: Neighborhood,
    pub seed: u64,
}

impl TrainingSchedule {
    /// Common-practice defaults: 10 epochs, radius min(w, h)/2 -> 1,
    /// rate 0.1 -> 0.01, Gaussian kernel.
    pub fn default_for(spec: &GridSpec) -> Self {
        TrainingSchedule {
            epochs: 10,
            radius_start: (spec.width.min(spec.height) as f64 / 2.0).max(1.0),
            radius_end: 1.0,
            rate_start: 0.1,
            rate_end: 0.01,
            neighborhood: Neighborhood::Gaussian,
            seed: 0,
        }
    }

    /// Rates may reach zero (a zero rate makes training the identity); radii
    /// stay >= 1 so the kernel always has support.
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("schedule needs at least one training epoch".into()));
        }
        let ordered = self.radius_start >= self.radius_end
            && self.radius_end >= 1.0
            && self.rate_start >= self.rate_end
            && self.rate_end >= 0.0;
        let finite = self.radius_start.is_finite()
            && self.radius_end.is_finite()
            && self.rate_start.is_finite()
            && self.rate_end.is_finite();
        if !ordered || !finite {
            return Err(Error::Config(format!(
                "schedule must satisfy radius_start >= radius_end >= 1 and \
                 rate_start >= rate_end >= 0, got radius {} -> {}, rate {} -> {}",
                self.radius_start, self.radius_end, self.rate_start, self.rate_end
            )));
        }
        Ok(())
    }

    /// Stable 64-bit fingerprint of every schedule field; stored in trained
    /// codebook headers so artifacts are traceable to their schedule.
    pub fn hash64(&self) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update(b"schedule-v1");
        hasher.update((self.epochs as u64).to_le_bytes());
        for v in [self.radius_start, self.radius_end, self.rate_start, self.rate_end] {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hasher.update(match self.neighborhood {
            Neighborhood::Gaussian => [0u8],
        });
        hasher.update(self.seed.to_le_bytes());
        let digest = hasher.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("digest is at least 8 bytes"))
    }

    fn at(&self, epoch: usize) -> (f64, f64) {
        let t = if self.epochs > 1 {
            epoch as f64 / (self.epochs - 1) as f64
        } else {
            0.0
        };
        (
            self.radius_start + t * (self.radius_end - self.radius_start),
            self.rate_start + t * (self.rate_end - self.rate_start),
        )
    }
}

/// Batch training: per epoch, (1) assign every term vector to its BMU,
/// (2) move each node toward the kernel-weighted mean of the assigned
/// vectors, blended by the current learning rate. Radius and rate
/// interpolate linearly from the first epoch to the last.
///
/// Nodes with no support under the kernel keep their weights. The kernel is
/// Gaussian, exp(-d^2 / (2 sigma^2)) with sigma = current radius, truncated
/// at grid distance 3 sigma.
pub fn train(codebook: &Codebook, data: &TermMatrix, schedule: &TrainingSchedule) -> Result<Codebook> {
    schedule.validate()?;
    if data.dim() != codebook.dim() {
        return Err(Error::Input(format!(
            "term vectors have dimension {}, codebook expects {}",
            data.dim(),
            codebook.dim()
        )));
    }
    if data.rows().iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("term matrix contains non-finite values".into()));
    }

    let spec = *codebook.spec();
    let dim = codebook.dim();
    let n_nodes = codebook.n_nodes();
    let mut weights = codebook.weights().to_vec();

    for epoch in 0..schedule.epochs {
        let (sigma, rate) = schedule.at(epoch);
        if rate == 0.0 {
            continue;
        }

        // Parallel BMU search; read-only on the weights.
        let bmus: Vec<usize> = (0..data.m())
            .into_par_iter()
            .map(|i| find_bmu_in(&weights, n_nodes, dim, data.row(i)).0)
            .collect();

        // Per-BMU vector sums, accumulated in term order.
        let mut hit_nodes: Vec<usize> = Vec::new();
        let mut sums: std::collections::HashMap<usize, (Vec<f64>, f64)> = std::collections::HashMap::new();
        for (i, &b) in bmus.iter().enumerate() {
            let entry = sums.entry(b).or_insert_with(|| {
                hit_nodes.push(b);
                (vec![0.0; dim], 0.0)
            });
            for (acc, v) in entry.0.iter_mut().zip(data.row(i)) {
                *acc += v;
            }
            entry.1 += 1.0;
        }
        hit_nodes.sort_unstable();
        let hits: Vec<(usize, &(Vec<f64>, f64))> =
            hit_nodes.iter().map(|b| (*b, &sums[b])).collect();

        let cutoff = 3.0 * sigma;
        let inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);

        // Parallel over nodes; each node folds the hit list in a fixed
        // order, so results do not depend on the thread count.
        let mut next = vec![0.0; n_nodes * dim];
        next.par_chunks_mut(dim).enumerate().for_each(|(node, out)| {
            let here = spec.coord(node);
            let mut numer = vec![0.0; dim];
            let mut denom = 0.0;
            for &(hit, payload) in &hits {
                let d = spec.distance(here, spec.coord(hit));
                if d > cutoff {
                    continue;
                }
                let k = (-d * d * inv_two_sigma_sq).exp();
                for (acc, s) in numer.iter_mut().zip(&payload.0) {
                    *acc += k * s;
                }
                denom += k * payload.1;
            }
            let old = &weights[node * dim..(node + 1) * dim];
            if denom > 0.0 {
                for j in 0..dim {
                    let target = numer[j] / denom;
                    out[j] = old[j] + rate * (target - old[j]);
                }
            } else {
                out.copy_from_slice(old);
            }
        });
        weights = next;
    }

    codebook.replace_weights(weights, schedule.hash64())
}

/// BMU scan over a raw weight buffer: strict minimum in row-major order, so
/// exact ties resolve to the smallest (row, col).
pub(super) fn find_bmu_in(weights: &[f64], n_nodes: usize, dim: usize, vector: &[f64]) -> (usize, f64) {
    debug_assert_eq!(vector.len(), dim);
    let mut best = 0usize;
    let mut best_d2 = f64::INFINITY;
    for node in 0..n_nodes {
        let w = &weights[node * dim..(node + 1) * dim];
        let mut d2 = 0.0;
        for j in 0..dim {
            let diff = w[j] - vector[j];
            d2 += diff * diff;
        }
        if d2 < best_d2 {
            best = node;
            best_d2 = d2;
        }
    }
    (best, best_d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::esom::{pca_initialize, GridCoord, Topology};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: Vec<Vec<f64>>) -> TermMatrix {
        let dim = rows[0].len();
        let terms = (0..rows.len()).map(|i| format!("t{i:03}")).collect();
        TermMatrix::new(terms, rows.into_iter().flatten().collect(), dim).unwrap()
    }

    fn random_matrix(seed: u64, m: usize, n: usize) -> TermMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        matrix(
            (0..m)
                .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        )
    }

    fn quantization_error(weights: &[f64], n_nodes: usize, dim: usize, data: &TermMatrix) -> f64 {
        let total: f64 = (0..data.m())
            .map(|i| find_bmu_in(weights, n_nodes, dim, data.row(i)).1.sqrt())
            .sum();
        total / data.m() as f64
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let data = random_matrix(5, 12, 6);
        let spec = GridSpec::new(5, 4, Topology::Toroid).unwrap();
        let cb = pca_initialize(&data, &spec, 9).unwrap();
        let mut schedule = TrainingSchedule::default_for(&spec);
        schedule.rate_start = 0.0;
        schedule.rate_end = 0.0;
        let out = train(&cb, &data, &schedule).unwrap();
        assert_eq!(out.weights(), cb.weights());
    }

    #[test]
    fn single_vector_becomes_a_fixed_point() {
        let data = matrix(vec![vec![0.3, -0.7, 0.1, 0.9]]);
        let spec = GridSpec::new(4, 3, Topology::Toroid).unwrap();
        let seeded: Vec<f64> = (0..spec.n_nodes() * 4).map(|i| (i as f64 * 0.37).sin()).collect();
        let cb = Codebook::new(spec, 4, seeded, 0).unwrap();
        let schedule = TrainingSchedule {
            epochs: 60,
            radius_start: 1.5,
            radius_end: 1.0,
            rate_start: 0.5,
            rate_end: 0.5,
            neighborhood: Neighborhood::Gaussian,
            seed: 0,
        };
        let out = train(&cb, &data, &schedule).unwrap();
        let (bmu, d2) = find_bmu_in(out.weights(), out.n_nodes(), 4, data.row(0));
        assert!(d2.sqrt() < 1e-6, "bmu {bmu} still {} away", d2.sqrt());
    }

    #[test]
    fn full_schedule_beats_first_epoch_quantization_error() {
        // Fixtures start from random-weight codebooks: the map has real
        // distance to cover, so the schedule must make net progress.
        for seed in [17u64, 18, 19, 20] {
            let data = random_matrix(seed, 40, 8);
            let spec = GridSpec::new(8, 6, Topology::Toroid).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
            let weights: Vec<f64> = (0..spec.n_nodes() * 8)
                .map(|_| rng.random_range(-2.0..2.0))
                .collect();
            let cb = Codebook::new(spec, 8, weights, 0).unwrap();
            let schedule = TrainingSchedule::default_for(&spec);
            let mut first_only = schedule;
            first_only.epochs = 1;
            let after_first = train(&cb, &data, &first_only).unwrap();
            let after_all = train(&cb, &data, &schedule).unwrap();
            let qe_init = quantization_error(cb.weights(), cb.n_nodes(), 8, &data);
            let qe_first = quantization_error(after_first.weights(), cb.n_nodes(), 8, &data);
            let qe_final = quantization_error(after_all.weights(), cb.n_nodes(), 8, &data);
            assert!(
                qe_final <= qe_first && qe_final <= qe_init,
                "seed {seed}: qe init {qe_init} -> first {qe_first} -> final {qe_final}"
            );
            assert_eq!(after_all.schedule_hash(), schedule.hash64());
        }
    }

    #[test]
    fn training_is_deterministic_across_runs() {
        let data = random_matrix(23, 30, 10);
        let spec = GridSpec::new(7, 5, Topology::Toroid).unwrap();
        let cb = pca_initialize(&data, &spec, 1).unwrap();
        let schedule = TrainingSchedule::default_for(&spec);
        let a = train(&cb, &data, &schedule).unwrap();
        let b = train(&cb, &data, &schedule).unwrap();
        assert_eq!(a.weights(), b.weights());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let data = random_matrix(31, 25, 6);
        let spec = GridSpec::new(6, 4, Topology::Toroid).unwrap();
        let cb = pca_initialize(&data, &spec, 2).unwrap();
        let schedule = TrainingSchedule::default_for(&spec);
        let wide = train(&cb, &data, &schedule).unwrap();
        let narrow = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| train(&cb, &data, &schedule).unwrap());
        assert_eq!(wide.weights(), narrow.weights());
    }

    #[test]
    fn dimension_mismatch_and_nan_are_input_errors() {
        let data = random_matrix(7, 10, 5);
        let spec = GridSpec::new(4, 3, Topology::Toroid).unwrap();
        let cb = Codebook::new(spec, 6, vec![0.1; spec.n_nodes() * 6], 0).unwrap();
        assert!(matches!(train(&cb, &data, &TrainingSchedule::default_for(&spec)), Err(Error::Input(_))));

        let cb5 = Codebook::new(spec, 5, vec![0.1; spec.n_nodes() * 5], 0).unwrap();
        let mut bad_rows: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64; 5]).collect();
        bad_rows[1][2] = f64::NAN;
        let bad = TermMatrix::new(
            (0..3).map(|i| format!("t{i}")).collect(),
            bad_rows.into_iter().flatten().collect(),
            5,
        )
        .unwrap();
        assert!(matches!(train(&cb5, &bad, &TrainingSchedule::default_for(&spec)), Err(Error::Input(_))));
    }

    #[test]
    fn invalid_schedules_are_config_errors() {
        let spec = GridSpec::new(4, 3, Topology::Toroid).unwrap();
        let mut s = TrainingSchedule::default_for(&spec);
        s.radius_end = 0.5;
        assert!(s.validate().is_err());
        let mut s = TrainingSchedule::default_for(&spec);
        s.rate_end = 0.2;
        assert!(s.validate().is_err());
        let mut s = TrainingSchedule::default_for(&spec);
        s.epochs = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn schedule_hash_tracks_every_field() {
        let spec = GridSpec::new(4, 3, Topology::Toroid).unwrap();
        let base = TrainingSchedule::default_for(&spec);
        let mut variants = Vec::new();
        let mut s = base;
        s.epochs = 11;
        variants.push(s);
        let mut s = base;
        s.radius_start = 3.0;
        variants.push(s);
        let mut s = base;
        s.rate_end = 0.005;
        variants.push(s);
        let mut s = base;
        s.seed = 1;
        variants.push(s);
        for v in variants {
            assert_ne!(v.hash64(), base.hash64());
        }
        assert_eq!(base.hash64(), base.hash64());
    }

    #[test]
    fn separated_clusters_land_on_separated_adjacent_patches() {
        // Three tight, mutually orthogonal clusters.
        let mut rows = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for c in 0..3 {
            for _ in 0..7 {
                let mut v = vec![0.0; 9];
                for j in 0..3 {
                    v[c * 3 + j] = 1.0 + rng.random_range(-0.05..0.05);
                }
                rows.push(v);
            }
        }
        let data = matrix(rows);
        let spec = GridSpec::new(10, 6, Topology::Toroid).unwrap();
        let cb = pca_initialize(&data, &spec, 4).unwrap();
        let out = train(&cb, &data, &TrainingSchedule::default_for(&spec)).unwrap();
        let bmus: Vec<GridCoord> = (0..data.m())
            .map(|i| spec.coord(find_bmu_in(out.weights(), out.n_nodes(), 9, data.row(i)).0))
            .collect();
        // Members of one cluster sit within a tight patch; different
        // clusters sit apart.
        for c in 0..3 {
            let members = &bmus[c * 7..(c + 1) * 7];
            for pair in members.windows(2) {
                assert!(spec.distance(pair[0], pair[1]) <= 2.0, "cluster {c} scattered");
            }
        }
        let centers: Vec<GridCoord> = (0..3).map(|c| bmus[c * 7]).collect();
        assert!(spec.distance(centers[0], centers[1]) > 2.0);
        assert!(spec.distance(centers[0], centers[2]) > 2.0);
        assert!(spec.distance(centers[1], centers[2]) > 2.0);
    }
}
