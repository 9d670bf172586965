//! Codebook initialization from the top-2 principal components of the term
//! vectors, computed with a seeded randomized SVD.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Codebook, GridSpec};
use crate::cooccur::TermMatrix;
use crate::error::{Error, Result};

const OVERSAMPLING: usize = 10;
const POWER_ITERATIONS: usize = 2;

/// Spans the codebook across the data's top-2 principal plane: node (c, r) =
/// mean + alpha(c) * pc1 + beta(r) * pc2, with alpha and beta running
/// linearly over +-1 standard deviation along each component.
///
/// The sketch is seeded, so equal seeds give identical codebooks.
pub fn pca_initialize(data: &TermMatrix, spec: &GridSpec, seed: u64) -> Result<Codebook> {
    let m = data.m();
    let n = data.dim();
    if m < 2 || all_rows_equal(data) {
        return Err(Error::Init(
            "term vectors have no spread (fewer than 2 distinct rows); \
             principal components are undefined, fall back to random initialization"
            .into(),
        ));
    }
    if data.rows().iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("term matrix contains non-finite values".into()));
    }

    let mean: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| data.row(i)[j]).sum::<f64>() / m as f64)
        .collect();
    let centered = DMatrix::from_fn(m, n, |i, j| data.row(i)[j] - mean[j]);

    let (components, sigmas) = randomized_top2(&centered, seed);
    let std1 = sigmas.0 / ((m - 1) as f64).sqrt();
    let std2 = sigmas.1 / ((m - 1) as f64).sqrt();
    let pc1 = &components.0;
    let pc2 = &components.1;

    let w = spec.width;
    let h = spec.height;
    let mut weights = vec![0.0; spec.n_nodes() * n];
    for r in 0..h {
        let beta = lerp(-std2, std2, r as f64 / (h - 1) as f64);
        for c in 0..w {
            let alpha = lerp(-std1, std1, c as f64 / (w - 1) as f64);
            let node = &mut weights[(r * w + c) * n..(r * w + c + 1) * n];
            for j in 0..n {
                node[j] = mean[j] + alpha * pc1[j] + beta * pc2[j];
            }
        }
    }
    Codebook::new(*spec, n, weights, 0)
}

/// Seeded uniform codebook within the data's per-dimension bounding box.
/// The fallback when the principal plane is undefined (identical rows).
pub fn random_initialize(data: &TermMatrix, spec: &GridSpec, seed: u64) -> Result<Codebook> {
    if data.rows().iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("term matrix contains non-finite values".into()));
    }
    let n = data.dim();
    let mut lo = data.row(0).to_vec();
    let mut hi = lo.clone();
    for i in 1..data.m() {
        for (j, &x) in data.row(i).iter().enumerate() {
            lo[j] = lo[j].min(x);
            hi[j] = hi[j].max(x);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..spec.n_nodes() * n)
        .map(|k| {
            let j = k % n;
            // Always draw, so the stream layout is independent of the data.
            let u: f64 = rng.random();
            lo[j] + u * (hi[j] - lo[j])
        })
        .collect();
    Codebook::new(*spec, n, weights, 0)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

fn all_rows_equal(data: &TermMatrix) -> bool {
    let first = data.row(0);
    (1..data.m()).all(|i| data.row(i) == first)
}

/// Rank-2 randomized SVD: Gaussian sketch with oversampling, power
/// iterations with QR re-orthonormalization, then an exact SVD of the small
/// projected matrix. Returns the top-2 right singular vectors (sign-fixed so
/// the largest-magnitude entry is positive) and their singular values.
fn randomized_top2(x: &DMatrix<f64>, seed: u64) -> ((Vec<f64>, Vec<f64>), (f64, f64)) {
    let m = x.nrows();
    let n = x.ncols();
    let l = (2 + OVERSAMPLING).min(n).min(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(n, l, |_, _| standard_normal(&mut rng));

    let mut q = orthonormal_range(&(x * &omega));
    for _ in 0..POWER_ITERATIONS {
        let z = orthonormal_range(&(x.transpose() * &q));
        q = orthonormal_range(&(x * &z));
    }
    let b = q.transpose() * x;
    let svd = b.svd(false, true);
    let v_t = svd.v_t.expect("svd of the projected matrix computes V^T");

    let take = |k: usize| -> (Vec<f64>, f64) {
        if k < v_t.nrows() && k < svd.singular_values.len() {
            let mut v: Vec<f64> = v_t.row(k).iter().copied().collect();
            fix_sign(&mut v);
            (v, svd.singular_values[k])
        } else {
            (vec![0.0; n], 0.0)
        }
    };
    let (pc1, s1) = take(0);
    let (pc2, s2) = take(1);
    ((pc1, pc2), (s1, s2))
}

fn orthonormal_range(y: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = y.clone().qr();
    qr.q()
}

/// Flips the vector so its largest-magnitude entry is positive, removing the
/// sign ambiguity of singular vectors.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Box-Muller standard normal draw.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::esom::Topology;

    fn matrix(rows: Vec<Vec<f64>>) -> TermMatrix {
        let dim = rows[0].len();
        let terms = (0..rows.len()).map(|i| format!("t{i}")).collect();
        TermMatrix::new(terms, rows.into_iter().flatten().collect(), dim).unwrap()
    }

    fn plane_fixture(seed: u64, m: usize, n: usize) -> TermMatrix {
        // Points on a fixed 2-d plane embedded in n dims, plus an offset.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..n).map(|j| if j % 3 == 0 { 1.0 } else { 0.2 }).collect();
        let v: Vec<f64> = (0..n).map(|j| if j % 2 == 0 { -0.5 } else { 1.0 }).collect();
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                let a: f64 = rng.random_range(-2.0..2.0);
                let b: f64 = rng.random_range(-2.0..2.0);
                (0..n).map(|j| 0.7 + a * u[j] + b * v[j]).collect()
            })
            .collect();
        matrix(rows)
    }

    #[test]
    fn rank2_data_reconstructs_on_its_plane() {
        let data = plane_fixture(11, 40, 9);
        let spec = GridSpec::new(8, 5, Topology::Toroid).unwrap();
        let cb = pca_initialize(&data, &spec, 7).unwrap();

        // Every codebook vector minus the mean must lie in span{u', v'} =
        // the data's plane. Check via projection residual onto the plane
        // spanned by two centered data rows (independent directions).
        let m = data.m();
        let n = data.dim();
        let mean: Vec<f64> = (0..n)
            .map(|j| (0..m).map(|i| data.row(i)[j]).sum::<f64>() / m as f64)
            .collect();
        let a: Vec<f64> = (0..n).map(|j| data.row(0)[j] - mean[j]).collect();
        let b: Vec<f64> = (0..n).map(|j| data.row(1)[j] - mean[j]).collect();
        let basis = orthonormal_range(&DMatrix::from_fn(n, 2, |i, k| if k == 0 { a[i] } else { b[i] }));
        for node in 0..cb.n_nodes() {
            let w = cb.node_weight(node);
            let centered: Vec<f64> = (0..n).map(|j| w[j] - mean[j]).collect();
            let mut residual_sq = 0.0;
            let mut proj = vec![0.0; n];
            for k in 0..basis.ncols() {
                let dot: f64 = (0..n).map(|j| centered[j] * basis[(j, k)]).sum();
                for j in 0..n {
                    proj[j] += dot * basis[(j, k)];
                }
            }
            for j in 0..n {
                residual_sq += (centered[j] - proj[j]).powi(2);
            }
            assert!(residual_sq.sqrt() < 1e-8, "node {node} off-plane by {}", residual_sq.sqrt());
        }
    }

    #[test]
    fn same_seed_identical_codebooks() {
        let data = plane_fixture(3, 25, 7);
        let spec = GridSpec::new(6, 4, Topology::Toroid).unwrap();
        let a = pca_initialize(&data, &spec, 42).unwrap();
        let b = pca_initialize(&data, &spec, 42).unwrap();
        assert_eq!(a, b);
        let c = pca_initialize(&data, &spec, 43).unwrap();
        assert_ne!(a.weights(), c.weights());
    }

    #[test]
    fn identical_rows_are_an_initialization_error() {
        let data = matrix(vec![vec![1.0, 2.0, 3.0]; 5]);
        let spec = GridSpec::new(4, 3, Topology::Toroid).unwrap();
        match pca_initialize(&data, &spec, 0) {
            Err(Error::Init(msg)) => assert!(msg.contains("random init")),
            other => panic!("expected init error, got {other:?}"),
        }
    }

    #[test]
    fn random_initialize_stays_in_data_bounding_box() {
        let data = matrix(vec![
            vec![0.0, -2.0, 5.0],
            vec![1.0, 3.0, 5.0],
            vec![0.5, 0.0, 5.0],
        ]);
        let spec = GridSpec::new(5, 4, Topology::Toroid).unwrap();
        let cb = random_initialize(&data, &spec, 9).unwrap();
        for node in 0..spec.n_nodes() {
            let w = cb.node_weight(node);
            assert!((0.0..=1.0).contains(&w[0]));
            assert!((-2.0..=3.0).contains(&w[1]));
            // Degenerate dimension collapses to the constant.
            assert_eq!(w[2], 5.0);
        }
        assert_eq!(cb, random_initialize(&data, &spec, 9).unwrap());
        assert_ne!(cb.weights(), random_initialize(&data, &spec, 10).unwrap().weights());
        // Works on the inputs pca_initialize rejects.
        let flat = matrix(vec![vec![1.0, 2.0]; 4]);
        assert!(random_initialize(&flat, &spec, 0).is_ok());
    }

    #[test]
    fn corners_span_both_principal_directions() {
        // Data stretched mostly along one axis: column 0 variance dominates.
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64) - 14.5, ((i % 3) as f64) * 0.1, 0.0])
            .collect();
        let data = matrix(rows);
        let spec = GridSpec::new(9, 5, Topology::Toroid).unwrap();
        let cb = pca_initialize(&data, &spec, 1).unwrap();
        // Moving along columns must change coordinate 0 far more than
        // moving along rows does.
        let left = cb.weight_at(super::super::GridCoord::new(0, 2))[0];
        let right = cb.weight_at(super::super::GridCoord::new(8, 2))[0];
        let top = cb.weight_at(super::super::GridCoord::new(4, 0))[0];
        let bottom = cb.weight_at(super::super::GridCoord::new(4, 4))[0];
        assert!((right - left).abs() > 10.0 * (bottom - top).abs());
        // And the column sweep covers 2 standard deviations along PC1.
        let std0 = {
            let mean = 0.0;
            let var: f64 = (0..30).map(|i| ((i as f64) - 14.5 - mean).powi(2)).sum::<f64>() / 29.0;
            var.sqrt()
        };
        assert!(((right - left).abs() - 2.0 * std0).abs() < 0.2 * std0);
    }
}
