//! Affinity propagation over a dense similarity matrix.
//!
//! Damped responsibility/availability message passing. Exemplars are the
//! points whose self-availability plus self-responsibility ends positive;
//! every other point joins its most similar exemplar. All argmax scans
//! resolve ties toward the lowest index, so runs are deterministic.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Self-similarity assigned to every point before message passing. Higher
/// values produce more clusters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preference {
    /// Median of the off-diagonal similarities.
    Median,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffinityParams {
    /// Message damping factor, in [0.5, 1).
    pub damping: f64,
    pub max_iter: usize,
    /// Stop once the exemplar set has held steady this many iterations.
    pub convergence_iter: usize,
    pub preference: Preference,
}

impl Default for AffinityParams {
    fn default() -> Self {
        AffinityParams {
            damping: 0.9,
            max_iter: 1000,
            convergence_iter: 50,
            preference: Preference::Median,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// Cluster label per point. Labels index into `exemplars`.
    pub labels: Vec<usize>,
    /// Exemplar point indices, ascending. `labels[exemplars[k]] == k`.
    pub exemplars: Vec<usize>,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Runs affinity propagation on an `n` x `n` row-major similarity matrix.
/// The diagonal is ignored and replaced by the preference.
pub fn affinity_propagation(
    similarity: &[f64],
    n: usize,
    params: &AffinityParams,
) -> Result<ClusterAssignment> {
    if n == 0 {
        return Err(Error::Input("affinity propagation needs at least one point".into()));
    }
    if similarity.len() != n * n {
        return Err(Error::Input(format!(
            "similarity matrix must be {n}x{n}, got {} entries",
            similarity.len()
        )));
    }
    if similarity.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("similarity matrix contains non-finite entries".into()));
    }
    if !(0.5..1.0).contains(&params.damping) {
        return Err(Error::Input(format!(
            "damping must lie in [0.5, 1), got {}",
            params.damping
        )));
    }
    if params.max_iter == 0 || params.convergence_iter == 0 {
        return Err(Error::Input("max_iter and convergence_iter must be positive".into()));
    }
    if n == 1 {
        return Ok(ClusterAssignment {
            labels: vec![0],
            exemplars: vec![0],
            iterations_used: 0,
            converged: true,
        });
    }

    let preference = match params.preference {
        Preference::Value(p) if !p.is_finite() => {
            return Err(Error::Input("preference must be finite".into()));
        }
        Preference::Value(p) => p,
        Preference::Median => median_off_diagonal(similarity, n),
    };
    let mut s = similarity.to_vec();
    for k in 0..n {
        s[k * n + k] = preference;
    }

    let damping = params.damping;
    let mut r = vec![0.0; n * n];
    let mut a = vec![0.0; n * n];
    let mut indicator = vec![false; n];
    let mut stable_iters = 0usize;
    let mut iterations_used = params.max_iter;
    let mut converged = false;

    for it in 1..=params.max_iter {
        // r(i,k) = s(i,k) - max over k' != k of (a(i,k') + s(i,k'))
        r.par_chunks_mut(n).enumerate().for_each(|(i, r_row)| {
            let a_row = &a[i * n..(i + 1) * n];
            let s_row = &s[i * n..(i + 1) * n];
            let mut best = f64::NEG_INFINITY;
            let mut best_k = 0usize;
            let mut second = f64::NEG_INFINITY;
            for (k, (av, sv)) in a_row.iter().zip(s_row).enumerate() {
                let v = av + sv;
                if v > best {
                    second = best;
                    best = v;
                    best_k = k;
                } else if v > second {
                    second = v;
                }
            }
            for (k, (rv, sv)) in r_row.iter_mut().zip(s_row).enumerate() {
                let max_other = if k == best_k { second } else { best };
                *rv = damping * *rv + (1.0 - damping) * (sv - max_other);
            }
        });

        // colsum(k) = r(k,k) + sum over i != k of max(0, r(i,k))
        let mut colsum = vec![0.0; n];
        for i in 0..n {
            let r_row = &r[i * n..(i + 1) * n];
            for (cs, rv) in colsum.iter_mut().zip(r_row) {
                *cs += rv.max(0.0);
            }
        }
        for (k, cs) in colsum.iter_mut().enumerate() {
            let rkk = r[k * n + k];
            *cs += rkk - rkk.max(0.0);
        }

        // a(i,k) = min(0, colsum(k) - max(0, r(i,k))), self term unclipped
        a.par_chunks_mut(n).enumerate().for_each(|(i, a_row)| {
            let r_row = &r[i * n..(i + 1) * n];
            for (k, (av, rv)) in a_row.iter_mut().zip(r_row).enumerate() {
                let anew = if i == k {
                    colsum[k] - rv
                } else {
                    (colsum[k] - rv.max(0.0)).min(0.0)
                };
                *av = damping * *av + (1.0 - damping) * anew;
            }
        });

        let new_indicator: Vec<bool> =
            (0..n).map(|k| a[k * n + k] + r[k * n + k] > 0.0).collect();
        if new_indicator == indicator {
            stable_iters += 1;
        } else {
            stable_iters = 1;
            indicator = new_indicator;
        }
        if stable_iters >= params.convergence_iter && indicator.iter().any(|&e| e) {
            iterations_used = it;
            converged = true;
            break;
        }
    }

    let mut exemplars: Vec<usize> = (0..n)
        .filter(|&k| a[k * n + k] + r[k * n + k] > 0.0)
        .collect();
    if exemplars.is_empty() {
        // Degenerate run, e.g. all points identical: nothing self-affirms.
        // Collapse to one cluster around the strongest diagonal.
        let best = (0..n)
            .max_by(|&x, &y| {
                let dx = a[x * n + x] + r[x * n + x];
                let dy = a[y * n + y] + r[y * n + y];
                dx.partial_cmp(&dy).unwrap().then(std::cmp::Ordering::Greater)
            })
            .unwrap();
        return Ok(ClusterAssignment {
            labels: vec![0; n],
            exemplars: vec![best],
            iterations_used,
            converged,
        });
    }

    refine_exemplars(&s, n, &mut exemplars);
    exemplars.sort_unstable();
    exemplars.dedup();
    let labels = assign_labels(&s, n, &exemplars);
    Ok(ClusterAssignment { labels, exemplars, iterations_used, converged })
}

fn median_off_diagonal(s: &[f64], n: usize) -> f64 {
    let mut vals: Vec<f64> = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for k in 0..n {
            if i != k {
                vals.push(s[i * n + k]);
            }
        }
    }
    vals.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let m = vals.len();
    if m % 2 == 1 {
        vals[m / 2]
    } else {
        0.5 * (vals[m / 2 - 1] + vals[m / 2])
    }
}

/// Re-picks each cluster's exemplar as the member with the largest summed
/// similarity to the rest of its cluster.
fn refine_exemplars(s: &[f64], n: usize, exemplars: &mut [usize]) {
    let mut c = assign_labels(s, n, exemplars);
    for (k, &e) in exemplars.iter().enumerate() {
        c[e] = k;
    }
    for k in 0..exemplars.len() {
        let members: Vec<usize> = (0..n).filter(|&i| c[i] == k).collect();
        let mut best = members[0];
        let mut best_v = f64::NEG_INFINITY;
        for &j in &members {
            let v: f64 = members.iter().map(|&i| s[i * n + j]).sum();
            if v > best_v {
                best_v = v;
                best = j;
            }
        }
        exemplars[k] = best;
    }
}

fn assign_labels(s: &[f64], n: usize, exemplars: &[usize]) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n)
        .map(|i| {
            let mut best = 0usize;
            let mut best_v = f64::NEG_INFINITY;
            for (k, &e) in exemplars.iter().enumerate() {
                let v = s[i * n + e];
                if v > best_v {
                    best_v = v;
                    best = k;
                }
            }
            best
        })
        .collect();
    for (k, &e) in exemplars.iter().enumerate() {
        labels[e] = k;
    }
    labels
}
