//! Term importance per epoch (PageRank over the co-occurrence graph) and
//! cross-epoch rank fusion for anchor selection.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cooccur::CooccurrenceGraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageRankScores {
    pub terms: Vec<String>,
    pub scores: Vec<f64>,
    pub damping: f64,
    pub iterations_used: usize,
}

/// Power iteration on the row-normalized weighted transition matrix.
/// Transition probability out of a term is proportional to edge weight
/// (diagonal self-counts excluded); dangling terms redistribute uniformly.
/// Converges when the L1 change between iterates drops below `tol`.
pub fn pagerank(
    graph: &CooccurrenceGraph,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PageRankScores> {
    pagerank_observed(graph, damping, tol, max_iter, |_, _| {})
}

/// [`pagerank`] with a per-iteration observer `(iteration, scores)`, used to
/// assert invariants on intermediate iterates.
pub fn pagerank_observed(
    graph: &CooccurrenceGraph,
    damping: f64,
    tol: f64,
    max_iter: usize,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<PageRankScores> {
    if !(0.0..1.0).contains(&damping) || damping == 0.0 {
        return Err(Error::Input(format!("damping must lie in (0, 1), got {damping}")));
    }
    if tol <= 0.0 {
        return Err(Error::Input(format!("tolerance must be positive, got {tol}")));
    }
    let n = graph.n();
    if n == 0 {
        return Err(Error::Input("pagerank needs a non-empty graph".into()));
    }

    let mut out_sum = vec![0.0; n];
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            if j != i {
                sum += graph.weight(i, j);
            }
        }
        out_sum[i] = sum;
    }

    let uniform = 1.0 / n as f64;
    let teleport = (1.0 - damping) * uniform;
    let mut scores = vec![uniform; n];
    let mut next = vec![0.0; n];
    for iteration in 1..=max_iter {
        let mut dangling_mass = 0.0;
        for i in 0..n {
            if out_sum[i] == 0.0 {
                dangling_mass += scores[i];
            }
        }
        let base = teleport + damping * dangling_mass * uniform;
        next.fill(base);
        for i in 0..n {
            if out_sum[i] == 0.0 {
                continue;
            }
            let share = damping * scores[i] / out_sum[i];
            for j in 0..n {
                if j != i {
                    let w = graph.weight(i, j);
                    if w != 0.0 {
                        next[j] += share * w;
                    }
                }
            }
        }
        let delta: f64 = scores
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        std::mem::swap(&mut scores, &mut next);
        observe(iteration, &scores);
        if delta < tol {
            return Ok(PageRankScores {
                terms: graph.terms().to_vec(),
                scores,
                damping,
                iterations_used: iteration,
            });
        }
    }
    let last_delta: f64 = scores
        .iter()
        .zip(next.iter())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Err(Error::Convergence {
        iterations: max_iter,
        last_delta,
        last_iterate: scores,
    })
}

/// Terms ordered by descending score; exact score ties break
/// lexicographically so ranks are deterministic.
pub fn ranked_terms(scores: &PageRankScores) -> Vec<String> {
    let mut order: Vec<usize> = (0..scores.terms.len()).collect();
    order.sort_by(|&a, &b| {
        scores.scores[b]
            .partial_cmp(&scores.scores[a])
            .expect("pagerank scores are finite")
            .then_with(|| scores.terms[a].cmp(&scores.terms[b]))
    });
    order.into_iter().map(|i| scores.terms[i].clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSelection {
    pub anchor_term: String,
    pub fused_scores: BTreeMap<String, f64>,
    pub per_epoch_ranks: Vec<Vec<String>>,
}

/// Reciprocal rank fusion: fused(t) = sum over lists of 1/(k + rank(t)) with
/// 1-based ranks. Every list must rank the same term set. The anchor is the
/// fused argmax; ties break to the lexicographically smallest term.
pub fn reciprocal_rank_fusion(per_epoch_ranks: &[Vec<String>], k: f64) -> Result<AnchorSelection> {
    if per_epoch_ranks.is_empty() {
        return Err(Error::Input("rank fusion needs at least one rank list".into()));
    }
    if !(k > 0.0) {
        return Err(Error::Input(format!("rrf constant must be positive, got {k}")));
    }
    let universe: BTreeSet<&str> = per_epoch_ranks[0].iter().map(String::as_str).collect();
    if universe.is_empty() {
        return Err(Error::Input("rank lists must not be empty".into()));
    }
    if universe.len() != per_epoch_ranks[0].len() {
        return Err(Error::Input("rank list contains a duplicate term".into()));
    }
    let mut fused: BTreeMap<String, f64> = universe.iter().map(|t| (t.to_string(), 0.0)).collect();
    for (epoch, list) in per_epoch_ranks.iter().enumerate() {
        if list.len() != universe.len() {
            return Err(Error::Input(format!(
                "rank list for epoch {epoch} has {} terms, expected {}",
                list.len(),
                universe.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for (pos, term) in list.iter().enumerate() {
            let Some(score) = fused.get_mut(term.as_str()) else {
                return Err(Error::Input(format!(
                    "epoch {epoch} ranks unknown term {term:?}"
                )));
            };
            if !seen.insert(term.as_str()) {
                return Err(Error::Input(format!(
                    "epoch {epoch} ranks term {term:?} twice"
                )));
            }
            *score += 1.0 / (k + (pos + 1) as f64);
        }
    }
    let anchor_term = fused
        .iter()
        .max_by(|a, b| {
            a.1.partial_cmp(b.1)
                .expect("fused scores are finite")
                // BTreeMap iterates in ascending term order; prefer the
                // earlier term on ties by treating it as the max.
                .then(std::cmp::Ordering::Greater)
        })
        .map(|(t, _)| t.clone())
        .expect("fused map is non-empty");
    Ok(AnchorSelection {
        anchor_term,
        fused_scores: fused,
        per_epoch_ranks: per_epoch_ranks.to_vec(),
    })
}

/// CSV export of per-epoch scores: term, epoch, score, rank.
pub fn write_scores_csv(per_epoch: &[PageRankScores], w: impl Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Format(format!("writing score csv: {e}"));
    csv.write_record(["term", "epoch", "score", "rank"]).map_err(err)?;
    for (epoch, scores) in per_epoch.iter().enumerate() {
        let ranked = ranked_terms(scores);
        let rank_of: BTreeMap<&str, usize> = ranked
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i + 1))
            .collect();
        for (term, score) in scores.terms.iter().zip(&scores.scores) {
            csv.write_record([
                term.as_str(),
                &epoch.to_string(),
                &format!("{score:.12e}"),
                &rank_of[term.as_str()].to_string(),
            ])
            .map_err(err)?;
        }
    }
    csv.flush().map_err(|e| Error::io("<csv stream>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{ArtworkRecord, EpochCorpus, IndexLevel, SubjectPath};
    use crate::cooccur::build_graph;
    use proptest::prelude::*;

    fn graph_from(records: &[&[&str]], vocab: &[&str]) -> CooccurrenceGraph {
        let epoch = EpochCorpus {
            epoch_index: 0,
            year_range: (2000, 2000),
            records: records
                .iter()
                .enumerate()
                .map(|(i, terms)| ArtworkRecord {
                    record_id: format!("r{i}"),
                    acquisition_year: Some(2000),
                    subjects: terms
                        .iter()
                        .map(|t| SubjectPath {
                            level1: (*t).into(),
                            level2: None,
                            level3: None,
                        })
                        .collect(),
                })
                .collect(),
        };
        build_graph(&epoch, IndexLevel::Level1, &vocab.iter().map(|t| t.to_string()).collect())
    }

    #[test]
    fn complete_graph_scores_are_uniform() {
        let g = graph_from(&[&["a", "b", "c", "d", "e"]], &["a", "b", "c", "d", "e"]);
        let pr = pagerank(&g, 0.85, 1e-10, 10_000).unwrap();
        for s in &pr.scores {
            assert!((s - 0.2).abs() < 1e-9, "score {s}");
        }
    }

    #[test]
    fn two_node_edge_splits_evenly() {
        let g = graph_from(&[&["a", "b"]], &["a", "b"]);
        let pr = pagerank(&g, 0.85, 1e-10, 10_000).unwrap();
        assert!((pr.scores[0] - 0.5).abs() < 1e-12);
        assert!((pr.scores[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn scores_sum_to_one_every_iteration() {
        let g = graph_from(
            &[&["a", "b"], &["b", "c"], &["c", "d"], &["a"], &["e"]],
            &["a", "b", "c", "d", "e", "f"],
        );
        let pr = pagerank_observed(&g, 0.85, 1e-10, 10_000, |_, scores| {
            let sum: f64 = scores.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "iterate sum {sum}");
        })
        .unwrap();
        assert!(pr.scores.iter().all(|s| *s > 0.0));
    }

    #[test]
    fn disconnected_graphs_converge() {
        let g = graph_from(&[&["a", "b"], &["c", "d"]], &["a", "b", "c", "d", "e"]);
        let pr = pagerank(&g, 0.85, 1e-10, 10_000).unwrap();
        assert!(pr.iterations_used < 10_000);
        let sum: f64 = pr.scores.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exhausted_budget_returns_last_iterate() {
        let g = graph_from(&[&["a", "b"], &["b", "c"]], &["a", "b", "c"]);
        let err = pagerank(&g, 0.85, 1e-30, 3).unwrap_err();
        match err {
            Error::Convergence { iterations, last_iterate, .. } => {
                assert_eq!(iterations, 3);
                assert_eq!(last_iterate.len(), 3);
                let sum: f64 = last_iterate.iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let g = graph_from(&[&["a", "b"]], &["a", "b"]);
        assert!(pagerank(&g, 0.0, 1e-10, 100).is_err());
        assert!(pagerank(&g, 1.0, 1e-10, 100).is_err());
        assert!(pagerank(&g, 0.85, 0.0, 100).is_err());
    }

    #[test]
    fn ranking_breaks_score_ties_lexicographically() {
        let pr = PageRankScores {
            terms: vec!["b".into(), "a".into(), "c".into()],
            scores: vec![0.25, 0.25, 0.5],
            damping: 0.85,
            iterations_used: 1,
        };
        assert_eq!(ranked_terms(&pr), vec!["c", "a", "b"]);
    }

    #[test]
    fn rrf_frozen_two_list_example() {
        // a ranked 1 and 3, b ranked 2 and 2, k = 60.
        let lists = vec![
            vec!["a".to_string(), "b".to_string(), "c".to_string()],
            vec!["c".to_string(), "b".to_string(), "a".to_string()],
        ];
        let sel = reciprocal_rank_fusion(&lists, 60.0).unwrap();
        let fa = 1.0 / 61.0 + 1.0 / 63.0;
        let fb = 2.0 / 62.0;
        assert!((sel.fused_scores["a"] - fa).abs() < 1e-15);
        assert!((sel.fused_scores["b"] - fb).abs() < 1e-15);
        assert!(fa > fb);
        assert_eq!(sel.anchor_term, "a");
    }

    #[test]
    fn rrf_single_list_preserves_order() {
        let list = vec!["x".to_string(), "y".to_string(), "z".to_string()];
        let sel = reciprocal_rank_fusion(std::slice::from_ref(&list), 60.0).unwrap();
        let mut by_score: Vec<_> = sel.fused_scores.iter().collect();
        by_score.sort_by(|a, b| b.1.partial_cmp(a.1).unwrap());
        let fused_order: Vec<_> = by_score.into_iter().map(|(t, _)| t.clone()).collect();
        assert_eq!(fused_order, list);
        assert_eq!(sel.anchor_term, "x");
    }

    #[test]
    fn rrf_identical_lists_pick_the_common_top() {
        let list = vec!["m".to_string(), "n".to_string()];
        let sel = reciprocal_rank_fusion(&[list.clone(), list.clone(), list], 60.0).unwrap();
        assert_eq!(sel.anchor_term, "m");
    }

    #[test]
    fn rrf_rejects_mismatched_lists() {
        let lists = vec![
            vec!["a".to_string(), "b".to_string()],
            vec!["a".to_string(), "c".to_string()],
        ];
        assert!(reciprocal_rank_fusion(&lists, 60.0).is_err());
        let lists = vec![
            vec!["a".to_string(), "b".to_string()],
            vec!["a".to_string()],
        ];
        assert!(reciprocal_rank_fusion(&lists, 60.0).is_err());
        assert!(reciprocal_rank_fusion(&[], 60.0).is_err());
    }

    #[test]
    fn rrf_exact_ties_anchor_lexicographically_smallest() {
        let lists = vec![
            vec!["b".to_string(), "a".to_string()],
            vec!["a".to_string(), "b".to_string()],
        ];
        let sel = reciprocal_rank_fusion(&lists, 60.0).unwrap();
        assert_eq!(sel.anchor_term, "a");
    }

    #[test]
    fn csv_export_lists_every_term_with_rank() {
        let g = graph_from(&[&["a", "b"], &["b", "c"]], &["a", "b", "c"]);
        let pr = pagerank(&g, 0.85, 1e-10, 10_000).unwrap();
        let mut buf = Vec::new();
        write_scores_csv(&[pr.clone(), pr], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 2 * 3);
        assert_eq!(lines[0], "term,epoch,score,rank");
        assert!(lines.iter().skip(1).any(|l| l.starts_with("b,0,") && l.ends_with(",1")));
    }

    fn arb_weights(n: usize) -> impl Strategy<Value = Vec<u32>> {
        proptest::collection::vec(0u32..4, n * (n - 1) / 2)
    }

    fn graph_from_upper(n: usize, upper: &[u32]) -> CooccurrenceGraph {
        let terms: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        let mut weights = vec![0.0; n * n];
        let mut it = upper.iter();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = *it.next().unwrap() as f64;
                weights[i * n + j] = w;
                weights[j * n + i] = w;
            }
        }
        CooccurrenceGraph::new(terms, weights).unwrap()
    }

    proptest! {
        #[test]
        fn random_graphs_converge_with_unit_sum(upper in arb_weights(6)) {
            let g = graph_from_upper(6, &upper);
            let pr = pagerank(&g, 0.85, 1e-10, 10_000).unwrap();
            let sum: f64 = pr.scores.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(pr.scores.iter().all(|s| *s > 0.0));
        }

        #[test]
        fn permuting_labels_permutes_scores(upper in arb_weights(5), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let g = graph_from_upper(5, &upper);
            let pr = pagerank(&g, 0.85, 1e-12, 50_000).unwrap();

            let n = 5usize;
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            // Renamed terms keep their old neighborhoods under the new labels.
            let terms: Vec<String> = (0..n).map(|i| format!("t{}", perm[i])).collect();
            let mut weights = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    weights[i * n + j] = g.weight(i, j);
                }
            }
            let renamed = CooccurrenceGraph::new(terms.clone(), weights).unwrap();
            let pr2 = pagerank(&renamed, 0.85, 1e-12, 50_000).unwrap();
            for i in 0..n {
                let new_pos = renamed.index_of(&format!("t{}", perm[i])).unwrap();
                prop_assert!((pr.scores[i] - pr2.scores[new_pos]).abs() < 1e-9);
            }
        }

        #[test]
        fn rrf_anchor_survives_constant_tail(k_lists in 1usize..5, seed in 0u64..500) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let base: Vec<String> = (0..6).map(|i| format!("t{i}")).collect();
            let mut lists: Vec<Vec<String>> = Vec::new();
            for _ in 0..k_lists {
                let mut l = base.clone();
                l.shuffle(&mut rng);
                lists.push(l);
            }
            let sel = reciprocal_rank_fusion(&lists, 60.0).unwrap();
            // Append the same new terms below every list in the same order.
            let extended: Vec<Vec<String>> = lists
                .iter()
                .map(|l| {
                    let mut l = l.clone();
                    l.push("zz0".to_string());
                    l.push("zz1".to_string());
                    l
                })
                .collect();
            let sel2 = reciprocal_rank_fusion(&extended, 60.0).unwrap();
            prop_assert_eq!(sel.anchor_term, sel2.anchor_term);
        }
    }
}
