//! Deterministic synthetic corpora with a scripted split/merge schedule.
//!
//! The generator plants drift by steering co-occurrence profiles, not map
//! positions, so the whole downstream pipeline (graph, embedding, detection)
//! is exercised end to end:
//!
//! - Every tracked term co-occurs only with dedicated helper terms, never
//!   with another tracked term, so tracked profiles are controlled exactly.
//! - Unscripted tracked terms share one background helper pair; their rows
//!   are identical in every epoch, which pins them to a common map node.
//! - A scripted pair (a, b) shares a's helper pair while "together" (rows
//!   become bit-identical, forcing a shared best-matching unit) and moves b
//!   onto its own helper pair while "apart" (rows become orthogonal).
//! - Helper terms appear in every epoch so they stay in the persistent
//!   vocabulary, but they are not part of [`SyntheticCorpus::tracked_terms`]
//!   and are invisible to drift accounting.
//!
//! The seed shuffles record ids and ordering only; the co-occurrence counts
//! are a pure function of the script.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ArtworkRecord, EpochCorpus, EpochSpec, SubjectPath};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ScriptedKind {
    Split,
    Merge,
}

/// One scripted event: the tracked pair changes co-location across the
/// transition from epoch `transition` to `transition + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScriptedEvent {
    pub kind: ScriptedKind,
    pub pair: (usize, usize),
    pub transition: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_terms: usize,
    pub n_epochs: usize,
    pub planted: Vec<ScriptedEvent>,
    /// Copies of each record group per epoch.
    pub records_per_group: usize,
}

impl SyntheticSpec {
    pub fn new(seed: u64, n_terms: usize, n_epochs: usize, planted: Vec<ScriptedEvent>) -> Self {
        SyntheticSpec {
            seed,
            n_terms,
            n_epochs,
            planted,
            records_per_group: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub epochs: Vec<EpochCorpus>,
    /// Terms whose movement the script controls; the drift detector should be
    /// pointed at exactly this set.
    pub tracked_terms: Vec<String>,
    pub script: Vec<ScriptedEvent>,
}

/// Per-pair co-location timeline implied by the script. `true` = together.
fn pair_states(events: &[&ScriptedEvent], n_epochs: usize, pair: (usize, usize)) -> Result<Vec<bool>> {
    let mut ordered = events.to_vec();
    ordered.sort_by_key(|e| e.transition);
    for window in ordered.windows(2) {
        if window[0].transition == window[1].transition {
            return Err(Error::Config(format!(
                "pair ({}, {}) is scripted twice at transition {}",
                pair.0, pair.1, window[0].transition
            )));
        }
    }
    let initial_together = matches!(ordered[0].kind, ScriptedKind::Split);
    let mut state = initial_together;
    let mut states = Vec::with_capacity(n_epochs);
    let mut next = ordered.iter().peekable();
    for epoch in 0..n_epochs {
        states.push(state);
        if let Some(e) = next.peek() {
            if e.transition == epoch {
                let expect_together = matches!(e.kind, ScriptedKind::Split);
                if state != expect_together {
                    return Err(Error::Config(format!(
                        "pair ({}, {}) cannot {} at transition {}: pair is already {}",
                        pair.0,
                        pair.1,
                        if expect_together { "split" } else { "merge" },
                        epoch,
                        if state { "together" } else { "apart" },
                    )));
                }
                state = !state;
                next.next();
            }
        }
    }
    Ok(states)
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    if spec.n_terms == 0 || spec.n_epochs == 0 {
        return Err(Error::Config("synthetic corpus needs n_terms > 0 and n_epochs > 0".into()));
    }
    if spec.records_per_group == 0 {
        return Err(Error::Config("records_per_group must be positive".into()));
    }
    let width = spec.n_terms.saturating_sub(1).max(1).to_string().len().max(3);
    let term_name = |i: usize| format!("t{i:0width$}");

    // Validate the script and group events by pair.
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for e in &spec.planted {
        let (a, b) = e.pair;
        if a >= spec.n_terms || b >= spec.n_terms {
            return Err(Error::Config(format!(
                "scripted pair ({a}, {b}) references a term index >= n_terms ({})",
                spec.n_terms
            )));
        }
        if a == b {
            return Err(Error::Config(format!("scripted pair ({a}, {b}) must name two distinct terms")));
        }
        if e.transition + 1 >= spec.n_epochs {
            return Err(Error::Config(format!(
                "transition {} is out of range for {} epochs",
                e.transition, spec.n_epochs
            )));
        }
        let norm = (e.pair.0.min(e.pair.1), e.pair.0.max(e.pair.1));
        if !pairs.contains(&norm) {
            pairs.push(norm);
        }
    }
    let mut seen_terms = std::collections::BTreeSet::new();
    for &(a, b) in &pairs {
        if !seen_terms.insert(a) || !seen_terms.insert(b) {
            return Err(Error::Config(format!(
                "term t{a}/t{b} appears in more than one scripted pair"
            )));
        }
    }

    let mut timelines = Vec::new();
    for &pair in &pairs {
        let events: Vec<&ScriptedEvent> = spec
            .planted
            .iter()
            .filter(|e| (e.pair.0.min(e.pair.1), e.pair.0.max(e.pair.1)) == pair)
            .collect();
        timelines.push((pair, pair_states(&events, spec.n_epochs, pair)?));
    }

    let unscripted: Vec<usize> = (0..spec.n_terms).filter(|i| !seen_terms.contains(i)).collect();

    let epoch_spec = EpochSpec::new(2000, 2000 + spec.n_epochs as i32 - 1, 1, spec.n_epochs as u32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let r = spec.records_per_group;
    let mut epochs = Vec::with_capacity(spec.n_epochs);
    for epoch in 0..spec.n_epochs {
        let year = 2000 + epoch as i32;
        let mut groups: Vec<Vec<String>> = Vec::new();
        if !unscripted.is_empty() {
            for &u in &unscripted {
                groups.push(vec![term_name(u), "zz bg0".into(), "zz bg1".into()]);
            }
        }
        for (&(a, b), states) in pairs.iter().zip(timelines.iter().map(|(_, s)| s)) {
            let together = states[epoch];
            let w0 = format!("zz w{a}a");
            let w1 = format!("zz w{a}b");
            groups.push(vec![term_name(a), w0.clone(), w1.clone()]);
            if together {
                groups.push(vec![term_name(b), w0, w1]);
            } else {
                groups.push(vec![term_name(b), format!("zz v{b}a"), format!("zz v{b}b")]);
            }
            // Keep the apart-anchors in every epoch's vocabulary.
            groups.push(vec![format!("zz v{b}a"), format!("zz v{b}b")]);
        }

        let mut records = Vec::with_capacity(groups.len() * r);
        for (g, group) in groups.iter().enumerate() {
            for copy in 0..r {
                records.push(ArtworkRecord {
                    record_id: format!("e{epoch:02}-g{g:03}-c{copy}"),
                    acquisition_year: Some(year),
                    subjects: group
                        .iter()
                        .map(|t| SubjectPath {
                            level1: t.clone(),
                            level2: None,
                            level3: None,
                        })
                        .collect(),
                });
            }
        }
        records.shuffle(&mut rng);
        epochs.push(EpochCorpus {
            epoch_index: epoch,
            year_range: epoch_spec.year_range(epoch),
            records,
        });
    }

    Ok(SyntheticCorpus {
        epochs,
        tracked_terms: (0..spec.n_terms).map(term_name).collect(),
        script: spec.planted.clone(),
    })
}
