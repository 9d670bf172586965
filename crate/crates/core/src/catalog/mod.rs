//! Catalog ingestion: record types, epoch partitioning, vocabulary statistics.
//!
//! A catalog is a flat list of [`ArtworkRecord`]s, each tagged with zero or
//! more hierarchical [`SubjectPath`]s of depth 1 to 3. Records are sliced
//! into fixed-length epochs by acquisition year; all downstream analysis is
//! per epoch and per indexing level.

mod jsonl;
mod normalize;
mod synthetic;
mod tate;

pub use normalize::{normalize_term, TermNormalizer};
pub use synthetic::{
    generate_synthetic, ScriptedEvent, ScriptedKind, SyntheticCorpus, SyntheticSpec,
};

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One subject tag, up to three levels deep. Level k+1 is only present when
/// level k is. Terms are stored normalized.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubjectPath {
    pub level1: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level2: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level3: Option<String>,
}

impl SubjectPath {
    /// Normalizes the raw level terms and truncates the path at the first
    /// level that normalizes to empty. Returns `None` if level 1 drops out.
    pub fn from_raw(
        normalizer: &TermNormalizer,
        level1: &str,
        level2: Option<&str>,
        level3: Option<&str>,
    ) -> Option<Self> {
        let l1 = normalizer.normalize(level1);
        if l1.is_empty() {
            return None;
        }
        let l2 = level2.map(|s| normalizer.normalize(s)).filter(|s| !s.is_empty());
        let l3 = match &l2 {
            Some(_) => level3.map(|s| normalizer.normalize(s)).filter(|s| !s.is_empty()),
            None => None,
        };
        Some(SubjectPath {
            level1: l1,
            level2: l2,
            level3: l3,
        })
    }

    pub fn term_at(&self, level: IndexLevel) -> Option<&str> {
        match level {
            IndexLevel::Level1 => Some(self.level1.as_str()),
            IndexLevel::Level2 => self.level2.as_deref(),
            IndexLevel::Level3 => self.level3.as_deref(),
            IndexLevel::AllLevels => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtworkRecord {
    pub record_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acquisition_year: Option<i32>,
    #[serde(default)]
    pub subjects: Vec<SubjectPath>,
}

/// Epoch layout of one period. The period must tile exactly:
/// `period_end - period_start + 1 = epoch_length_years * epoch_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochSpec {
    pub period_start: i32,
    pub period_end: i32,
    pub epoch_length_years: u32,
    pub epoch_count: u32,
}

impl EpochSpec {
    pub fn new(period_start: i32, period_end: i32, epoch_length_years: u32, epoch_count: u32) -> Result<Self> {
        let spec = EpochSpec {
            period_start,
            period_end,
            epoch_length_years,
            epoch_count,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epoch_length_years == 0 || self.epoch_count == 0 {
            return Err(Error::Config(format!(
                "epoch spec {}-{}: epoch_length_years and epoch_count must be positive",
                self.period_start, self.period_end
            )));
        }
        let span = i64::from(self.period_end) - i64::from(self.period_start) + 1;
        let tiled = i64::from(self.epoch_length_years) * i64::from(self.epoch_count);
        if span != tiled {
            return Err(Error::Config(format!(
                "epoch spec {}-{} spans {} years but {} epochs x {} years = {}",
                self.period_start, self.period_end, span, self.epoch_count, self.epoch_length_years, tiled
            )));
        }
        Ok(())
    }

    /// Epoch containing `year`, or `None` when the year is outside the period.
    pub fn epoch_index_of(&self, year: i32) -> Option<usize> {
        if year < self.period_start || year > self.period_end {
            return None;
        }
        let offset = (year - self.period_start) as u32;
        Some((offset / self.epoch_length_years) as usize)
    }

    /// Inclusive year range of epoch `index`.
    pub fn year_range(&self, index: usize) -> (i32, i32) {
        let start = self.period_start + (index as i32) * (self.epoch_length_years as i32);
        (start, start + self.epoch_length_years as i32 - 1)
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.period_start, self.period_end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochCorpus {
    pub epoch_index: usize,
    pub year_range: (i32, i32),
    pub records: Vec<ArtworkRecord>,
}

/// Indexing level an analysis runs at. `AllLevels` pools the vocabularies of
/// levels 1-3, tagging each term with its level so identical strings at
/// different levels stay distinct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexLevel {
    Level1,
    Level2,
    Level3,
    AllLevels,
}

impl IndexLevel {
    pub const ALL: [IndexLevel; 4] = [
        IndexLevel::Level1,
        IndexLevel::Level2,
        IndexLevel::Level3,
        IndexLevel::AllLevels,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            IndexLevel::Level1 => "level1",
            IndexLevel::Level2 => "level2",
            IndexLevel::Level3 => "level3",
            IndexLevel::AllLevels => "all",
        }
    }

    /// Set of terms the record exposes at this level.
    pub fn terms_of(&self, record: &ArtworkRecord) -> BTreeSet<String> {
        let mut terms = BTreeSet::new();
        for path in &record.subjects {
            match self {
                IndexLevel::AllLevels => {
                    terms.insert(format!("l1:{}", path.level1));
                    if let Some(l2) = &path.level2 {
                        terms.insert(format!("l2:{l2}"));
                    }
                    if let Some(l3) = &path.level3 {
                        terms.insert(format!("l3:{l3}"));
                    }
                }
                level => {
                    if let Some(t) = path.term_at(*level) {
                        terms.insert(t.to_string());
                    }
                }
            }
        }
        terms
    }
}

impl fmt::Display for IndexLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for IndexLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "level1" | "l1" | "1" => Ok(IndexLevel::Level1),
            "level2" | "l2" | "2" => Ok(IndexLevel::Level2),
            "level3" | "l3" | "3" => Ok(IndexLevel::Level3),
            "all" | "all_levels" => Ok(IndexLevel::AllLevels),
            other => Err(Error::Config(format!("unknown indexing level {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogFormat {
    TateJson,
    GenericJsonl,
}

impl FromStr for CatalogFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tate_json" => Ok(CatalogFormat::TateJson),
            "generic_jsonl" => Ok(CatalogFormat::GenericJsonl),
            other => Err(Error::Config(format!("unknown catalog format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStats {
    pub parsed: usize,
    pub skipped: usize,
}

/// Reads a catalog from disk. `tate_json` expects a directory tree with one
/// JSON file per record; `generic_jsonl` a single file with one JSON object
/// per line. Malformed records are skipped and counted; duplicate record ids
/// keep the first occurrence and count the rest as skipped. Output is sorted
/// by record id.
pub fn load_catalog(
    source: &Path,
    format: CatalogFormat,
    normalizer: &TermNormalizer,
) -> Result<(Vec<ArtworkRecord>, LoadStats)> {
    let (mut records, mut stats) = match format {
        CatalogFormat::TateJson => tate::load_tree(source, normalizer)?,
        CatalogFormat::GenericJsonl => jsonl::load_file(source, normalizer)?,
    };
    records.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    let before = records.len();
    records.dedup_by(|a, b| a.record_id == b.record_id);
    stats.skipped += before - records.len();
    stats.parsed = records.len();
    if records.is_empty() {
        return Err(Error::Format(format!(
            "no parseable records in {} ({} skipped)",
            source.display(),
            stats.skipped
        )));
    }
    Ok((records, stats))
}

/// Keeps only records with an acquisition year.
pub fn filter_timestamped(records: Vec<ArtworkRecord>) -> Vec<ArtworkRecord> {
    records
        .into_iter()
        .filter(|r| r.acquisition_year.is_some())
        .collect()
}

/// Slices records into the epochs of `spec`. Records outside the period (or
/// without a year) are dropped; each kept record lands in exactly one epoch.
pub fn partition_epochs(records: &[ArtworkRecord], spec: &EpochSpec) -> Result<Vec<EpochCorpus>> {
    spec.validate()?;
    let mut epochs: Vec<EpochCorpus> = (0..spec.epoch_count as usize)
        .map(|i| EpochCorpus {
            epoch_index: i,
            year_range: spec.year_range(i),
            records: Vec::new(),
        })
        .collect();
    for record in records {
        let Some(year) = record.acquisition_year else {
            continue;
        };
        if let Some(idx) = spec.epoch_index_of(year) {
            epochs[idx].records.push(record.clone());
        }
    }
    Ok(epochs)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabularyStats {
    /// Union of the per-epoch term sets.
    pub unique_terms: BTreeSet<String>,
    /// Terms present in every epoch.
    pub persistent_terms: BTreeSet<String>,
}

/// Vocabulary statistics for one level across a run of epochs.
pub fn vocabulary(epochs: &[EpochCorpus], level: IndexLevel) -> Result<VocabularyStats> {
    if epochs.is_empty() {
        return Err(Error::Input("vocabulary requires at least one epoch".into()));
    }
    let per_epoch: Vec<BTreeSet<String>> = epochs
        .iter()
        .map(|e| {
            let mut set = BTreeSet::new();
            for record in &e.records {
                set.extend(level.terms_of(record));
            }
            set
        })
        .collect();
    let mut unique = BTreeSet::new();
    for set in &per_epoch {
        unique.extend(set.iter().cloned());
    }
    let persistent = per_epoch
        .iter()
        .skip(1)
        .fold(per_epoch[0].clone(), |acc, set| {
            acc.intersection(set).cloned().collect()
        });
    Ok(VocabularyStats {
        unique_terms: unique,
        persistent_terms: persistent,
    })
}
