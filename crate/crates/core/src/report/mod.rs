//! Run artifacts: topical histograms, raster heatmaps, and the digest
//! manifest that makes a run directory verifiable.

mod render;

pub use render::{render_heatmap, HeatmapOptions, Palette};

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{EpochCorpus, IndexLevel};
use crate::error::{Error, Result};

/// Term frequencies within one epoch at one indexing level, normalized by
/// the total number of record occurrences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub level: IndexLevel,
    pub epoch_index: usize,
    pub bins: BTreeMap<String, f64>,
    /// True when the epoch had no occurrences at this level.
    pub empty: bool,
}

/// Counts each term once per record, then normalizes so the bins sum to 1.
pub fn topical_histogram(epoch: &EpochCorpus, level: IndexLevel) -> Histogram {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for record in &epoch.records {
        for term in level.terms_of(record) {
            *counts.entry(term).or_insert(0) += 1;
        }
    }
    let total: usize = counts.values().sum();
    let empty = total == 0;
    let bins = counts
        .into_iter()
        .map(|(term, c)| (term, c as f64 / total as f64))
        .collect();
    Histogram { level, epoch_index: epoch.epoch_index, bins, empty }
}

pub fn write_histogram_csv(histogram: &Histogram, w: impl Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Format(format!("writing histogram csv: {e}"));
    csv.write_record(["term", "frequency"]).map_err(err)?;
    for (term, freq) in &histogram.bins {
        csv.write_record([term.clone(), format!("{freq}")]).map_err(err)?;
    }
    csv.flush().map_err(|e| Error::io("<csv stream>", e))?;
    Ok(())
}

/// Run metadata persisted alongside the manifest. Wall-clock stamps live
/// here and only here, so manifests stay identical across reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub config_digest: String,
    pub dataset_digest: String,
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub const RUN_INFO_FILE: &str = "run_info.json";
pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub rel_path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub run_dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

/// Streaming SHA-256 of a file, lowercase hex.
pub fn digest_file(path: &Path) -> Result<String> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut reader = BufReader::new(file);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader
            .read(&mut buf)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digests every expected artifact under `run_dir` and writes the manifest
/// in `sha256sum` format. Fails up front, naming every missing file, so a
/// partial run cannot masquerade as a complete one.
pub fn assemble_report(run_dir: &Path, expected: &[String], info: &RunInfo) -> Result<ReportBundle> {
    let mut rel_paths: Vec<String> = expected.to_vec();
    rel_paths.sort();
    rel_paths.dedup();

    let missing: Vec<String> = rel_paths
        .iter()
        .filter(|rel| !run_dir.join(rel.as_str()).is_file())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingArtifact(missing.join(", ")));
    }

    let mut entries = Vec::with_capacity(rel_paths.len());
    for rel in &rel_paths {
        let sha256 = digest_file(&run_dir.join(rel))?;
        entries.push(ManifestEntry { rel_path: rel.clone(), sha256 });
    }

    let info_path = run_dir.join(RUN_INFO_FILE);
    let info_json = serde_json::to_string_pretty(info)
        .map_err(|e| Error::Format(format!("encoding run info: {e}")))?;
    std::fs::write(&info_path, info_json)
        .map_err(|e| Error::io(info_path.display().to_string(), e))?;

    let manifest_path = run_dir.join(MANIFEST_FILE);
    let mut out = String::new();
    for entry in &entries {
        out.push_str(&entry.sha256);
        out.push_str("  ");
        out.push_str(&entry.rel_path);
        out.push('\n');
    }
    std::fs::write(&manifest_path, out)
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;

    Ok(ReportBundle { run_dir: run_dir.to_path_buf(), entries })
}
