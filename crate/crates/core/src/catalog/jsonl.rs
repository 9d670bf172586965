//! Adapter for the generic line-delimited format: one JSON object per line,
//! `{"id": ..., "year": ..., "subjects": [[l1, l2?, l3?], ...]}`.
//! See `docs/generic_jsonl.md` in the repository root for the schema.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde_json::Value;

use super::{ArtworkRecord, LoadStats, SubjectPath, TermNormalizer};
use crate::error::{Error, Result};

pub(super) fn load_file(
    path: &Path,
    normalizer: &TermNormalizer,
) -> Result<(Vec<ArtworkRecord>, LoadStats)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_lines(BufReader::new(file), normalizer, path)
}

pub(super) fn read_lines(
    reader: impl BufRead,
    normalizer: &TermNormalizer,
    origin: &Path,
) -> Result<(Vec<ArtworkRecord>, LoadStats)> {
    let mut records = Vec::new();
    let mut skipped = 0usize;
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match parse_line(trimmed, normalizer) {
            Some(record) => records.push(record),
            None => skipped += 1,
        }
    }
    let stats = LoadStats {
        parsed: records.len(),
        skipped,
    };
    Ok((records, stats))
}

fn parse_line(line: &str, normalizer: &TermNormalizer) -> Option<ArtworkRecord> {
    let value: Value = serde_json::from_str(line).ok()?;
    let record_id = match value.get("id")? {
        Value::String(s) if !s.trim().is_empty() => s.trim().to_string(),
        Value::Number(n) => n.to_string(),
        _ => return None,
    };
    let acquisition_year = match value.get("year") {
        Some(Value::Number(n)) => Some(n.as_i64()? as i32),
        Some(Value::Null) | None => None,
        Some(_) => return None,
    };
    let mut subjects = Vec::new();
    match value.get("subjects") {
        Some(Value::Array(paths)) => {
            for path in paths {
                let levels = path.as_array()?;
                if levels.is_empty() || levels.len() > 3 {
                    return None;
                }
                let names: Vec<&str> = levels
                    .iter()
                    .map(|v| v.as_str())
                    .collect::<Option<Vec<_>>>()?;
                let l1 = names[0];
                let l2 = names.get(1).copied();
                let l3 = names.get(2).copied();
                if let Some(p) = SubjectPath::from_raw(normalizer, l1, l2, l3) {
                    subjects.push(p);
                }
            }
        }
        Some(Value::Null) | None => {}
        Some(_) => return None,
    }
    subjects.sort();
    subjects.dedup();
    Some(ArtworkRecord {
        record_id,
        acquisition_year,
        subjects,
    })
}
