//! Adapter for Tate-style catalog dumps: a directory tree with one JSON file
//! per artwork and a nested subject hierarchy of depth <= 3.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::Value;

use super::{ArtworkRecord, LoadStats, SubjectPath, TermNormalizer};
use crate::error::{Error, Result};

pub(super) fn load_tree(
    root: &Path,
    normalizer: &TermNormalizer,
) -> Result<(Vec<ArtworkRecord>, LoadStats)> {
    if !root.exists() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "catalog root not found"),
        ));
    }
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .follow_links(false)
        .into_iter()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Format(format!("walking {}: {e}", root.display())))?
        .into_iter()
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    files.sort();

    let parsed: Vec<Option<ArtworkRecord>> = files
        .par_iter()
        .map(|path| parse_file(path, normalizer))
        .collect();

    let mut records = Vec::with_capacity(parsed.len());
    let mut skipped = 0usize;
    for item in parsed {
        match item {
            Some(r) => records.push(r),
            None => skipped += 1,
        }
    }
    let stats = LoadStats {
        parsed: records.len(),
        skipped,
    };
    Ok((records, stats))
}

fn parse_file(path: &Path, normalizer: &TermNormalizer) -> Option<ArtworkRecord> {
    let bytes = fs::read(path).ok()?;
    let value: Value = serde_json::from_slice(&bytes).ok()?;
    parse_record(&value, normalizer)
}

pub(super) fn parse_record(value: &Value, normalizer: &TermNormalizer) -> Option<ArtworkRecord> {
    let record_id = match value.get("acno") {
        Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
        _ => match value.get("id") {
            Some(Value::Number(n)) => n.to_string(),
            _ => return None,
        },
    };
    let acquisition_year = match value.get("acquisitionYear") {
        Some(Value::Number(n)) => n.as_i64().map(|y| y as i32),
        _ => None,
    };
    let mut subjects = Vec::new();
    if let Some(l1_nodes) = subject_children(value.get("subjects")) {
        for l1 in l1_nodes {
            let Some(l1_name) = node_name(l1) else { continue };
            match subject_children(Some(l1)) {
                None => {
                    if let Some(p) = SubjectPath::from_raw(normalizer, l1_name, None, None) {
                        subjects.push(p);
                    }
                }
                Some(l2_nodes) => {
                    for l2 in l2_nodes {
                        let Some(l2_name) = node_name(l2) else { continue };
                        match subject_children(Some(l2)) {
                            None => {
                                if let Some(p) =
                                    SubjectPath::from_raw(normalizer, l1_name, Some(l2_name), None)
                                {
                                    subjects.push(p);
                                }
                            }
                            Some(l3_nodes) => {
                                for l3 in l3_nodes {
                                    let Some(l3_name) = node_name(l3) else { continue };
                                    if let Some(p) = SubjectPath::from_raw(
                                        normalizer,
                                        l1_name,
                                        Some(l2_name),
                                        Some(l3_name),
                                    ) {
                                        subjects.push(p);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    subjects.sort();
    subjects.dedup();
    Some(ArtworkRecord {
        record_id,
        acquisition_year,
        subjects,
    })
}

fn subject_children(node: Option<&Value>) -> Option<&Vec<Value>> {
    node?.get("children")?.as_array().filter(|a| !a.is_empty())
}

fn node_name(node: &Value) -> Option<&str> {
    node.get("name")?.as_str().filter(|s| !s.trim().is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{load_catalog, CatalogFormat, IndexLevel};
    use serde_json::json;

    fn turner_value() -> Value {
        json!({
            "acno": "N00458",
            "id": 1035,
            "acquisitionYear": 1856,
            "subjects": {
                "name": "subject",
                "children": [
                    {
                        "name": "objects",
                        "children": [{
                            "name": "clothing and personal effects",
                            "children": [{ "name": "cravat" }]
                        }]
                    },
                    {
                        "name": "people",
                        "children": [{
                            "name": "adults",
                            "children": [{ "name": "man" }]
                        }]
                    },
                    {
                        "name": "named individuals",
                        "children": [{ "name": "Turner, Joseph Mallord William" }]
                    },
                    {
                        "name": "portraits",
                        "children": [{ "name": "self-portraits" }]
                    },
                    {
                        "name": "work and occupations",
                        "children": [{
                            "name": "arts and entertainment",
                            "children": [{ "name": "artist, painter" }]
                        }]
                    }
                ]
            }
        })
    }

    #[test]
    fn turner_self_portrait_yields_five_paths_two_without_level3() {
        let n = TermNormalizer::default();
        let record = parse_record(&turner_value(), &n).unwrap();
        assert_eq!(record.record_id, "N00458");
        assert_eq!(record.acquisition_year, Some(1856));
        assert_eq!(record.subjects.len(), 5);
        let without_l3 = record.subjects.iter().filter(|p| p.level3.is_none()).count();
        assert_eq!(without_l3, 2);
        let l1 = IndexLevel::Level1.terms_of(&record);
        assert!(l1.contains("objects"));
        assert!(l1.contains("named individuals"));
        let l3 = IndexLevel::Level3.terms_of(&record);
        assert!(l3.contains("cravat"));
        assert!(l3.contains("artist painter"));
        assert_eq!(l3.len(), 3);
    }

    #[test]
    fn record_without_subjects_is_retained_empty() {
        let n = TermNormalizer::default();
        let record = parse_record(&json!({"acno": "X1", "acquisitionYear": 1900}), &n).unwrap();
        assert_eq!(record.subjects, vec![]);
        assert_eq!(record.acquisition_year, Some(1900));
    }

    #[test]
    fn missing_id_is_rejected() {
        let n = TermNormalizer::default();
        assert!(parse_record(&json!({"acquisitionYear": 1900}), &n).is_none());
        assert!(parse_record(&json!({"acno": "  "}), &n).is_none());
        assert!(parse_record(&json!({"id": 77}), &n).is_some());
    }

    #[test]
    fn null_year_is_absent() {
        let n = TermNormalizer::default();
        let r = parse_record(&json!({"acno": "A", "acquisitionYear": null}), &n).unwrap();
        assert_eq!(r.acquisition_year, None);
    }

    #[test]
    fn directory_tree_loads_sorted_with_skip_counts() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("a");
        std::fs::create_dir(&sub).unwrap();
        std::fs::write(sub.join("02.json"), turner_value().to_string()).unwrap();
        std::fs::write(dir.path().join("01.json"), r#"{"acno":"A1","acquisitionYear":1800}"#).unwrap();
        std::fs::write(dir.path().join("bad.json"), "{not json").unwrap();
        std::fs::write(dir.path().join("ignored.txt"), "not a record").unwrap();
        let (records, stats) =
            load_catalog(dir.path(), CatalogFormat::TateJson, &TermNormalizer::default()).unwrap();
        assert_eq!(stats.parsed, 2);
        assert_eq!(stats.skipped, 1);
        let ids: Vec<_> = records.iter().map(|r| r.record_id.as_str()).collect();
        assert_eq!(ids, vec!["A1", "N00458"]);
    }

    #[test]
    fn empty_tree_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_catalog(dir.path(), CatalogFormat::TateJson, &TermNormalizer::default());
        assert!(matches!(err, Err(Error::Format(_))));
        let missing = dir.path().join("nope");
        let err = load_catalog(&missing, CatalogFormat::TateJson, &TermNormalizer::default());
        assert!(matches!(err, Err(Error::Io { .. })));
    }
}
