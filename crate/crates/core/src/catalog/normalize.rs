//! Term normalization: lowercasing, whitespace collapse, edge-punctuation
//! trimming, token-wise stop-word removal.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Stop-word list shipped with the crate; see `assets/stopwords_en.txt`.
const DEFAULT_STOPWORDS: &str = include_str!("../../assets/stopwords_en.txt");

fn parse_stopword_lines(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.to_lowercase())
        .collect()
}

#[derive(Debug, Clone)]
pub struct TermNormalizer {
    stopwords: BTreeSet<String>,
}

impl Default for TermNormalizer {
    fn default() -> Self {
        TermNormalizer {
            stopwords: parse_stopword_lines(DEFAULT_STOPWORDS),
        }
    }
}

impl TermNormalizer {
    pub fn from_stopwords<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        TermNormalizer {
            stopwords: words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    /// Loads a replacement stop-word list (one word per line, `#` comments).
    pub fn from_stopword_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(TermNormalizer {
            stopwords: parse_stopword_lines(&text),
        })
    }

    /// Lowercases, splits on whitespace, trims non-alphanumeric characters
    /// from token edges, drops stop-words and emptied tokens, and rejoins
    /// with single spaces. An empty result means the term is dropped.
    pub fn normalize(&self, raw: &str) -> String {
        let lowered = raw.to_lowercase();
        let mut out = String::with_capacity(lowered.len());
        for token in lowered.split_whitespace() {
            let token = token.trim_matches(|c: char| !c.is_alphanumeric());
            if token.is_empty() || self.stopwords.contains(token) {
                continue;
            }
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(token);
        }
        out
    }
}

/// [`TermNormalizer::normalize`] with the shipped default stop-word list.
pub fn normalize_term(raw: &str) -> String {
    static DEFAULT: OnceLock<TermNormalizer> = OnceLock::new();
    DEFAULT.get_or_init(TermNormalizer::default).normalize(raw)
}
