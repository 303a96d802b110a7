//! Sentence corpus: JSONL ingestion, tokenization, and corpus-level term
//! statistics (document frequencies, sentence count, average length).
//!
//! The corpus is the ground truth every other module hangs off: lexical
//! indexes, pooled sentence vectors, and evaluation worksheets all resolve
//! sentence ids through it.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// One sentence with its id, raw text, and cached token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceRecord {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
}

impl SentenceRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let id = id.into();
        let text = text.into();
        let tokens = tokenize(&text);
        SentenceRecord { id, text, tokens }
    }
}

/// Lowercase and split on maximal runs of non-alphanumeric characters.
/// No stemming, no stopword removal; numbers survive as tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Corpus-level term statistics.
///
/// `df` counts the number of sentences containing a term at least once
/// (document frequency, not occurrence count), `n` is the sentence count,
/// and `avg_len` the mean token count per sentence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TermStats {
    pub df: HashMap<String, u32>,
    pub n: u32,
    pub avg_len: f64,
}

impl TermStats {
    /// Recompute statistics from scratch over a slice of sentences.
    pub fn compute(sentences: &[SentenceRecord]) -> Self {
        let mut df: HashMap<String, u32> = HashMap::new();
        let mut total_tokens = 0usize;
        for s in sentences {
            total_tokens += s.tokens.len();
            let mut seen: Vec<&String> = s.tokens.iter().collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t.clone()).or_insert(0) += 1;
            }
        }
        let n = sentences.len() as u32;
        let avg_len = if n == 0 {
            0.0
        } else {
            total_tokens as f64 / f64::from(n)
        };
        TermStats { df, n, avg_len }
    }

    /// Document frequency of a term; zero for unseen terms.
    pub fn df(&self, term: &str) -> u32 {
        self.df.get(term).copied().unwrap_or(0)
    }
}

/// Smoothed inverse document frequency: `ln((n + 1) / (df + 1)) + 1`.
///
/// Defined for every term, including unseen ones (df = 0), and always >= 1
/// for terms that appear in at most all sentences.
pub fn idf(term: &str, stats: &TermStats) -> f64 {
    let n = f64::from(stats.n);
    let df = f64::from(stats.df(term));
    ((n + 1.0) / (df + 1.0)).ln() + 1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    text: String,
}

/// An id-addressable collection of sentences plus its term statistics.
#[derive(Debug, Clone)]
pub struct Corpus {
    sentences: Vec<SentenceRecord>,
    by_id: HashMap<String, usize>,
    stats: TermStats,
}

impl Corpus {
    /// Build a corpus from already-constructed records. Fails on duplicate
    /// or malformed ids.
    pub fn from_records(records: Vec<SentenceRecord>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            validate_id(&r.id)?;
            if by_id.insert(r.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(r.id.clone()));
            }
            if r.tokens.is_empty() {
                log::warn!("sentence {:?} has no tokens; it will not be indexed", r.id);
            }
        }
        let stats = TermStats::compute(&records);
        Ok(Corpus {
            sentences: records,
            by_id,
            stats,
        })
    }

    /// Parse newline-delimited JSON records of the form
    /// `{"id": "...", "text": "..."}`. Strict: a malformed line or a
    /// duplicate id aborts ingestion with the offending location.
    pub fn from_jsonl_reader(reader: impl BufRead, source: &Path) -> Result<Self> {
        let mut records = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawRecord = serde_json::from_str(&line)
                .map_err(|e| Error::parse(source, idx + 1, e.to_string()))?;
            if let Err(err) = validate_id(&raw.id) {
                return Err(Error::parse(source, idx + 1, err.to_string()));
            }
            records.push(SentenceRecord::new(raw.id, raw.text));
        }
        Corpus::from_records(records)
    }

    pub fn from_jsonl_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Corpus::from_jsonl_reader(BufReader::new(file), path)
    }

    /// Serialize as JSONL, one record per line, in corpus order.
    pub fn write_jsonl(&self, w: &mut impl Write) -> std::io::Result<()> {
        for s in &self.sentences {
            let line = serde_json::json!({ "id": s.id, "text": s.text });
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn sentences(&self) -> &[SentenceRecord] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn stats(&self) -> &TermStats {
        &self.stats
    }

    pub fn get(&self, id: &str) -> Option<&SentenceRecord> {
        self.by_id.get(id).map(|&i| &self.sentences[i])
    }

    /// Resolve an id or fail with the id in the error.
    pub fn require(&self, id: &str) -> Result<&SentenceRecord> {
        self.get(id).ok_or_else(|| Error::UnknownId(id.to_owned()))
    }
}

/// Ids travel through whitespace-separated text formats, so they must be
/// non-empty and free of whitespace and control characters.
fn validate_id(id: &str) -> Result<()> {
    if id.is_empty() {
        return Err(Error::bad_format("sentence id", "empty id"));
    }
    if id.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return Err(Error::bad_format(
            "sentence id",
            format!("id {id:?} contains whitespace or control characters"),
        ));
    }
    Ok(())
}
