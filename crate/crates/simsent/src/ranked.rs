//! Ranked result lists: the common currency between retrieval, reranking,
//! fusion, and evaluation.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// One scored document in a ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub doc_id: String,
    pub score: f64,
}

/// A ranking of documents for a single query, best first.
///
/// Lists produced by first-stage retrieval and fusion are sorted by
/// descending score with ties broken by ascending doc id; a reranked list
/// keeps that shape inside its head and tail but the score scale may change
/// at the head/tail boundary. Doc ids are unique throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    /// Sort scored candidates (descending score, ties by ascending doc id),
    /// keep the top `k`, and wrap them as a ranking.
    pub fn from_scores(
        query_id: impl Into<String>,
        mut scored: Vec<(String, f64)>,
        k: usize,
    ) -> Self {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        RankedList {
            query_id: query_id.into(),
            entries: scored
                .into_iter()
                .map(|(doc_id, score)| RankedEntry { doc_id, score })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based rank of a document, if present.
    pub fn position(&self, doc_id: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.doc_id == doc_id)
            .map(|i| i + 1)
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }

    /// Check the invariants of a freshly retrieved or fused list: unique
    /// ids, finite scores, and a non-increasing score sequence.
    pub fn validate_sorted(&self) -> Result<()> {
        self.validate_unique()?;
        for pair in self.entries.windows(2) {
            if pair[1].score > pair[0].score {
                return Err(Error::bad_format(
                    "ranked list",
                    format!(
                        "scores increase at {:?} -> {:?}",
                        pair[0].doc_id, pair[1].doc_id
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Check id uniqueness and score finiteness only; reranked lists are
    /// allowed a score drop at the head/tail boundary.
    pub fn validate_unique(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.entries.len());
        for e in &self.entries {
            if !e.score.is_finite() {
                return Err(Error::bad_format(
                    "ranked list",
                    format!("non-finite score for {:?}", e.doc_id),
                ));
            }
            if !seen.insert(e.doc_id.as_str()) {
                return Err(Error::DuplicateId(e.doc_id.clone()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_scores_sorts_and_truncates() {
        let list = RankedList::from_scores(
            "q",
            vec![
                ("d3".into(), 0.2),
                ("d1".into(), 0.9),
                ("d2".into(), 0.5),
            ],
            2,
        );
        assert_eq!(list.len(), 2);
        assert_eq!(list.entries[0].doc_id, "d1");
        assert_eq!(list.entries[1].doc_id, "d2");
        list.validate_sorted().unwrap();
    }

    #[test]
    fn ties_break_by_ascending_doc_id() {
        let list = RankedList::from_scores(
            "q",
            vec![
                ("db".into(), 1.0),
                ("da".into(), 1.0),
                ("dc".into(), 1.0),
            ],
            10,
        );
        let ids: Vec<&str> = list.doc_ids().collect();
        assert_eq!(ids, vec!["da", "db", "dc"]);
    }

    #[test]
    fn position_is_one_based() {
        let list = RankedList::from_scores("q", vec![("a".into(), 2.0), ("b".into(), 1.0)], 10);
        assert_eq!(list.position("a"), Some(1));
        assert_eq!(list.position("b"), Some(2));
        assert_eq!(list.position("zzz"), None);
    }

    #[test]
    fn validation_catches_duplicates_and_disorder() {
        let dup = RankedList {
            query_id: "q".into(),
            entries: vec![
                RankedEntry { doc_id: "a".into(), score: 1.0 },
                RankedEntry { doc_id: "a".into(), score: 0.5 },
            ],
        };
        assert!(dup.validate_unique().is_err());

        let unsorted = RankedList {
            query_id: "q".into(),
            entries: vec![
                RankedEntry { doc_id: "a".into(), score: 0.5 },
                RankedEntry { doc_id: "b".into(), score: 1.0 },
            ],
        };
        assert!(unsorted.validate_sorted().is_err());
        assert!(unsorted.validate_unique().is_ok());
    }
}
