//! Unsupervised rank fusion: each ranking contributes a normalized
//! position score weighted by a positive integer, summed over the union of
//! candidates.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ranked::{RankedEntry, RankedList};

/// Preset weighting favoring the reranked semantic system over the lexical
/// baseline, 2:1.
pub const PRESET_WEIGHTED: [u32; 2] = [2, 1];

/// Preset equal weighting for two systems.
pub const PRESET_UNIFORM: [u32; 2] = [1, 1];

/// Rankings over the same query with their relative integer weights.
#[derive(Debug, Clone)]
pub struct FusionInput<'a> {
    pub rankings: &'a [RankedList],
    pub weights: &'a [u32],
}

impl FusionInput<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.rankings.is_empty() {
            return Err(Error::InvalidParam("fusion needs at least one ranking".into()));
        }
        if self.rankings.len() != self.weights.len() {
            return Err(Error::InvalidParam(format!(
                "{} rankings but {} weights",
                self.rankings.len(),
                self.weights.len()
            )));
        }
        if self.weights.contains(&0) {
            return Err(Error::InvalidParam("fusion weights must be >= 1".into()));
        }
        let query = &self.rankings[0].query_id;
        for list in self.rankings {
            if &list.query_id != query {
                return Err(Error::InvalidParam(format!(
                    "cannot fuse rankings for different queries ({query:?} vs {:?})",
                    list.query_id
                )));
            }
            list.validate_unique()?;
        }
        Ok(())
    }
}

/// Fuse rankings of one query. With `D` the union of all candidate ids, a
/// document at 1-based position `p` of ranking `r` earns
/// `((|D| − p + 1)/|D|) · w(r)`, absences earn 0, and the output sorts by
/// total descending with ties broken by ascending doc id.
///
/// Totals are accumulated as exact integer numerators over the common
/// denominator `|D|`, so equal-weight ties are exact and scaling every
/// weight by the same factor provably never reorders the output.
pub fn fuse(input: &FusionInput<'_>) -> Result<RankedList> {
    input.validate()?;
    let mut numerators: BTreeMap<&str, u64> = BTreeMap::new();
    for list in input.rankings {
        for entry in &list.entries {
            numerators.entry(entry.doc_id.as_str()).or_insert(0);
        }
    }
    let union_size = numerators.len() as u64;
    for (list, &weight) in input.rankings.iter().zip(input.weights) {
        for (idx, entry) in list.entries.iter().enumerate() {
            let position = idx as u64 + 1;
            let contribution = (union_size - position + 1) * u64::from(weight);
            *numerators.get_mut(entry.doc_id.as_str()).expect("seeded above") += contribution;
        }
    }
    let mut entries: Vec<RankedEntry> = numerators
        .into_iter()
        .map(|(doc_id, numerator)| RankedEntry {
            doc_id: doc_id.to_owned(),
            score: numerator as f64 / union_size as f64,
        })
        .collect();
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.doc_id.cmp(&b.doc_id)));
    Ok(RankedList {
        query_id: input.rankings[0].query_id.clone(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(query: &str, docs: &[(&str, f64)]) -> RankedList {
        RankedList {
            query_id: query.to_owned(),
            entries: docs
                .iter()
                .map(|(d, s)| RankedEntry {
                    doc_id: (*d).to_owned(),
                    score: *s,
                })
                .collect(),
        }
    }

    fn abc_pair() -> Vec<RankedList> {
        vec![
            list("q", &[("a", 0.9), ("b", 0.8), ("c", 0.7)]),
            list("q", &[("c", 0.5), ("b", 0.4), ("a", 0.3)]),
        ]
    }

    #[test]
    fn opposite_rankings_with_equal_weights_tie_everywhere() {
        let rankings = abc_pair();
        let fused = fuse(&FusionInput {
            rankings: &rankings,
            weights: &PRESET_UNIFORM,
        })
        .unwrap();
        for entry in &fused.entries {
            assert!((entry.score - 4.0 / 3.0).abs() < 1e-12);
        }
        let ids: Vec<&str> = fused.doc_ids().collect();
        assert_eq!(ids, ["a", "b", "c"], "ties break by ascending doc id");
    }

    #[test]
    fn weighted_preset_matches_hand_evaluation() {
        let rankings = abc_pair();
        let fused = fuse(&FusionInput {
            rankings: &rankings,
            weights: &PRESET_WEIGHTED,
        })
        .unwrap();
        let score = |d: &str| {
            fused
                .entries
                .iter()
                .find(|e| e.doc_id == d)
                .unwrap()
                .score
        };
        assert!((score("a") - 7.0 / 3.0).abs() < 1e-12);
        assert!((score("b") - 2.0).abs() < 1e-12);
        assert!((score("c") - 5.0 / 3.0).abs() < 1e-12);
        let ids: Vec<&str> = fused.doc_ids().collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn single_ranking_keeps_its_permutation() {
        let rankings = vec![list("q", &[("m", 3.0), ("a", 2.0), ("z", 1.0)])];
        for weight in [1u32, 5, 100] {
            let fused = fuse(&FusionInput {
                rankings: &rankings,
                weights: &[weight],
            })
            .unwrap();
            let ids: Vec<&str> = fused.doc_ids().collect();
            assert_eq!(ids, ["m", "a", "z"]);
        }
    }

    #[test]
    fn uniform_weight_scaling_preserves_the_order() {
        let rankings = vec![
            list("q", &[("a", 0.9), ("c", 0.8), ("d", 0.7)]),
            list("q", &[("b", 0.9), ("a", 0.8)]),
            list("q", &[("d", 0.9), ("b", 0.8), ("a", 0.7), ("e", 0.6)]),
        ];
        let base = fuse(&FusionInput {
            rankings: &rankings,
            weights: &[1, 2, 3],
        })
        .unwrap();
        let scaled = fuse(&FusionInput {
            rankings: &rankings,
            weights: &[7, 14, 21],
        })
        .unwrap();
        let a: Vec<&str> = base.doc_ids().collect();
        let b: Vec<&str> = scaled.doc_ids().collect();
        assert_eq!(a, b);
        for (x, y) in base.entries.iter().zip(&scaled.entries) {
            assert!((y.score - 7.0 * x.score).abs() < 1e-9);
        }
    }

    #[test]
    fn permuting_inputs_changes_nothing() {
        let rankings = vec![
            list("q", &[("a", 0.9), ("b", 0.8)]),
            list("q", &[("c", 0.9), ("a", 0.8)]),
        ];
        let swapped = vec![rankings[1].clone(), rankings[0].clone()];
        let forward = fuse(&FusionInput {
            rankings: &rankings,
            weights: &[3, 1],
        })
        .unwrap();
        let backward = fuse(&FusionInput {
            rankings: &swapped,
            weights: &[1, 3],
        })
        .unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn missing_documents_contribute_zero_and_scores_stay_bounded() {
        let rankings = vec![
            list("q", &[("a", 0.9), ("b", 0.8), ("c", 0.7), ("d", 0.6)]),
            list("q", &[("e", 0.9)]),
        ];
        let weights = [2u32, 5];
        let fused = fuse(&FusionInput {
            rankings: &rankings,
            weights: &weights,
        })
        .unwrap();
        assert_eq!(fused.len(), 5);
        let total: f64 = weights.iter().map(|&w| w as f64).sum();
        for entry in &fused.entries {
            assert!(entry.score > 0.0 && entry.score <= total);
        }
        // e appears only in the second ranking: 5 * (5 - 1 + 1)/5 = 5.
        let e = fused.entries.iter().find(|x| x.doc_id == "e").unwrap();
        assert!((e.score - 5.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let rankings = abc_pair();
        assert!(fuse(&FusionInput {
            rankings: &[],
            weights: &[],
        })
        .is_err());
        assert!(fuse(&FusionInput {
            rankings: &rankings,
            weights: &[1],
        })
        .is_err());
        assert!(fuse(&FusionInput {
            rankings: &rankings,
            weights: &[1, 0],
        })
        .is_err());
        let mismatched = vec![
            list("q1", &[("a", 0.9)]),
            list("q2", &[("a", 0.9)]),
        ];
        assert!(fuse(&FusionInput {
            rankings: &mismatched,
            weights: &[1, 1],
        })
        .is_err());
    }
}
