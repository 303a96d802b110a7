//! Synthetic paraphrase corpora for self-contained verification: clusters
//! of mutually relevant sentences whose paraphrases can be pushed to fully
//! disjoint surface vocabularies, linked back together by a generated
//! synonym map. Lexical rankers then see no overlap inside a cluster while
//! synonym-folding embedders see identical token sequences.

use std::collections::HashMap;

use crate::corpus::{Corpus, SentenceRecord};
use crate::error::{Error, Result};
use crate::eval::{Judgment, JudgmentSet};
use crate::seeded::SeededStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    /// Number of relevance clusters.
    pub clusters: usize,
    /// Sentences per cluster; all pairs within a cluster are relevant.
    pub paraphrases: usize,
    /// Fraction of word slots whose surface form is unique to the
    /// paraphrase: 0 shares the whole vocabulary, 1 shares none of it.
    pub split: f64,
    /// Tokens per sentence.
    pub words_per_sentence: usize,
    /// Drives the corpus-order shuffle.
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            clusters: 20,
            paraphrases: 5,
            split: 1.0,
            words_per_sentence: 8,
            seed: 1,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.paraphrases == 0 || self.words_per_sentence == 0 {
            return Err(Error::InvalidParam(
                "clusters, paraphrases, and words per sentence must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.split) {
            return Err(Error::InvalidParam(format!(
                "vocabulary split {} outside [0, 1]",
                self.split
            )));
        }
        Ok(())
    }
}

/// A generated corpus with the synonym map tying paraphrase surfaces to
/// their cluster-canonical forms and within-cluster relevance judgments.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub corpus: Corpus,
    pub synonyms: HashMap<String, String>,
    pub judgments: JudgmentSet,
}

fn sentence_id(cluster: usize, paraphrase: usize) -> String {
    format!("c{cluster:03}p{paraphrase:02}")
}

/// Generate the corpus. Sentence `p` of cluster `c` fills word slot `l`
/// with either the cluster-canonical form `w{c}x{l}` (shared slots) or the
/// paraphrase-specific surface `w{c}x{l}p{p}` (split slots, mapped to the
/// canonical form in the synonym table). Every sentence is a query; its
/// cluster-mates are judged grade 3 and everything else is left unjudged.
/// Output is deterministic for a fixed seed, including the corpus order.
pub fn generate(params: &SynthParams) -> Result<SynthOutput> {
    params.validate()?;
    let specific_slots = ((params.split * params.words_per_sentence as f64).round() as usize)
        .min(params.words_per_sentence);
    let mut records = Vec::with_capacity(params.clusters * params.paraphrases);
    let mut synonyms = HashMap::new();
    for c in 0..params.clusters {
        for p in 0..params.paraphrases {
            let mut words = Vec::with_capacity(params.words_per_sentence);
            for l in 0..params.words_per_sentence {
                let canonical = format!("w{c}x{l}");
                if l < specific_slots {
                    let surface = format!("{canonical}p{p}");
                    synonyms.insert(surface.clone(), canonical);
                    words.push(surface);
                } else {
                    words.push(canonical);
                }
            }
            records.push(SentenceRecord::new(sentence_id(c, p), words.join(" ")));
        }
    }
    let mut stream = SeededStream::new(params.seed);
    stream.shuffle(&mut records);
    let corpus = Corpus::from_records(records)?;

    let mut judgments = JudgmentSet::new();
    for c in 0..params.clusters {
        for p in 0..params.paraphrases {
            for other in 0..params.paraphrases {
                if other == p {
                    continue;
                }
                judgments.insert(Judgment::new(
                    sentence_id(c, p),
                    sentence_id(c, other),
                    3,
                )?)?;
            }
        }
    }
    Ok(SynthOutput {
        corpus,
        synonyms,
        judgments,
    })
}
