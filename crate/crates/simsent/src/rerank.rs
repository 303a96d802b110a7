//! Second-stage reranking: a pair scorer re-sorts the head of a
//! first-stage ranking, plus construction and export of the labeled pairs
//! an external cross-encoder trains on.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::corpus::{tokenize, Corpus, TermStats};
use crate::embed::{pool, ComponentStats, EmbeddingProvider, PoolingMode};
use crate::error::{Error, Result};
use crate::eval::JudgmentSet;
use crate::ranked::RankedList;
use crate::seeded::SeededStream;
use crate::siamese::{PairRecord, ProjectionModel};

/// Reranking depth used when none is given: re-sort the top 100.
pub const DEFAULT_RERANK_DEPTH: usize = 100;

/// Attempts allowed per random draw before giving up on an unjudged pick.
const SAMPLE_ATTEMPT_FACTOR: usize = 100;

/// One side of a scored pair: an id plus its resolved text. Text-based
/// scorers read `text`; score-file scorers key on `id`.
#[derive(Debug, Clone, Copy)]
pub struct PairRef<'a> {
    pub id: &'a str,
    pub text: &'a str,
}

/// A deterministic query-candidate scorer producing values in [0, 1].
pub trait PairScorer {
    fn score(&self, query: PairRef<'_>, candidate: PairRef<'_>) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RerankConfig {
    /// How deep into the first-stage list the re-sort reaches.
    pub depth: usize,
}

impl Default for RerankConfig {
    fn default() -> Self {
        RerankConfig {
            depth: DEFAULT_RERANK_DEPTH,
        }
    }
}

impl RerankConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::InvalidParam("rerank depth must be >= 1".into()));
        }
        Ok(())
    }
}

/// Re-sort the first `min(depth, len)` entries by the scorer, descending,
/// ties keeping their original relative order. Head entries carry the
/// scorer's scores afterwards; entries beyond the depth are untouched, so
/// the non-increasing-score invariant is only guaranteed within the head.
pub fn rerank(
    list: &RankedList,
    scorer: &dyn PairScorer,
    query: PairRef<'_>,
    corpus: &Corpus,
    config: &RerankConfig,
) -> Result<RankedList> {
    config.validate()?;
    let head_len = config.depth.min(list.entries.len());
    let mut head: Vec<(usize, String, f64)> = Vec::with_capacity(head_len);
    for (rank, entry) in list.entries[..head_len].iter().enumerate() {
        let text = &corpus.require(&entry.doc_id)?.text;
        let score = scorer.score(
            query,
            PairRef {
                id: &entry.doc_id,
                text,
            },
        )?;
        if !score.is_finite() {
            return Err(Error::Degenerate(format!(
                "scorer produced a non-finite score for {:?}",
                entry.doc_id
            )));
        }
        head.push((rank, entry.doc_id.clone(), score));
    }
    head.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    let mut entries: Vec<crate::ranked::RankedEntry> = head
        .into_iter()
        .map(|(_, doc_id, score)| crate::ranked::RankedEntry { doc_id, score })
        .collect();
    entries.extend_from_slice(&list.entries[head_len..]);
    Ok(RankedList {
        query_id: list.query_id.clone(),
        entries,
    })
}

/// Deterministic stand-in for an external cross-encoder: the trained
/// projection's cosine over pooled vectors, mapped from [-1, 1] into
/// [0, 1]. Degenerate sides (no tokens, or a vanishing projection) score
/// the uninformative prior 0.5.
pub struct SiameseScorer<'a> {
    model: &'a ProjectionModel,
    provider: &'a dyn EmbeddingProvider,
    pooling: PoolingMode,
    context: Option<(&'a TermStats, &'a ComponentStats)>,
}

impl<'a> SiameseScorer<'a> {
    pub fn new(
        model: &'a ProjectionModel,
        provider: &'a dyn EmbeddingProvider,
        pooling: PoolingMode,
        context: Option<(&'a TermStats, &'a ComponentStats)>,
    ) -> Result<Self> {
        if model.d_in() != provider.dim() {
            return Err(Error::DimensionMismatch {
                expected: provider.dim(),
                got: model.d_in(),
            });
        }
        if pooling == PoolingMode::Tfidf && context.is_none() {
            return Err(Error::InvalidParam(
                "weighted pooling requires term and component stats".into(),
            ));
        }
        Ok(SiameseScorer {
            model,
            provider,
            pooling,
            context,
        })
    }

    fn projected(&self, text: &str) -> Result<Option<Vec<f64>>> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Ok(None);
        }
        let matrix = self.provider.embed(&tokens)?;
        let pooled = pool(&matrix, self.pooling, self.context)?;
        let projected = self.model.project(&pooled)?;
        if projected.iter().all(|&x| x == 0.0) {
            return Ok(None);
        }
        Ok(Some(projected))
    }
}

impl PairScorer for SiameseScorer<'_> {
    fn score(&self, query: PairRef<'_>, candidate: PairRef<'_>) -> Result<f64> {
        let (u, v) = match (self.projected(query.text)?, self.projected(candidate.text)?) {
            (Some(u), Some(v)) => (u, v),
            _ => return Ok(0.5),
        };
        let dot: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cosine = dot / (nu * nv);
        Ok(((cosine + 1.0) / 2.0).clamp(0.0, 1.0))
    }
}

/// Scores computed out of process, keyed by (query_id, doc_id). Lets an
/// externally trained cross-encoder plug into [`rerank`] through a file.
#[derive(Debug, Clone, Default)]
pub struct ScoreFileScorer {
    scores: HashMap<(String, String), f64>,
}

impl ScoreFileScorer {
    /// Parse tab-separated `query_id doc_id score` lines; scores must lie
    /// in [0, 1], and (query, doc) keys must be unique.
    pub fn read_from(reader: impl BufRead, source: &Path) -> Result<Self> {
        let mut scores = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    source,
                    idx + 1,
                    format!("expected 3 tab-separated fields, got {}", fields.len()),
                ));
            }
            let score: f64 = fields[2]
                .parse()
                .map_err(|e| Error::parse(source, idx + 1, format!("bad score: {e}")))?;
            if !(0.0..=1.0).contains(&score) {
                return Err(Error::parse(
                    source,
                    idx + 1,
                    format!("score {score} outside [0, 1]"),
                ));
            }
            let key = (fields[0].to_owned(), fields[1].to_owned());
            if scores.insert(key, score).is_some() {
                return Err(Error::parse(
                    source,
                    idx + 1,
                    format!("duplicate score for ({}, {})", fields[0], fields[1]),
                ));
            }
        }
        Ok(ScoreFileScorer { scores })
    }

    pub fn read_from_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        ScoreFileScorer::read_from(std::io::BufReader::new(f), path)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl PairScorer for ScoreFileScorer {
    fn score(&self, query: PairRef<'_>, candidate: PairRef<'_>) -> Result<f64> {
        self.scores
            .get(&(query.id.to_owned(), candidate.id.to_owned()))
            .copied()
            .ok_or_else(|| Error::MissingScore {
                query: query.id.to_owned(),
                doc: candidate.id.to_owned(),
            })
    }
}

/// Turn graded judgments into labeled training pairs: grades 2-3 (relevant
/// or better) label 1.0, grades 0-1 label 0.5, plus `random_count` seeded
/// uniform draws per query labeled 0. Random draws skip the query itself
/// and its judged documents so labels never contradict each other.
pub fn build_training_pairs(
    judgments: &JudgmentSet,
    corpus: &Corpus,
    random_count: usize,
    seed: u64,
) -> Result<Vec<PairRecord>> {
    let mut pairs = Vec::new();
    let mut stream = SeededStream::new(seed);
    let sentences = corpus.sentences();
    for query_id in judgments.queries() {
        let docs = judgments
            .query_grades(query_id)
            .expect("query listed by its own set");
        for (doc_id, &grade) in docs {
            corpus.require(doc_id)?;
            let label = if grade >= 2 { 1.0 } else { 0.5 };
            pairs.push(PairRecord {
                query_id: query_id.to_owned(),
                doc_id: doc_id.clone(),
                label,
            });
        }
        if random_count == 0 {
            continue;
        }
        if sentences.is_empty() {
            return Err(Error::Degenerate(
                "cannot draw random pairs from an empty corpus".into(),
            ));
        }
        let mut drawn = 0usize;
        let mut attempts = 0usize;
        let budget = SAMPLE_ATTEMPT_FACTOR * random_count;
        while drawn < random_count {
            if attempts >= budget {
                return Err(Error::Degenerate(format!(
                    "could not find {random_count} unjudged documents for query \
                     {query_id:?} in {budget} draws"
                )));
            }
            attempts += 1;
            let pick = &sentences[stream.next_below(sentences.len())];
            if pick.id == query_id || docs.contains_key(&pick.id) {
                continue;
            }
            pairs.push(PairRecord {
                query_id: query_id.to_owned(),
                doc_id: pick.id.clone(),
                label: 0.0,
            });
            drawn += 1;
        }
    }
    Ok(pairs)
}

fn flatten_whitespace(text: &str) -> String {
    text.chars()
        .map(|c| if c.is_whitespace() { ' ' } else { c })
        .collect()
}

/// Emit one training line per pair for an external cross-encoder:
/// `[CLS] query text [SEP] result text`, a tab, then the label. Embedded
/// tabs and newlines in the texts are flattened to spaces so the two-column
/// shape survives.
pub fn export_cross_encoder_inputs(
    pairs: &[PairRecord],
    queries: &Corpus,
    corpus: &Corpus,
    w: &mut impl Write,
) -> Result<()> {
    for pair in pairs {
        let query_text = flatten_whitespace(&queries.require(&pair.query_id)?.text);
        let doc_text = flatten_whitespace(&corpus.require(&pair.doc_id)?.text);
        if doc_text.trim().is_empty() {
            log::warn!(
                "exporting pair ({}, {}) with empty result text",
                pair.query_id,
                pair.doc_id
            );
        }
        writeln!(w, "[CLS] {query_text} [SEP] {doc_text}\t{:.1}", pair.label)
            .map_err(|e| Error::bad_format("cross-encoder export", e.to_string()))?;
    }
    Ok(())
}
