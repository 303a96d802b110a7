//! Bag-of-words baselines over a positional inverted index: Okapi BM25 and
//! a sequential-dependence scorer that rewards adjacent query terms
//! appearing in order or in close proximity.
//!
//! The index maps each term to postings of (document, term frequency,
//! ascending positions). Documents whose token list is empty are excluded
//! from the index entirely; collection-level statistics (`n`, `df`,
//! `avg_len`) come from the corpus they were built over.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::corpus::{Corpus, TermStats};
use crate::error::{Error, Result};
use crate::format;
use crate::ranked::RankedList;

const INDEX_MAGIC: &[u8; 4] = b"SEMX";
const FORMAT_VERSION: u32 = 1;

/// One document's occurrences of a term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Posting {
    /// Row into the index's document table.
    pub doc: u32,
    pub tf: u32,
    /// Strictly ascending token positions; `tf == positions.len()`.
    pub positions: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct DocEntry {
    id: String,
    len: u32,
}

/// Positional inverted index plus the term statistics scoring reads from.
#[derive(Debug, Clone)]
pub struct InvertedIndex {
    docs: Vec<DocEntry>,
    by_id: HashMap<String, u32>,
    postings: HashMap<String, Vec<Posting>>,
    stats: TermStats,
    total_tokens: u64,
}

/// Okapi BM25 parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(Error::InvalidParam(format!("k1 must be positive, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidParam(format!("b must lie in [0,1], got {}", self.b)));
        }
        Ok(())
    }
}

/// Sequential-dependence parameters: feature weights, unordered-window
/// width, and Dirichlet smoothing mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdmParams {
    pub lambda_t: f64,
    pub lambda_o: f64,
    pub lambda_u: f64,
    pub window: u32,
    pub mu: f64,
}

impl Default for SdmParams {
    fn default() -> Self {
        SdmParams {
            lambda_t: 0.85,
            lambda_o: 0.10,
            lambda_u: 0.05,
            window: 8,
            mu: 2500.0,
        }
    }
}

impl SdmParams {
    pub fn validate(&self) -> Result<()> {
        for (name, l) in [
            ("lambda_t", self.lambda_t),
            ("lambda_o", self.lambda_o),
            ("lambda_u", self.lambda_u),
        ] {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidParam(format!("{name} must be nonnegative, got {l}")));
            }
        }
        let sum = self.lambda_t + self.lambda_o + self.lambda_u;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParam(format!("lambdas must sum to 1, got {sum}")));
        }
        if self.window < 2 {
            return Err(Error::InvalidParam(format!("window must be >= 2, got {}", self.window)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParam(format!("mu must be positive, got {}", self.mu)));
        }
        Ok(())
    }
}

impl InvertedIndex {
    /// Index every sentence with at least one token, carrying the corpus
    /// statistics along for scoring.
    pub fn build(corpus: &Corpus) -> Self {
        Self::build_with_stats(corpus, corpus.stats().clone())
    }

    /// Index `corpus` but score under the supplied statistics. Freezing the
    /// statistics while varying the collection isolates the df/avg_len
    /// dependence of BM25, which some of the tests rely on.
    pub fn build_with_stats(corpus: &Corpus, stats: TermStats) -> Self {
        let mut docs = Vec::new();
        let mut by_id = HashMap::new();
        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        let mut total_tokens = 0u64;
        for s in corpus.sentences() {
            if s.tokens.is_empty() {
                continue;
            }
            let doc = docs.len() as u32;
            docs.push(DocEntry {
                id: s.id.clone(),
                len: s.tokens.len() as u32,
            });
            by_id.insert(s.id.clone(), doc);
            total_tokens += s.tokens.len() as u64;
            let mut by_term: HashMap<&str, Vec<u32>> = HashMap::new();
            for (pos, t) in s.tokens.iter().enumerate() {
                by_term.entry(t.as_str()).or_default().push(pos as u32);
            }
            for (term, positions) in by_term {
                postings.entry(term.to_owned()).or_default().push(Posting {
                    doc,
                    tf: positions.len() as u32,
                    positions,
                });
            }
        }
        // Postings are assembled in corpus order; store them sorted by doc id
        // so the layout is deterministic regardless of build order.
        for list in postings.values_mut() {
            list.sort_by(|a, b| docs[a.doc as usize].id.cmp(&docs[b.doc as usize].id));
        }
        InvertedIndex {
            docs,
            by_id,
            postings,
            stats,
            total_tokens,
        }
    }

    /// Number of indexed (non-empty) documents.
    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn doc_id(&self, doc: u32) -> &str {
        &self.docs[doc as usize].id
    }

    pub fn doc_len(&self, doc: u32) -> u32 {
        self.docs[doc as usize].len
    }

    pub fn doc_index(&self, id: &str) -> Option<u32> {
        self.by_id.get(id).copied()
    }

    pub fn posting(&self, term: &str) -> Option<&[Posting]> {
        self.postings.get(term).map(Vec::as_slice)
    }

    /// Collection frequency: total occurrences of a term.
    pub fn collection_freq(&self, term: &str) -> u64 {
        self.posting(term)
            .map_or(0, |list| list.iter().map(|p| u64::from(p.tf)).sum())
    }

    /// Total token count across indexed documents.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn stats(&self) -> &TermStats {
        &self.stats
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    /// Index codec. Layout, little-endian: magic `SEMX`, u32 version, u32
    /// collection sentence count, f64 collection average length, u64 doc
    /// count, per doc a length-prefixed id and u32 token count; then u64
    /// term count and, per term sorted ascending, the length-prefixed term,
    /// u64 posting count, and per posting u32 doc row, u32 tf, and tf u32
    /// positions. Postings are ordered by ascending doc id.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let io = |e: std::io::Error| Error::bad_format("lexical index", e.to_string());
        format::write_header(w, INDEX_MAGIC, FORMAT_VERSION).map_err(io)?;
        w.write_u32::<LittleEndian>(self.stats.n).map_err(io)?;
        w.write_f64::<LittleEndian>(self.stats.avg_len).map_err(io)?;
        w.write_u64::<LittleEndian>(self.docs.len() as u64).map_err(io)?;
        for d in &self.docs {
            format::write_string(w, &d.id).map_err(io)?;
            w.write_u32::<LittleEndian>(d.len).map_err(io)?;
        }
        let mut terms: Vec<&String> = self.postings.keys().collect();
        terms.sort();
        w.write_u64::<LittleEndian>(terms.len() as u64).map_err(io)?;
        for term in terms {
            format::write_string(w, term).map_err(io)?;
            let list = &self.postings[term];
            w.write_u64::<LittleEndian>(list.len() as u64).map_err(io)?;
            for p in list {
                w.write_u32::<LittleEndian>(p.doc).map_err(io)?;
                w.write_u32::<LittleEndian>(p.tf).map_err(io)?;
                for &pos in &p.positions {
                    w.write_u32::<LittleEndian>(pos).map_err(io)?;
                }
            }
        }
        Ok(())
    }

    /// Decode and validate an index; see [`InvertedIndex::write_to`] for the
    /// layout. Structural violations (unsorted positions, tf mismatches,
    /// out-of-range rows, duplicates) are rejected.
    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        const WHAT: &str = "lexical index";
        let version = format::read_header(r, INDEX_MAGIC, WHAT)?;
        format::expect_version(version, FORMAT_VERSION, WHAT)?;
        let n = r
            .read_u32::<LittleEndian>()
            .map_err(|e| Error::bad_format(WHAT, format!("missing sentence count: {e}")))?;
        let avg_len = r
            .read_f64::<LittleEndian>()
            .map_err(|e| Error::bad_format(WHAT, format!("missing average length: {e}")))?;
        if !(avg_len.is_finite() && avg_len >= 0.0) {
            return Err(Error::bad_format(WHAT, format!("bad average length {avg_len}")));
        }
        let doc_count = r
            .read_u64::<LittleEndian>()
            .map_err(|e| Error::bad_format(WHAT, format!("missing doc count: {e}")))?;
        let mut docs = Vec::new();
        let mut by_id = HashMap::new();
        let mut total_tokens = 0u64;
        for _ in 0..doc_count {
            let id = format::read_string(r, WHAT)?;
            let len = r
                .read_u32::<LittleEndian>()
                .map_err(|e| Error::bad_format(WHAT, format!("truncated doc entry: {e}")))?;
            if len == 0 {
                return Err(Error::bad_format(WHAT, format!("doc {id:?} has zero length")));
            }
            if by_id.insert(id.clone(), docs.len() as u32).is_some() {
                return Err(Error::bad_format(WHAT, format!("duplicate doc id {id:?}")));
            }
            total_tokens += u64::from(len);
            docs.push(DocEntry { id, len });
        }
        if (docs.len() as u64) > u64::from(n) {
            return Err(Error::bad_format(
                WHAT,
                format!("{} docs exceed collection count {n}", docs.len()),
            ));
        }
        let term_count = r
            .read_u64::<LittleEndian>()
            .map_err(|e| Error::bad_format(WHAT, format!("missing term count: {e}")))?;
        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        let mut df: HashMap<String, u32> = HashMap::new();
        for _ in 0..term_count {
            let term = format::read_string(r, WHAT)?;
            if postings.contains_key(&term) {
                return Err(Error::bad_format(WHAT, format!("duplicate term {term:?}")));
            }
            let posting_count = r
                .read_u64::<LittleEndian>()
                .map_err(|e| Error::bad_format(WHAT, format!("truncated posting count: {e}")))?;
            if posting_count == 0 || posting_count > docs.len() as u64 {
                return Err(Error::bad_format(
                    WHAT,
                    format!("term {term:?} has implausible posting count {posting_count}"),
                ));
            }
            let mut list = Vec::with_capacity(posting_count as usize);
            for _ in 0..posting_count {
                let doc = r
                    .read_u32::<LittleEndian>()
                    .map_err(|e| Error::bad_format(WHAT, format!("truncated posting: {e}")))?;
                let Some(entry) = docs.get(doc as usize) else {
                    return Err(Error::bad_format(WHAT, format!("posting row {doc} out of range")));
                };
                let tf = r
                    .read_u32::<LittleEndian>()
                    .map_err(|e| Error::bad_format(WHAT, format!("truncated posting: {e}")))?;
                if tf == 0 || tf > entry.len {
                    return Err(Error::bad_format(
                        WHAT,
                        format!("tf {tf} out of range for doc {:?}", entry.id),
                    ));
                }
                let mut positions = Vec::with_capacity(tf as usize);
                let mut prev: Option<u32> = None;
                for _ in 0..tf {
                    let pos = r
                        .read_u32::<LittleEndian>()
                        .map_err(|e| Error::bad_format(WHAT, format!("truncated positions: {e}")))?;
                    if pos >= entry.len || prev.is_some_and(|p| pos <= p) {
                        return Err(Error::bad_format(
                            WHAT,
                            format!("positions not strictly ascending within doc {:?}", entry.id),
                        ));
                    }
                    prev = Some(pos);
                    positions.push(pos);
                }
                if let Some(last) = list.last() {
                    let last: &Posting = last;
                    if docs[last.doc as usize].id >= entry.id {
                        return Err(Error::bad_format(
                            WHAT,
                            format!("postings for {term:?} not sorted by doc id"),
                        ));
                    }
                }
                list.push(Posting { doc, tf, positions });
            }
            df.insert(term.clone(), list.len() as u32);
            postings.insert(term, list);
        }
        format::expect_eof(r, WHAT)?;
        let stats = TermStats { df, n, avg_len };
        Ok(InvertedIndex {
            docs,
            by_id,
            postings,
            stats,
            total_tokens,
        })
    }

    pub fn write_to_path(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut buf = std::io::BufWriter::new(&mut f);
        self.write_to(&mut buf)
    }

    pub fn read_from_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut buf = std::io::BufReader::new(f);
        InvertedIndex::read_from(&mut buf)
    }
}

/// Occurrences of `a` immediately followed by `b`, from two ascending
/// position lists of the same document.
pub fn ordered_count(a_positions: &[u32], b_positions: &[u32]) -> u32 {
    a_positions
        .iter()
        .filter(|&&i| b_positions.binary_search(&(i + 1)).is_ok())
        .count() as u32
}

/// Co-occurrences of `a` and `b` within a window of `window` tokens, in
/// either order: position pairs spanning fewer than `window` tokens. When
/// both positions come from the same term's list, each unordered pair is
/// counted once.
pub fn unordered_count(
    a_positions: &[u32],
    b_positions: &[u32],
    window: u32,
    same_term: bool,
) -> u32 {
    let reach = u64::from(window) - 1;
    let mut count = 0u32;
    for &i in a_positions {
        let lo = u64::from(i).saturating_sub(reach);
        let hi = u64::from(i) + reach;
        let from = b_positions.partition_point(|&j| u64::from(j) < lo);
        let to = b_positions.partition_point(|&j| u64::from(j) <= hi);
        let mut in_range = (to - from) as u32;
        if same_term {
            // Drop the self-pair; halving at the end de-duplicates (i,j)/(j,i).
            in_range -= 1;
        }
        count += in_range;
    }
    if same_term {
        count / 2
    } else {
        count
    }
}

/// Okapi BM25 over the index. Sentences sharing no term with the query are
/// omitted; an empty query yields an empty list.
pub fn bm25_search(
    query: &[String],
    index: &InvertedIndex,
    params: &Bm25Params,
    k: usize,
) -> Result<RankedList> {
    params.validate()?;
    if k == 0 {
        return Err(Error::InvalidParam("result depth k must be >= 1".into()));
    }
    let stats = index.stats();
    let n = f64::from(stats.n);
    let mut unique: Vec<&String> = query.iter().collect();
    unique.sort_unstable();
    unique.dedup();
    let mut scores: HashMap<u32, f64> = HashMap::new();
    for term in unique {
        let Some(list) = index.posting(term) else {
            continue;
        };
        let df = f64::from(stats.df(term));
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        for p in list {
            let tf = f64::from(p.tf);
            let len = f64::from(index.doc_len(p.doc));
            let norm = params.k1 * (1.0 - params.b + params.b * len / stats.avg_len);
            let contribution = idf * tf * (params.k1 + 1.0) / (tf + norm);
            *scores.entry(p.doc).or_insert(0.0) += contribution;
        }
    }
    let scored: Vec<(String, f64)> = scores
        .into_iter()
        .map(|(doc, s)| (index.doc_id(doc).to_owned(), s))
        .collect();
    Ok(RankedList::from_scores(String::new(), scored, k))
}

/// Which sentences a sequential-dependence search scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdmCandidates {
    /// Sentences matching at least one query term (the default).
    AnyTermMatch,
    /// Every indexed sentence, regardless of overlap.
    FullCorpus,
}

/// Sequential-dependence scoring: a weighted sum of log Dirichlet-smoothed
/// estimates for query unigrams, adjacent query bigrams in order, and
/// adjacent query bigrams within an unordered window.
///
/// Each estimate is `(c(f,s) + mu * c(f,C) / |C|) / (len(s) + mu)` where
/// `|C|` is the total token count of the collection. A feature that never
/// occurs in the collection has an identically zero estimate for every
/// sentence, so such features are dropped rather than sending all scores to
/// negative infinity; dropping them shifts every candidate equally and
/// preserves the ranking.
pub fn sdm_search(
    query: &[String],
    index: &InvertedIndex,
    params: &SdmParams,
    k: usize,
    candidates: SdmCandidates,
) -> Result<RankedList> {
    params.validate()?;
    if k == 0 {
        return Err(Error::InvalidParam("result depth k must be >= 1".into()));
    }
    if query.is_empty() || index.doc_count() == 0 {
        return Ok(RankedList {
            query_id: String::new(),
            entries: Vec::new(),
        });
    }
    let total = index.total_tokens() as f64;

    // Per-term doc -> posting lookup, shared by all features.
    let term_docs: HashMap<&str, HashMap<u32, &Posting>> = query
        .iter()
        .map(|t| {
            let map = index
                .posting(t)
                .map(|list| list.iter().map(|p| (p.doc, p)).collect())
                .unwrap_or_default();
            (t.as_str(), map)
        })
        .collect();

    let candidate_docs: Vec<u32> = match candidates {
        SdmCandidates::FullCorpus => (0..index.doc_count() as u32).collect(),
        SdmCandidates::AnyTermMatch => {
            let mut set: HashSet<u32> = HashSet::new();
            for map in term_docs.values() {
                set.extend(map.keys().copied());
            }
            let mut v: Vec<u32> = set.into_iter().collect();
            v.sort_unstable();
            v
        }
    };
    if candidate_docs.is_empty() {
        return Ok(RankedList {
            query_id: String::new(),
            entries: Vec::new(),
        });
    }

    // Collection frequencies per feature, with zero-frequency features
    // dropped up front.
    let unigrams: Vec<(&str, f64)> = query
        .iter()
        .filter_map(|t| {
            let cf = index.collection_freq(t);
            if cf == 0 {
                log::debug!("query term {t:?} absent from collection; dropped from scoring");
                None
            } else {
                Some((t.as_str(), cf as f64))
            }
        })
        .collect();

    struct PairFeature<'a> {
        a: &'a str,
        b: &'a str,
        ordered_cf: f64,
        unordered_cf: f64,
    }
    let mut pairs = Vec::new();
    for w in query.windows(2) {
        let (a, b) = (w[0].as_str(), w[1].as_str());
        let (mut ordered_cf, mut unordered_cf) = (0u64, 0u64);
        if let (Some(pa), Some(pb)) = (index.posting(a), index.posting(b)) {
            let b_by_doc: HashMap<u32, &Posting> = pb.iter().map(|p| (p.doc, p)).collect();
            for p in pa {
                if let Some(q) = b_by_doc.get(&p.doc) {
                    ordered_cf += u64::from(ordered_count(&p.positions, &q.positions));
                    unordered_cf += u64::from(unordered_count(
                        &p.positions,
                        &q.positions,
                        params.window,
                        a == b,
                    ));
                }
            }
        }
        pairs.push(PairFeature {
            a,
            b,
            ordered_cf: ordered_cf as f64,
            unordered_cf: unordered_cf as f64,
        });
    }

    let mut scored = Vec::with_capacity(candidate_docs.len());
    for &doc in &candidate_docs {
        let len = f64::from(index.doc_len(doc));
        let denom = len + params.mu;
        let mut score = 0.0;
        for &(t, cf) in &unigrams {
            let c = term_docs[t].get(&doc).map_or(0.0, |p| f64::from(p.tf));
            score += params.lambda_t * ((c + params.mu * cf / total) / denom).ln();
        }
        for pf in &pairs {
            let (pa, pb) = (term_docs[pf.a].get(&doc), term_docs[pf.b].get(&doc));
            let (c_o, c_u) = match (pa, pb) {
                (Some(p), Some(q)) => (
                    f64::from(ordered_count(&p.positions, &q.positions)),
                    f64::from(unordered_count(
                        &p.positions,
                        &q.positions,
                        params.window,
                        pf.a == pf.b,
                    )),
                ),
                _ => (0.0, 0.0),
            };
            if pf.ordered_cf > 0.0 {
                score += params.lambda_o
                    * ((c_o + params.mu * pf.ordered_cf / total) / denom).ln();
            }
            if pf.unordered_cf > 0.0 {
                score += params.lambda_u
                    * ((c_u + params.mu * pf.unordered_cf / total) / denom).ln();
            }
        }
        scored.push((index.doc_id(doc).to_owned(), score));
    }
    Ok(RankedList::from_scores(String::new(), scored, k))
}
