//! Token embeddings and sentence pooling.
//!
//! An [`EmbeddingProvider`] turns a token sequence into a matrix of
//! per-token vectors. Two providers are built in: a deterministic stub that
//! expands a seeded hash of each term (with optional synonym folding, so
//! lexically different surface forms can share a vector), and a file-backed
//! provider that serves vectors from a precomputed table.
//!
//! Sentence vectors come from pooling the token matrix: either a plain mean,
//! or a frequency-weighted average in which each token row is weighted by
//! its inverse document frequency and each component is scaled by the
//! inverse standard deviation of that component across the corpus. Repeated
//! tokens contribute one row per occurrence, which is how term frequency
//! enters the weighted form.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::corpus::{idf, TermStats};
use crate::error::{Error, Result};
use crate::format;
use crate::seeded::{hash_term, SeededStream};

/// Variance floor added under the square root when scaling components.
pub const VARIANCE_EPSILON: f64 = 1e-12;

const VECTOR_MAGIC: &[u8; 4] = b"SEMV";
const STATS_MAGIC: &[u8; 4] = b"SEMS";
const FORMAT_VERSION: u32 = 1;

/// Per-token vectors for one sentence; row `j` embeds `terms[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    pub d: usize,
    pub terms: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TokenMatrix {
    pub fn token_count(&self) -> usize {
        self.rows.len()
    }
}

/// A pooled sentence vector tagged with its sentence id.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceVector {
    pub sentence_id: String,
    pub components: Vec<f64>,
}

/// Which pooling rule turns a token matrix into a sentence vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolingMode {
    /// Frequency-weighted, variance-scaled average.
    Tfidf,
    /// Plain unweighted mean of the token rows.
    Mean,
}

/// Source of per-token vectors.
pub trait EmbeddingProvider {
    fn dim(&self) -> usize;
    fn embed(&self, tokens: &[String]) -> Result<TokenMatrix>;
}

/// Deterministic stand-in for a learned token embedder. Each distinct term
/// gets a vector expanded from a seeded hash, so the same (seed, term) pair
/// produces the same vector on every run. An optional synonym table folds
/// surface forms onto a canonical term before hashing, which makes
/// lexically disjoint paraphrases embed identically.
#[derive(Debug, Clone)]
pub struct StubProvider {
    d: usize,
    seed: u64,
    synonyms: HashMap<String, String>,
}

impl StubProvider {
    pub fn new(d: usize, seed: u64) -> Self {
        StubProvider {
            d,
            seed,
            synonyms: HashMap::new(),
        }
    }

    pub fn with_synonyms(d: usize, seed: u64, synonyms: HashMap<String, String>) -> Self {
        StubProvider { d, seed, synonyms }
    }

    fn canonical<'a>(&'a self, term: &'a str) -> &'a str {
        self.synonyms.get(term).map_or(term, String::as_str)
    }

    /// The vector for one term, independent of sentence context.
    pub fn term_vector(&self, term: &str) -> Vec<f64> {
        let mut stream = SeededStream::new(hash_term(self.seed, self.canonical(term)));
        (0..self.d).map(|_| stream.next_signed()).collect()
    }
}

impl EmbeddingProvider for StubProvider {
    fn dim(&self) -> usize {
        self.d
    }

    fn embed(&self, tokens: &[String]) -> Result<TokenMatrix> {
        let rows = tokens.iter().map(|t| self.term_vector(t)).collect();
        Ok(TokenMatrix {
            d: self.d,
            terms: tokens.to_vec(),
            rows,
        })
    }
}

/// What a file-backed provider does with a term missing from its table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownTermPolicy {
    /// Fail the embedding call, naming the term.
    Error,
    /// Substitute a zero vector and log a warning.
    Zero,
}

/// Serves vectors from a fixed term table loaded from an embedding file.
#[derive(Debug, Clone)]
pub struct FileProvider {
    d: usize,
    vectors: HashMap<String, Vec<f64>>,
    policy: UnknownTermPolicy,
}

impl FileProvider {
    pub fn new(
        d: usize,
        vectors: HashMap<String, Vec<f64>>,
        policy: UnknownTermPolicy,
    ) -> Result<Self> {
        for (term, v) in &vectors {
            if v.len() != d {
                return Err(Error::bad_format(
                    "embedding table",
                    format!("vector for {term:?} has {} components, expected {d}", v.len()),
                ));
            }
        }
        Ok(FileProvider {
            d,
            vectors,
            policy,
        })
    }

    pub fn from_reader(r: &mut impl Read, policy: UnknownTermPolicy) -> Result<Self> {
        let (d, entries) = read_embeddings(r)?;
        FileProvider::new(d, entries.into_iter().collect(), policy)
    }

    pub fn from_path(path: &Path, policy: UnknownTermPolicy) -> Result<Self> {
        let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        FileProvider::from_reader(&mut f, policy)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }
}

impl EmbeddingProvider for FileProvider {
    fn dim(&self) -> usize {
        self.d
    }

    fn embed(&self, tokens: &[String]) -> Result<TokenMatrix> {
        let mut rows = Vec::with_capacity(tokens.len());
        for t in tokens {
            match self.vectors.get(t) {
                Some(v) => rows.push(v.clone()),
                None => match self.policy {
                    UnknownTermPolicy::Error => return Err(Error::UnknownTerm(t.clone())),
                    UnknownTermPolicy::Zero => {
                        log::warn!("term {t:?} missing from embedding table; using zeros");
                        rows.push(vec![0.0; self.d]);
                    }
                },
            }
        }
        Ok(TokenMatrix {
            d: self.d,
            terms: tokens.to_vec(),
            rows,
        })
    }
}

/// A decoded embedding table: the dimensionality plus one
/// `(term, vector)` entry per known term.
pub type EmbeddingTable = (usize, Vec<(String, Vec<f64>)>);

/// Embedding table codec. Layout, little-endian: magic `SEMV`, u32 version,
/// u32 dimensionality, u64 entry count, then per entry a length-prefixed
/// UTF-8 term followed by `d` float32 components. Entries are written in
/// ascending term order so serialization is deterministic.
pub fn write_embeddings(
    w: &mut impl Write,
    d: usize,
    entries: &[(String, Vec<f64>)],
) -> Result<()> {
    let mut sorted: Vec<&(String, Vec<f64>)> = entries.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let io = |e: std::io::Error| Error::bad_format("embedding file", e.to_string());
    format::write_header(w, VECTOR_MAGIC, FORMAT_VERSION).map_err(io)?;
    w.write_u32::<LittleEndian>(d as u32).map_err(io)?;
    w.write_u64::<LittleEndian>(sorted.len() as u64).map_err(io)?;
    for (term, v) in sorted {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.len(),
            });
        }
        format::write_string(w, term).map_err(io)?;
        format::write_f32_vector(w, v).map_err(io)?;
    }
    Ok(())
}

/// Decode an embedding table; see [`write_embeddings`] for the layout.
pub fn read_embeddings(r: &mut impl Read) -> Result<EmbeddingTable> {
    const WHAT: &str = "embedding file";
    let version = format::read_header(r, VECTOR_MAGIC, WHAT)?;
    format::expect_version(version, FORMAT_VERSION, WHAT)?;
    let d = format::check_dim(
        r.read_u32::<LittleEndian>()
            .map_err(|e| Error::bad_format(WHAT, format!("missing dimensionality: {e}")))?,
        WHAT,
    )?;
    let count = r
        .read_u64::<LittleEndian>()
        .map_err(|e| Error::bad_format(WHAT, format!("missing entry count: {e}")))?;
    let mut entries = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for _ in 0..count {
        let term = format::read_string(r, WHAT)?;
        if !seen.insert(term.clone()) {
            return Err(Error::bad_format(WHAT, format!("duplicate term {term:?}")));
        }
        let v = format::read_f32_vector(r, d, WHAT)?;
        entries.push((term, v));
    }
    format::expect_eof(r, WHAT)?;
    Ok((d, entries))
}

/// Parse a synonym table: one `surface<TAB>canonical` pair per line, blank
/// lines and `#` comments ignored. Used to configure [`StubProvider`].
pub fn read_synonyms(reader: impl BufRead, source: &Path) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split('\t');
        let (surface, canonical) = match (parts.next(), parts.next(), parts.next()) {
            (Some(s), Some(c), None) if !s.is_empty() && !c.is_empty() => (s, c),
            _ => {
                return Err(Error::parse(
                    source,
                    idx + 1,
                    "expected two tab-separated fields: surface<TAB>canonical",
                ))
            }
        };
        if map.insert(surface.to_owned(), canonical.to_owned()).is_some() {
            return Err(Error::parse(
                source,
                idx + 1,
                format!("surface form {surface:?} mapped twice"),
            ));
        }
    }
    Ok(map)
}

pub fn read_synonyms_path(path: &Path) -> Result<HashMap<String, String>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_synonyms(std::io::BufReader::new(file), path)
}

/// Write a synonym map as tab-separated `surface canonical` lines, sorted
/// by surface form so the output is deterministic.
pub fn write_synonyms(w: &mut impl Write, map: &HashMap<String, String>) -> std::io::Result<()> {
    let mut entries: Vec<(&String, &String)> = map.iter().collect();
    entries.sort();
    for (surface, canonical) in entries {
        writeln!(w, "{surface}\t{canonical}")?;
    }
    Ok(())
}

pub fn write_synonyms_path(path: &Path, map: &HashMap<String, String>) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_synonyms(&mut f, map).map_err(|e| Error::io(path, e))
}

/// Streaming per-component moments over token vectors, kept in the
/// numerically stable count/mean/M2 form. Accumulation order does not change
/// the result beyond rounding, and two partial accumulators can be merged,
/// so corpora can be processed in chunks.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentStats {
    d: usize,
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl ComponentStats {
    pub fn new(d: usize) -> Self {
        ComponentStats {
            d,
            count: 0,
            mean: vec![0.0; d],
            m2: vec![0.0; d],
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Fold one token vector into the running moments.
    pub fn push(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: v.len(),
            });
        }
        self.count += 1;
        let n = self.count as f64;
        for (i, &x) in v.iter().enumerate() {
            let delta = x - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (x - self.mean[i]);
        }
        Ok(())
    }

    /// Fold every row of a token matrix.
    pub fn accumulate(&mut self, matrix: &TokenMatrix) -> Result<()> {
        if matrix.d != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: matrix.d,
            });
        }
        for row in &matrix.rows {
            self.push(row)?;
        }
        Ok(())
    }

    /// Combine two partial accumulations into one, as if every vector had
    /// been pushed into a single accumulator.
    pub fn merge(&mut self, other: &ComponentStats) -> Result<()> {
        if other.d != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: other.d,
            });
        }
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            *self = other.clone();
            return Ok(());
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        for i in 0..self.d {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
        Ok(())
    }

    /// Population variance per component; zeros when nothing was pushed.
    pub fn variance(&self) -> Vec<f64> {
        if self.count == 0 {
            return vec![0.0; self.d];
        }
        let n = self.count as f64;
        self.m2.iter().map(|&m| m / n).collect()
    }

    /// Stats codec. Layout, little-endian: magic `SEMS`, u32 version, u32
    /// dimensionality, u64 count, `d` float64 means, `d` float64 variances.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let io = |e: std::io::Error| Error::bad_format("stats file", e.to_string());
        format::write_header(w, STATS_MAGIC, FORMAT_VERSION).map_err(io)?;
        w.write_u32::<LittleEndian>(self.d as u32).map_err(io)?;
        w.write_u64::<LittleEndian>(self.count).map_err(io)?;
        format::write_f64_vector(w, &self.mean).map_err(io)?;
        format::write_f64_vector(w, &self.variance()).map_err(io)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        const WHAT: &str = "stats file";
        let version = format::read_header(r, STATS_MAGIC, WHAT)?;
        format::expect_version(version, FORMAT_VERSION, WHAT)?;
        let d = format::check_dim(
            r.read_u32::<LittleEndian>()
                .map_err(|e| Error::bad_format(WHAT, format!("missing dimensionality: {e}")))?,
            WHAT,
        )?;
        let count = r
            .read_u64::<LittleEndian>()
            .map_err(|e| Error::bad_format(WHAT, format!("missing count: {e}")))?;
        let mean = format::read_f64_vector(r, d, WHAT)?;
        let variance = format::read_f64_vector(r, d, WHAT)?;
        format::expect_eof(r, WHAT)?;
        for (i, &v) in variance.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::bad_format(
                    WHAT,
                    format!("variance[{i}] = {v} is not a finite non-negative number"),
                ));
            }
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::bad_format(WHAT, "non-finite mean component"));
        }
        let n = count as f64;
        let m2 = variance.iter().map(|&v| v * n).collect();
        Ok(ComponentStats { d, count, mean, m2 })
    }

    pub fn write_to_path(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(&mut f)
    }

    pub fn read_from_path(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        ComponentStats::read_from(&mut f)
    }
}

/// Frequency-weighted, variance-scaled pooling.
///
/// With `w_j = idf(terms[j])` and `s_i = sqrt(variance_i + epsilon)`, the
/// pooled component is `y_i = (sum_j w_j * x_ij / s_i) / (sum_j w_j)`.
/// Repeated tokens appear as repeated rows, so a term occurring `tf` times
/// carries total weight `tf * idf`.
pub fn pool_tfidf(
    matrix: &TokenMatrix,
    stats: &TermStats,
    comp: &ComponentStats,
) -> Result<Vec<f64>> {
    if matrix.rows.is_empty() {
        return Err(Error::Degenerate(
            "cannot pool a sentence with no tokens".into(),
        ));
    }
    if comp.d() != matrix.d {
        return Err(Error::DimensionMismatch {
            expected: matrix.d,
            got: comp.d(),
        });
    }
    let variance = comp.variance();
    let scale: Vec<f64> = variance
        .iter()
        .map(|&v| 1.0 / (v + VARIANCE_EPSILON).sqrt())
        .collect();
    let mut acc = vec![0.0; matrix.d];
    let mut weight_sum = 0.0;
    for (term, row) in matrix.terms.iter().zip(&matrix.rows) {
        let w = idf(term, stats);
        weight_sum += w;
        for i in 0..matrix.d {
            acc[i] += w * row[i] * scale[i];
        }
    }
    if weight_sum <= 0.0 {
        return Err(Error::Degenerate("pooling weights sum to zero".into()));
    }
    for a in &mut acc {
        *a /= weight_sum;
    }
    Ok(acc)
}

/// Plain mean of the token rows.
pub fn pool_mean(matrix: &TokenMatrix) -> Result<Vec<f64>> {
    if matrix.rows.is_empty() {
        return Err(Error::Degenerate(
            "cannot pool a sentence with no tokens".into(),
        ));
    }
    let n = matrix.rows.len() as f64;
    let mut acc = vec![0.0; matrix.d];
    for row in &matrix.rows {
        for i in 0..matrix.d {
            acc[i] += row[i];
        }
    }
    for a in &mut acc {
        *a /= n;
    }
    Ok(acc)
}

/// Dispatch on pooling mode; the weighted mode needs corpus-level stats.
pub fn pool(
    matrix: &TokenMatrix,
    mode: PoolingMode,
    context: Option<(&TermStats, &ComponentStats)>,
) -> Result<Vec<f64>> {
    match mode {
        PoolingMode::Mean => pool_mean(matrix),
        PoolingMode::Tfidf => {
            let (stats, comp) = context.ok_or_else(|| {
                Error::InvalidParam("weighted pooling requires term and component stats".into())
            })?;
            pool_tfidf(matrix, stats, comp)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, SentenceRecord};
    use std::io::Cursor;

    #[test]
    fn stub_vectors_are_deterministic_and_seed_sensitive() {
        let p1 = StubProvider::new(16, 42);
        let p2 = StubProvider::new(16, 42);
        let p3 = StubProvider::new(16, 43);
        let a = p1.term_vector("negligence");
        assert_eq!(a.len(), 16);
        assert_eq!(a, p2.term_vector("negligence"));
        assert_ne!(a, p3.term_vector("negligence"));
        assert_ne!(a, p1.term_vector("estoppel"));
        assert!(a.iter().all(|x| (-1.0..1.0).contains(x)));
    }

    #[test]
    fn synonym_folding_shares_vectors() {
        let mut syn = HashMap::new();
        syn.insert("automobile".to_owned(), "car".to_owned());
        let p = StubProvider::with_synonyms(8, 7, syn);
        assert_eq!(p.term_vector("automobile"), p.term_vector("car"));
        assert_ne!(p.term_vector("truck"), p.term_vector("car"));
    }

    #[test]
    fn embed_produces_one_row_per_token_occurrence() {
        let p = StubProvider::new(4, 1);
        let tokens: Vec<String> = ["cat", "cat", "dog"].iter().map(|s| s.to_string()).collect();
        let m = p.embed(&tokens).unwrap();
        assert_eq!(m.token_count(), 3);
        assert_eq!(m.rows[0], m.rows[1]);
        assert_ne!(m.rows[0], m.rows[2]);
    }

    #[test]
    fn embedding_file_round_trips_bit_exactly() {
        // Source vectors are f32-representable, so write/read is lossless.
        let mut stream = SeededStream::new(5);
        let entries: Vec<(String, Vec<f64>)> = (0..50)
            .map(|i| {
                let v: Vec<f64> = (0..12)
                    .map(|_| f64::from(stream.next_signed() as f32))
                    .collect();
                (format!("term{i:02}"), v)
            })
            .collect();
        let mut buf = Vec::new();
        write_embeddings(&mut buf, 12, &entries).unwrap();
        let (d, back) = read_embeddings(&mut Cursor::new(&buf)).unwrap();
        assert_eq!(d, 12);
        assert_eq!(back.len(), 50);
        let sorted: std::collections::HashMap<_, _> = entries.into_iter().collect();
        for (term, v) in back {
            assert_eq!(v, sorted[&term], "mismatch for {term}");
        }
        // Serialization is order-independent on input but sorted on disk.
        let mut buf2 = Vec::new();
        let mut reversed: Vec<(String, Vec<f64>)> = sorted.into_iter().collect();
        reversed.sort_by(|a, b| b.0.cmp(&a.0));
        write_embeddings(&mut buf2, 12, &reversed).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn embedding_file_rejects_corruption() {
        let entries = vec![("a".to_owned(), vec![0.5, -0.5])];
        let mut buf = Vec::new();
        write_embeddings(&mut buf, 2, &entries).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(read_embeddings(&mut Cursor::new(&bad_magic)).is_err());

        let truncated = &buf[..buf.len() - 3];
        assert!(read_embeddings(&mut Cursor::new(truncated)).is_err());

        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(read_embeddings(&mut Cursor::new(&trailing)).is_err());
    }

    #[test]
    fn file_provider_applies_unknown_term_policy() {
        let mut vectors = HashMap::new();
        vectors.insert("known".to_owned(), vec![1.0, 2.0]);
        let strict = FileProvider::new(2, vectors.clone(), UnknownTermPolicy::Error).unwrap();
        let tokens: Vec<String> = vec!["known".into(), "missing".into()];
        match strict.embed(&tokens) {
            Err(Error::UnknownTerm(t)) => assert_eq!(t, "missing"),
            other => panic!("expected unknown-term error, got {other:?}"),
        }
        let lenient = FileProvider::new(2, vectors, UnknownTermPolicy::Zero).unwrap();
        let m = lenient.embed(&tokens).unwrap();
        assert_eq!(m.rows[1], vec![0.0, 0.0]);
    }

    #[test]
    fn synonym_file_parses_and_rejects_bad_lines() {
        let good = "# comment\nauto\tcar\n\ntruck\tlorry\n";
        let map = read_synonyms(good.as_bytes(), Path::new("syn.tsv")).unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map["auto"], "car");

        let bad = "auto car\n";
        let err = read_synonyms(bad.as_bytes(), Path::new("syn.tsv")).unwrap_err();
        assert!(err.to_string().contains("syn.tsv:1"));

        let dup = "auto\tcar\nauto\tvehicle\n";
        assert!(read_synonyms(dup.as_bytes(), Path::new("syn.tsv")).is_err());
    }

    /// Two-pass oracle: exact mean, then squared deviations.
    fn two_pass(vectors: &[Vec<f64>], d: usize) -> (Vec<f64>, Vec<f64>) {
        let n = vectors.len() as f64;
        let mut mean = vec![0.0; d];
        for v in vectors {
            for i in 0..d {
                mean[i] += v[i];
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for v in vectors {
            for i in 0..d {
                let dev = v[i] - mean[i];
                var[i] += dev * dev;
            }
        }
        for v in &mut var {
            *v /= n;
        }
        (mean, var)
    }

    fn random_vectors(count: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut s = SeededStream::new(seed);
        (0..count)
            .map(|_| (0..d).map(|_| s.next_signed() * 3.0).collect())
            .collect()
    }

    #[test]
    fn streaming_moments_match_two_pass_oracle() {
        let d = 6;
        let data = random_vectors(500, d, 99);
        let mut stats = ComponentStats::new(d);
        for v in &data {
            stats.push(v).unwrap();
        }
        let (mean, var) = two_pass(&data, d);
        for i in 0..d {
            assert!((stats.mean()[i] - mean[i]).abs() < 1e-10, "mean[{i}]");
            assert!((stats.variance()[i] - var[i]).abs() < 1e-10, "var[{i}]");
        }
    }

    #[test]
    fn merged_partials_equal_single_accumulation() {
        let d = 4;
        let data = random_vectors(301, d, 3);
        let mut whole = ComponentStats::new(d);
        for v in &data {
            whole.push(v).unwrap();
        }
        // Three uneven chunks, merged pairwise in two different orders.
        let (a, rest) = data.split_at(97);
        let (b, c) = rest.split_at(120);
        let part = |chunk: &[Vec<f64>]| {
            let mut s = ComponentStats::new(d);
            for v in chunk {
                s.push(v).unwrap();
            }
            s
        };
        let (sa, sb, sc) = (part(a), part(b), part(c));
        let mut left = sa.clone();
        left.merge(&sb).unwrap();
        left.merge(&sc).unwrap();
        let mut right = sb.clone();
        right.merge(&sc).unwrap();
        let mut sa2 = sa;
        sa2.merge(&right).unwrap();
        for merged in [&left, &sa2] {
            assert_eq!(merged.count(), whole.count());
            for i in 0..d {
                assert!((merged.mean()[i] - whole.mean()[i]).abs() < 1e-12);
                assert!((merged.variance()[i] - whole.variance()[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stats_file_round_trips() {
        let d = 5;
        let mut stats = ComponentStats::new(d);
        for v in random_vectors(40, d, 8) {
            stats.push(&v).unwrap();
        }
        let mut buf = Vec::new();
        stats.write_to(&mut buf).unwrap();
        let back = ComponentStats::read_from(&mut Cursor::new(&buf)).unwrap();
        assert_eq!(back.count(), stats.count());
        assert_eq!(back.mean(), stats.mean());
        let (va, vb) = (stats.variance(), back.variance());
        for i in 0..d {
            let tol = 1e-15 * va[i].abs().max(1.0);
            assert!((va[i] - vb[i]).abs() <= tol, "variance[{i}]");
        }
        // A second write is byte-stable.
        let mut buf2 = Vec::new();
        back.write_to(&mut buf2).unwrap();
        let back2 = ComponentStats::read_from(&mut Cursor::new(&buf2)).unwrap();
        let mut buf3 = Vec::new();
        back2.write_to(&mut buf3).unwrap();
        assert_eq!(buf2, buf3);
    }

    #[test]
    fn stats_file_rejects_negative_variance() {
        let mut stats = ComponentStats::new(2);
        stats.push(&[1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        stats.write_to(&mut buf).unwrap();
        // Patch the first variance to -1.0.
        let var_offset = buf.len() - 16;
        buf[var_offset..var_offset + 8].copy_from_slice(&(-1.0f64).to_le_bytes());
        assert!(ComponentStats::read_from(&mut Cursor::new(&buf)).is_err());
    }

    fn corpus_for_pooling() -> Corpus {
        Corpus::from_records(vec![
            SentenceRecord::new("s1", "alpha beta"),
            SentenceRecord::new("s2", "alpha gamma"),
            SentenceRecord::new("s3", "delta delta beta"),
        ])
        .unwrap()
    }

    #[test]
    fn weighted_pooling_matches_closed_form() {
        let corpus = corpus_for_pooling();
        let p = StubProvider::new(3, 11);
        let mut comp = ComponentStats::new(3);
        for s in corpus.sentences() {
            comp.accumulate(&p.embed(&s.tokens).unwrap()).unwrap();
        }
        let tokens: Vec<String> = vec!["alpha".into(), "alpha".into(), "beta".into()];
        let m = p.embed(&tokens).unwrap();
        let got = pool_tfidf(&m, corpus.stats(), &comp).unwrap();

        // Independent arithmetic: sum weights and weighted rows first, then
        // apply the component scale at the end.
        let var = comp.variance();
        let w_alpha = idf("alpha", corpus.stats());
        let w_beta = idf("beta", corpus.stats());
        let wsum = 2.0 * w_alpha + w_beta;
        for i in 0..3 {
            let raw = 2.0 * w_alpha * m.rows[0][i] + w_beta * m.rows[2][i];
            let expected = raw / ((var[i] + VARIANCE_EPSILON).sqrt() * wsum);
            assert!((got[i] - expected).abs() < 1e-12, "component {i}");
        }
    }

    #[test]
    fn pooling_a_single_token_is_the_scaled_row() {
        let corpus = corpus_for_pooling();
        let p = StubProvider::new(4, 2);
        let mut comp = ComponentStats::new(4);
        for s in corpus.sentences() {
            comp.accumulate(&p.embed(&s.tokens).unwrap()).unwrap();
        }
        let tokens: Vec<String> = vec!["beta".into()];
        let m = p.embed(&tokens).unwrap();
        let got = pool_tfidf(&m, corpus.stats(), &comp).unwrap();
        let var = comp.variance();
        for i in 0..4 {
            let expected = m.rows[0][i] / (var[i] + VARIANCE_EPSILON).sqrt();
            assert!((got[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_pooling_averages_rows() {
        let m = TokenMatrix {
            d: 2,
            terms: vec!["a".into(), "b".into()],
            rows: vec![vec![1.0, 3.0], vec![3.0, 5.0]],
        };
        assert_eq!(pool_mean(&m).unwrap(), vec![2.0, 4.0]);
    }

    #[test]
    fn pooling_empty_matrix_is_an_error() {
        let corpus = corpus_for_pooling();
        let comp = ComponentStats::new(2);
        let m = TokenMatrix {
            d: 2,
            terms: vec![],
            rows: vec![],
        };
        assert!(matches!(
            pool_tfidf(&m, corpus.stats(), &comp),
            Err(Error::Degenerate(_))
        ));
        assert!(pool_mean(&m).is_err());
        assert!(matches!(
            pool(&m, PoolingMode::Tfidf, None),
            Err(Error::InvalidParam(_))
        ));
    }

    #[test]
    fn variance_scaling_equalizes_component_spread() {
        // After dividing every token component by sqrt(var + eps), the
        // population variance per component is 1 on dimensions with real
        // spread.
        let p = StubProvider::new(8, 77);
        let terms: Vec<String> = (0..1200).map(|i| format!("t{i}")).collect();
        let m = p.embed(&terms).unwrap();
        let mut comp = ComponentStats::new(8);
        comp.accumulate(&m).unwrap();
        let var = comp.variance();
        let mut rescaled = ComponentStats::new(8);
        for row in &m.rows {
            let scaled: Vec<f64> = row
                .iter()
                .zip(&var)
                .map(|(&x, &v)| x / (v + VARIANCE_EPSILON).sqrt())
                .collect();
            rescaled.push(&scaled).unwrap();
        }
        for (i, v) in rescaled.variance().iter().enumerate() {
            assert!((v - 1.0).abs() < 1e-6, "component {i}: {v}");
        }
    }
}
