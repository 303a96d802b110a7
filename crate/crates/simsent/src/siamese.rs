//! Trainable linear projection over pooled sentence vectors, fitted as a
//! siamese pair: both sentences of a pair pass through the same matrix
//! (weights tied), the objective is squared error between the cosine of the
//! projections and a graded label in {0, 0.5, 1}, and gradients are
//! analytic. Plain mini-batch gradient descent keeps training fully
//! deterministic for a fixed seed.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::corpus::{Corpus, SentenceRecord};
use crate::error::{Error, Result};
use crate::format;
use crate::seeded::SeededStream;

const MODEL_MAGIC: &[u8; 4] = b"SEMW";
const FORMAT_VERSION: u32 = 1;

/// Linear projection `W` (`d_in x d_out`, row-major) shared by both
/// branches of the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    d_in: usize,
    d_out: usize,
    /// Seed the weights were initialized from; zero for loaded models.
    seed: u64,
    w: Vec<f64>,
}

impl ProjectionModel {
    /// Identity-padded initialization plus small seeded noise (scale 0.01).
    pub fn init(d_in: usize, d_out: usize, seed: u64) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(Error::InvalidParam(
                "projection dimensions must be >= 1".into(),
            ));
        }
        let mut stream = SeededStream::new(seed);
        let mut w = Vec::with_capacity(d_in * d_out);
        for i in 0..d_in {
            for j in 0..d_out {
                let base = if i == j { 1.0 } else { 0.0 };
                w.push(base + 0.01 * stream.next_signed());
            }
        }
        Ok(ProjectionModel {
            d_in,
            d_out,
            seed,
            w,
        })
    }

    /// Build a model from explicit row-major weights.
    pub fn from_weights(d_in: usize, d_out: usize, w: Vec<f64>) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(Error::InvalidParam(
                "projection dimensions must be >= 1".into(),
            ));
        }
        if w.len() != d_in * d_out {
            return Err(Error::InvalidParam(format!(
                "weight matrix has {} entries, expected {d_in}x{d_out}",
                w.len()
            )));
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParam("non-finite weight".into()));
        }
        Ok(ProjectionModel {
            d_in,
            d_out,
            seed: 0,
            w,
        })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.d_out + j]
    }

    /// Project one pooled vector: `Wᵀ v`.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.d_in {
            return Err(Error::DimensionMismatch {
                expected: self.d_in,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.d_out];
        for (i, &x) in v.iter().enumerate() {
            let row = &self.w[i * self.d_out..(i + 1) * self.d_out];
            for (o, &wij) in out.iter_mut().zip(row) {
                *o += x * wij;
            }
        }
        Ok(out)
    }

    /// Model codec. Layout, little-endian: magic `SEMW`, u32 version, u32
    /// d_in, u32 d_out, then `d_in * d_out` row-major float64 weights.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let io = |e: std::io::Error| Error::bad_format("projection model", e.to_string());
        format::write_header(w, MODEL_MAGIC, FORMAT_VERSION).map_err(io)?;
        w.write_u32::<LittleEndian>(self.d_in as u32).map_err(io)?;
        w.write_u32::<LittleEndian>(self.d_out as u32).map_err(io)?;
        format::write_f64_vector(w, &self.w).map_err(io)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        const WHAT: &str = "projection model";
        let version = format::read_header(r, MODEL_MAGIC, WHAT)?;
        format::expect_version(version, FORMAT_VERSION, WHAT)?;
        let d_in = format::check_dim(
            r.read_u32::<LittleEndian>()
                .map_err(|e| Error::bad_format(WHAT, format!("missing d_in: {e}")))?,
            WHAT,
        )?;
        let d_out = format::check_dim(
            r.read_u32::<LittleEndian>()
                .map_err(|e| Error::bad_format(WHAT, format!("missing d_out: {e}")))?,
            WHAT,
        )?;
        let mut w = Vec::new();
        for _ in 0..d_in {
            w.extend(format::read_f64_vector(r, d_out, WHAT)?);
        }
        format::expect_eof(r, WHAT)?;
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::bad_format(WHAT, "non-finite weight"));
        }
        Ok(ProjectionModel {
            d_in,
            d_out,
            seed: 0,
            w,
        })
    }

    pub fn write_to_path(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(&mut f)
    }

    pub fn read_from_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut buf = std::io::BufReader::new(f);
        ProjectionModel::read_from(&mut buf)
    }
}

/// A pair of pooled vectors with a graded similarity target.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub a_vector: Vec<f64>,
    pub b_vector: Vec<f64>,
    pub label: f64,
}

/// The three admissible regression targets: random, bad, good.
pub const PAIR_LABELS: [f64; 3] = [0.0, 0.5, 1.0];

impl LabeledPair {
    pub fn new(a_vector: Vec<f64>, b_vector: Vec<f64>, label: f64) -> Result<Self> {
        if !PAIR_LABELS.contains(&label) {
            return Err(Error::InvalidParam(format!(
                "label {label} not one of 0, 0.5, 1"
            )));
        }
        if a_vector.iter().all(|&x| x == 0.0) || b_vector.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroVector("labeled pair".into()));
        }
        Ok(LabeledPair {
            a_vector,
            b_vector,
            label,
        })
    }
}

/// Gradient-descent settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 8,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "learning rate must be a finite nonnegative real, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParam("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParam("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine of the two projections; 0 if either projection vanishes.
pub fn forward(model: &ProjectionModel, pair: &LabeledPair) -> Result<f64> {
    let u = model.project(&pair.a_vector)?;
    let v = model.project(&pair.b_vector)?;
    let (nu, nv) = (norm(&u), norm(&v));
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
    Ok(dot / (nu * nv))
}

/// Mean squared error between cosine and label over the batch.
pub fn loss(model: &ProjectionModel, batch: &[LabeledPair]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Degenerate("loss over an empty batch".into()));
    }
    let mut total = 0.0;
    for pair in batch {
        let c = forward(model, pair)?;
        let r = c - pair.label;
        total += r * r;
    }
    Ok(total / batch.len() as f64)
}

/// Analytic `∂loss/∂W`: the chain rule through the cosine, with both
/// branches contributing to the same tied matrix. Pairs whose projection
/// vanishes are skipped with a warning (the cosine is not differentiable
/// there); the mean normalization stays over the full batch size.
pub fn gradient(model: &ProjectionModel, batch: &[LabeledPair]) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Degenerate("gradient over an empty batch".into()));
    }
    let (d_in, d_out) = (model.d_in, model.d_out);
    let mut grad = vec![0.0; d_in * d_out];
    let scale = 2.0 / batch.len() as f64;
    for pair in batch {
        let u = model.project(&pair.a_vector)?;
        let v = model.project(&pair.b_vector)?;
        let (nu, nv) = (norm(&u), norm(&v));
        if nu == 0.0 || nv == 0.0 {
            log::warn!("skipping pair with a zero projection; gradient undefined there");
            continue;
        }
        let dot: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
        let c = dot / (nu * nv);
        let r = c - pair.label;
        // d c / d u_j and d c / d v_j.
        let du: Vec<f64> = u
            .iter()
            .zip(&v)
            .map(|(&uj, &vj)| vj / (nu * nv) - c * uj / (nu * nu))
            .collect();
        let dv: Vec<f64> = u
            .iter()
            .zip(&v)
            .map(|(&uj, &vj)| uj / (nu * nv) - c * vj / (nv * nv))
            .collect();
        for i in 0..d_in {
            let (ai, bi) = (pair.a_vector[i], pair.b_vector[i]);
            let row = &mut grad[i * d_out..(i + 1) * d_out];
            for j in 0..d_out {
                row[j] += scale * r * (ai * du[j] + bi * dv[j]);
            }
        }
    }
    Ok(grad)
}

/// Mini-batch gradient descent from a seeded identity-padded start.
///
/// Each epoch shuffles the pairs with the training seed's stream, walks the
/// batches in order, and applies `W ← W − lr · gradient`. The returned
/// history holds the mean loss over the whole pair set evaluated after each
/// epoch. Bit-identical across runs for a fixed config.
pub fn train(
    pairs: &[LabeledPair],
    d_in: usize,
    d_out: usize,
    config: &TrainConfig,
) -> Result<(ProjectionModel, Vec<f64>)> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::Degenerate("training needs at least one pair".into()));
    }
    for p in pairs {
        if p.a_vector.len() != d_in || p.b_vector.len() != d_in {
            return Err(Error::DimensionMismatch {
                expected: d_in,
                got: p.a_vector.len().max(p.b_vector.len()),
            });
        }
    }
    let mut model = ProjectionModel::init(d_in, d_out, config.seed)?;
    // Decorrelate the shuffle stream from the weight-init stream.
    let mut stream = SeededStream::new(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        stream.shuffle(&mut order);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<LabeledPair> = chunk.iter().map(|&i| pairs[i].clone()).collect();
            let grad = gradient(&model, &batch)?;
            for (w, g) in model.w.iter_mut().zip(&grad) {
                *w -= config.learning_rate * g;
            }
        }
        history.push(loss(&model, pairs)?);
    }
    Ok((model, history))
}

/// An id-level training pair, the unit of the pair file format.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub query_id: String,
    pub doc_id: String,
    pub label: f64,
}

/// Pair queries with uniformly sampled corpus sentences, all labeled 0.
/// Sampling is iid with replacement, per query, in query order.
pub fn sample_random_pairs(
    corpus: &Corpus,
    queries: &[SentenceRecord],
    count: usize,
    seed: u64,
) -> Result<Vec<PairRecord>> {
    if corpus.is_empty() {
        return Err(Error::Degenerate("cannot sample from an empty corpus".into()));
    }
    let mut stream = SeededStream::new(seed);
    let sentences = corpus.sentences();
    let mut out = Vec::with_capacity(queries.len() * count);
    for q in queries {
        for _ in 0..count {
            let pick = &sentences[stream.next_below(sentences.len())];
            out.push(PairRecord {
                query_id: q.id.clone(),
                doc_id: pick.id.clone(),
                label: 0.0,
            });
        }
    }
    Ok(out)
}

/// Resolve id-level pairs against pooled vector tables, producing the
/// vector pairs training consumes.
pub fn vectorize_pairs(
    records: &[PairRecord],
    query_vectors: &std::collections::HashMap<String, Vec<f64>>,
    doc_vectors: &std::collections::HashMap<String, Vec<f64>>,
) -> Result<Vec<LabeledPair>> {
    records
        .iter()
        .map(|r| {
            let a = query_vectors
                .get(&r.query_id)
                .ok_or_else(|| Error::UnknownId(r.query_id.clone()))?;
            let b = doc_vectors
                .get(&r.doc_id)
                .ok_or_else(|| Error::UnknownId(r.doc_id.clone()))?;
            LabeledPair::new(a.clone(), b.clone(), r.label)
        })
        .collect()
}

/// Write pairs as tab-separated `query_id doc_id label` lines.
pub fn write_pairs(w: &mut impl Write, pairs: &[PairRecord]) -> std::io::Result<()> {
    for p in pairs {
        writeln!(w, "{}\t{}\t{}", p.query_id, p.doc_id, p.label)?;
    }
    Ok(())
}

/// Parse a pair file; labels must be exactly 0, 0.5, or 1.
pub fn read_pairs(reader: impl BufRead, source: &Path) -> Result<Vec<PairRecord>> {
    let mut out = Vec::new();
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
        let label: f64 = fields[2]
            .parse()
            .map_err(|e| Error::parse(source, idx + 1, format!("bad label: {e}")))?;
        if !PAIR_LABELS.contains(&label) {
            return Err(Error::parse(
                source,
                idx + 1,
                format!("label {label} not one of 0, 0.5, 1"),
            ));
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::parse(source, idx + 1, "empty id field"));
        }
        out.push(PairRecord {
            query_id: fields[0].to_owned(),
            doc_id: fields[1].to_owned(),
            label,
        });
    }
    Ok(out)
}

pub fn read_pairs_path(path: &Path) -> Result<Vec<PairRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_pairs(std::io::BufReader::new(f), path)
}

pub fn write_pairs_path(path: &Path, pairs: &[PairRecord]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_pairs(&mut f, pairs).map_err(|e| Error::io(path, e))
}
