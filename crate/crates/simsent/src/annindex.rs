//! Nearest-neighbor search over pooled sentence vectors: an exact flat
//! index and an inverted-file index with a seeded k-means coarse quantizer.
//!
//! Similarity is cosine, implemented as the inner product of L2-normalized
//! vectors; k-means runs on the normalized vectors with Euclidean distance,
//! which is monotone in cosine. Searching the inverted-file index with
//! `nprobe = nlist` degenerates to exact flat search, which the tests lean
//! on heavily.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::embed::SentenceVector;
use crate::error::{Error, Result};
use crate::format;
use crate::ranked::RankedList;
use crate::seeded::SeededStream;

const INDEX_MAGIC: &[u8; 4] = b"SEMA";
const FORMAT_VERSION: u32 = 1;

/// Default cell count for an inverted-file index over `n` vectors.
pub fn default_nlist(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).max(1)
}

/// Default number of cells probed per query.
pub const DEFAULT_NPROBE: usize = 8;

/// L2-normalize, rejecting zero and non-finite vectors.
pub fn normalize(v: &[f64], label: &str) -> Result<Vec<f64>> {
    let norm_sq: f64 = v.iter().map(|x| x * x).sum();
    if !norm_sq.is_finite() {
        return Err(Error::bad_format(
            "vector",
            format!("non-finite components in vector for {label:?}"),
        ));
    }
    if norm_sq == 0.0 {
        return Err(Error::ZeroVector(label.to_owned()));
    }
    let norm = norm_sq.sqrt();
    Ok(v.iter().map(|x| x / norm).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Exact index: normalized vectors in ascending id order.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatIndex {
    d: usize,
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl FlatIndex {
    /// Normalize and store the given sentence vectors, sorted by id.
    pub fn build(vectors: &[SentenceVector]) -> Result<Self> {
        let d = match vectors.first() {
            Some(v) => v.components.len(),
            None => return Err(Error::Degenerate("cannot index zero vectors".into())),
        };
        let mut entries = Vec::with_capacity(vectors.len());
        let mut seen = HashSet::with_capacity(vectors.len());
        for sv in vectors {
            if sv.components.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: sv.components.len(),
                });
            }
            if !seen.insert(sv.sentence_id.as_str()) {
                return Err(Error::DuplicateId(sv.sentence_id.clone()));
            }
            entries.push((
                sv.sentence_id.clone(),
                normalize(&sv.components, &sv.sentence_id)?,
            ));
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let (ids, vectors) = entries.into_iter().unzip();
        Ok(FlatIndex { d, ids, vectors })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

/// Inverted-file index: a k-means coarse quantizer plus per-cell postings.
#[derive(Debug, Clone, PartialEq)]
pub struct IvfIndex {
    d: usize,
    nlist: usize,
    seed: u64,
    centroids: Vec<Vec<f64>>,
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
    /// Row indexes per cell; every row appears in exactly one cell.
    cells: Vec<Vec<u32>>,
}

impl IvfIndex {
    /// Normalize the vectors, fit `nlist` centroids with seeded k-means,
    /// and assign every vector to its nearest centroid's cell.
    pub fn build(vectors: &[SentenceVector], nlist: usize, seed: u64) -> Result<Self> {
        let flat = FlatIndex::build(vectors)?;
        if nlist == 0 || nlist > flat.len() {
            return Err(Error::InvalidParam(format!(
                "nlist {nlist} outside 1..={} for {} vectors",
                flat.len(),
                flat.len()
            )));
        }
        let centroids = kmeans(&flat.vectors, nlist, seed, KMEANS_MAX_ITERS)?;
        let mut cells: Vec<Vec<u32>> = vec![Vec::new(); nlist];
        for (row, v) in flat.vectors.iter().enumerate() {
            cells[nearest_centroid(v, &centroids)].push(row as u32);
        }
        Ok(IvfIndex {
            d: flat.d,
            nlist,
            seed,
            centroids,
            ids: flat.ids,
            vectors: flat.vectors,
            cells,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn nlist(&self) -> usize {
        self.nlist
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    /// Cell sizes, mostly of diagnostic interest.
    pub fn cell_sizes(&self) -> Vec<usize> {
        self.cells.iter().map(Vec::len).collect()
    }
}

const KMEANS_MAX_ITERS: usize = 25;

fn nearest_centroid(v: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0usize;
    let mut best_dist = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let dist = squared_distance(v, c);
        if dist < best_dist {
            best = i;
            best_dist = dist;
        }
    }
    best
}

/// Seeded Lloyd k-means. Initialization samples `nlist` distinct input rows;
/// iterations run to an assignment fixpoint or `max_iters`. An empty cell is
/// re-seeded with the point farthest from its centroid in the largest cell,
/// so every returned centroid owns at least one point. Deterministic for a
/// fixed seed.
pub fn kmeans(
    vectors: &[Vec<f64>],
    nlist: usize,
    seed: u64,
    max_iters: usize,
) -> Result<Vec<Vec<f64>>> {
    if nlist == 0 {
        return Err(Error::InvalidParam("nlist must be >= 1".into()));
    }
    if vectors.len() < nlist {
        return Err(Error::InvalidParam(format!(
            "{} vectors cannot fill {nlist} cells",
            vectors.len()
        )));
    }
    let d = vectors[0].len();
    let mut stream = SeededStream::new(seed);
    let mut chosen = HashSet::with_capacity(nlist);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(nlist);
    while centroids.len() < nlist {
        let i = stream.next_below(vectors.len());
        if chosen.insert(i) {
            centroids.push(vectors[i].clone());
        }
    }

    let mut prev: Option<Vec<usize>> = None;
    for _ in 0..max_iters {
        let mut assign: Vec<usize> = vectors
            .iter()
            .map(|v| nearest_centroid(v, &centroids))
            .collect();

        // Re-seed empty cells before convergence checks so every centroid
        // keeps owning points.
        loop {
            let mut sizes = vec![0usize; nlist];
            for &a in &assign {
                sizes[a] += 1;
            }
            let Some(empty) = sizes.iter().position(|&s| s == 0) else {
                break;
            };
            let largest = (0..nlist).max_by_key(|&c| sizes[c]).unwrap();
            let farthest = assign
                .iter()
                .enumerate()
                .filter(|(_, &a)| a == largest)
                .max_by(|(i, _), (j, _)| {
                    squared_distance(&vectors[*i], &centroids[largest])
                        .total_cmp(&squared_distance(&vectors[*j], &centroids[largest]))
                        .then(j.cmp(i))
                })
                .map(|(i, _)| i)
                .unwrap();
            centroids[empty] = vectors[farthest].clone();
            assign[farthest] = empty;
        }

        if prev.as_ref() == Some(&assign) {
            break;
        }

        let mut sums = vec![vec![0.0; d]; nlist];
        let mut counts = vec![0usize; nlist];
        for (v, &a) in vectors.iter().zip(&assign) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(v) {
                *s += x;
            }
        }
        for (c, (sum, count)) in centroids.iter_mut().zip(sums.iter().zip(&counts)) {
            for (ci, si) in c.iter_mut().zip(sum) {
                *ci = si / *count as f64;
            }
        }
        prev = Some(assign);
    }
    Ok(centroids)
}

/// Exact top-k by cosine: normalized dot product against every stored row.
pub fn search_flat(index: &FlatIndex, query: &[f64], k: usize) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::InvalidParam("result depth k must be >= 1".into()));
    }
    if query.len() != index.d {
        return Err(Error::DimensionMismatch {
            expected: index.d,
            got: query.len(),
        });
    }
    let q = normalize(query, "query")?;
    let scored: Vec<(String, f64)> = index
        .ids
        .iter()
        .zip(&index.vectors)
        .map(|(id, v)| (id.clone(), dot(&q, v)))
        .collect();
    Ok(RankedList::from_scores(String::new(), scored, k))
}

/// Approximate top-k: scan the `nprobe` cells whose centroids are nearest
/// the query, scoring exactly within them.
pub fn search_ivf(index: &IvfIndex, query: &[f64], k: usize, nprobe: usize) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::InvalidParam("result depth k must be >= 1".into()));
    }
    if nprobe == 0 || nprobe > index.nlist {
        return Err(Error::InvalidParam(format!(
            "nprobe {nprobe} outside 1..={}",
            index.nlist
        )));
    }
    if query.len() != index.d {
        return Err(Error::DimensionMismatch {
            expected: index.d,
            got: query.len(),
        });
    }
    let q = normalize(query, "query")?;
    let mut order: Vec<usize> = (0..index.nlist).collect();
    order.sort_by(|&a, &b| {
        squared_distance(&q, &index.centroids[a])
            .total_cmp(&squared_distance(&q, &index.centroids[b]))
            .then(a.cmp(&b))
    });
    let mut scored = Vec::new();
    for &cell in order.iter().take(nprobe) {
        for &row in &index.cells[cell] {
            let row = row as usize;
            scored.push((index.ids[row].clone(), dot(&q, &index.vectors[row])));
        }
    }
    Ok(RankedList::from_scores(String::new(), scored, k))
}

/// Either index family behind one façade, which is also the unit of
/// persistence.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorIndex {
    Flat(FlatIndex),
    Ivf(IvfIndex),
}

impl VectorIndex {
    pub fn d(&self) -> usize {
        match self {
            VectorIndex::Flat(i) => i.d,
            VectorIndex::Ivf(i) => i.d,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            VectorIndex::Flat(i) => i.len(),
            VectorIndex::Ivf(i) => i.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Search with `nprobe` applying only to the inverted-file family (a
    /// flat index is always exact). `nprobe` defaults to [`DEFAULT_NPROBE`]
    /// capped at nlist.
    pub fn search(&self, query: &[f64], k: usize, nprobe: Option<usize>) -> Result<RankedList> {
        match self {
            VectorIndex::Flat(i) => search_flat(i, query, k),
            VectorIndex::Ivf(i) => {
                let nprobe = nprobe.unwrap_or_else(|| DEFAULT_NPROBE.min(i.nlist));
                search_ivf(i, query, k, nprobe)
            }
        }
    }

    /// Index codec. Layout, little-endian: magic `SEMA`, u32 version, u32
    /// d, u32 nlist (0 for a flat index), u64 seed, u64 vector count, then
    /// `nlist * d` float32 centroid components, then the cells: one block
    /// holding all vectors for a flat index, otherwise `nlist` blocks, each
    /// a u64 entry count followed by entries of a length-prefixed id and
    /// `d` float32 components.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let io = |e: std::io::Error| Error::bad_format("vector index", e.to_string());
        format::write_header(w, INDEX_MAGIC, FORMAT_VERSION).map_err(io)?;
        match self {
            VectorIndex::Flat(i) => {
                w.write_u32::<LittleEndian>(i.d as u32).map_err(io)?;
                w.write_u32::<LittleEndian>(0).map_err(io)?;
                w.write_u64::<LittleEndian>(0).map_err(io)?;
                w.write_u64::<LittleEndian>(i.len() as u64).map_err(io)?;
                w.write_u64::<LittleEndian>(i.len() as u64).map_err(io)?;
                for (id, v) in i.ids.iter().zip(&i.vectors) {
                    format::write_string(w, id).map_err(io)?;
                    format::write_f32_vector(w, v).map_err(io)?;
                }
            }
            VectorIndex::Ivf(i) => {
                w.write_u32::<LittleEndian>(i.d as u32).map_err(io)?;
                w.write_u32::<LittleEndian>(i.nlist as u32).map_err(io)?;
                w.write_u64::<LittleEndian>(i.seed).map_err(io)?;
                w.write_u64::<LittleEndian>(i.len() as u64).map_err(io)?;
                for c in &i.centroids {
                    format::write_f32_vector(w, c).map_err(io)?;
                }
                for cell in &i.cells {
                    w.write_u64::<LittleEndian>(cell.len() as u64).map_err(io)?;
                    for &row in cell {
                        let row = row as usize;
                        format::write_string(w, &i.ids[row]).map_err(io)?;
                        format::write_f32_vector(w, &i.vectors[row]).map_err(io)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Decode and validate; see [`VectorIndex::write_to`] for the layout.
    /// Stored vectors are kept bit-for-bit (no renormalization), so a
    /// write/read/write cycle is byte-identical; norms are still checked
    /// against loose float32 tolerance.
    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        const WHAT: &str = "vector index";
        let version = format::read_header(r, INDEX_MAGIC, WHAT)?;
        format::expect_version(version, FORMAT_VERSION, WHAT)?;
        let d = format::check_dim(
            r.read_u32::<LittleEndian>()
                .map_err(|e| Error::bad_format(WHAT, format!("missing dimensionality: {e}")))?,
            WHAT,
        )?;
        let nlist = r
            .read_u32::<LittleEndian>()
            .map_err(|e| Error::bad_format(WHAT, format!("missing nlist: {e}")))? as usize;
        let seed = r
            .read_u64::<LittleEndian>()
            .map_err(|e| Error::bad_format(WHAT, format!("missing seed: {e}")))?;
        let count = r
            .read_u64::<LittleEndian>()
            .map_err(|e| Error::bad_format(WHAT, format!("missing vector count: {e}")))?;
        let mut centroids = Vec::new();
        for _ in 0..nlist {
            centroids.push(format::read_f32_vector(r, d, WHAT)?);
        }
        let cell_count = if nlist == 0 { 1 } else { nlist };
        let mut ids: Vec<String> = Vec::new();
        let mut vectors: Vec<Vec<f64>> = Vec::new();
        let mut cells: Vec<Vec<u32>> = Vec::with_capacity(cell_count);
        let mut seen = HashSet::new();
        for _ in 0..cell_count {
            let size = r
                .read_u64::<LittleEndian>()
                .map_err(|e| Error::bad_format(WHAT, format!("truncated cell header: {e}")))?;
            let mut cell = Vec::new();
            for _ in 0..size {
                let id = format::read_string(r, WHAT)?;
                if !seen.insert(id.clone()) {
                    return Err(Error::bad_format(WHAT, format!("duplicate id {id:?}")));
                }
                let v = format::read_f32_vector(r, d, WHAT)?;
                let norm = dot(&v, &v).sqrt();
                if !norm.is_finite() || (norm - 1.0).abs() > 1e-3 {
                    return Err(Error::bad_format(
                        WHAT,
                        format!("vector for {id:?} has norm {norm}, expected 1"),
                    ));
                }
                cell.push(ids.len() as u32);
                ids.push(id);
                vectors.push(v);
            }
            cells.push(cell);
        }
        if ids.len() as u64 != count {
            return Err(Error::bad_format(
                WHAT,
                format!("cells hold {} vectors, header declared {count}", ids.len()),
            ));
        }
        format::expect_eof(r, WHAT)?;
        if nlist == 0 {
            // A flat payload is stored in ascending id order.
            if ids.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::bad_format(WHAT, "flat index ids not ascending"));
            }
            Ok(VectorIndex::Flat(FlatIndex { d, ids, vectors }))
        } else {
            Ok(VectorIndex::Ivf(IvfIndex {
                d,
                nlist,
                seed,
                centroids,
                ids,
                vectors,
                cells,
            }))
        }
    }

    pub fn write_to_path(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut buf = std::io::BufWriter::new(&mut f);
        self.write_to(&mut buf)
    }

    pub fn read_from_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut buf = std::io::BufReader::new(f);
        VectorIndex::read_from(&mut buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(id: &str, components: &[f64]) -> SentenceVector {
        SentenceVector {
            sentence_id: id.to_owned(),
            components: components.to_vec(),
        }
    }

    fn random_vectors(count: usize, d: usize, seed: u64) -> Vec<SentenceVector> {
        let mut s = SeededStream::new(seed);
        (0..count)
            .map(|i| {
                let v: Vec<f64> = (0..d).map(|_| s.next_signed()).collect();
                sv(&format!("v{i:04}"), &v)
            })
            .collect()
    }

    #[test]
    fn build_normalizes_and_sorts() {
        let idx = FlatIndex::build(&[sv("b", &[3.0, 4.0]), sv("a", &[0.0, 2.0])]).unwrap();
        assert_eq!(idx.ids(), &["a".to_owned(), "b".to_owned()]);
        assert_eq!(idx.vectors()[1], vec![0.6, 0.8]);
        assert_eq!(idx.vectors()[0], vec![0.0, 1.0]);
    }

    #[test]
    fn build_rejects_zero_vectors_and_mismatches() {
        match FlatIndex::build(&[sv("z", &[0.0, 0.0])]) {
            Err(Error::ZeroVector(id)) => assert_eq!(id, "z"),
            other => panic!("expected zero-vector error, got {other:?}"),
        }
        assert!(FlatIndex::build(&[sv("a", &[1.0, 0.0]), sv("b", &[1.0])]).is_err());
        assert!(FlatIndex::build(&[sv("a", &[1.0]), sv("a", &[2.0])]).is_err());
        assert!(FlatIndex::build(&[sv("n", &[f64::NAN, 1.0])]).is_err());
    }

    #[test]
    fn stored_norms_are_unit() {
        let idx = FlatIndex::build(&random_vectors(500, 16, 4)).unwrap();
        for v in idx.vectors() {
            assert!((dot(v, v).sqrt() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn self_query_ranks_first_with_unit_score() {
        let data = random_vectors(50, 8, 9);
        let idx = FlatIndex::build(&data).unwrap();
        let hit = search_flat(&idx, &data[17].components, 5).unwrap();
        assert_eq!(hit.entries[0].doc_id, "v0017");
        assert!((hit.entries[0].score - 1.0).abs() < 1e-6);
    }

    #[test]
    fn orthogonal_queries_score_zero() {
        let idx = FlatIndex::build(&[sv("x", &[1.0, 0.0, 0.0]), sv("y", &[0.0, 1.0, 0.0])])
            .unwrap();
        let hits = search_flat(&idx, &[0.0, 0.0, 5.0], 2).unwrap();
        for e in &hits.entries {
            assert!(e.score.abs() < 1e-6);
        }
        // All-tied scores fall back to ascending id order.
        assert_eq!(hits.doc_ids().collect::<Vec<_>>(), vec!["x", "y"]);
    }

    #[test]
    fn flat_search_matches_brute_force() {
        let data = random_vectors(120, 12, 21);
        let idx = FlatIndex::build(&data).unwrap();
        let mut qs = SeededStream::new(77);
        for _ in 0..10 {
            let q: Vec<f64> = (0..12).map(|_| qs.next_signed()).collect();
            let got = search_flat(&idx, &q, 15).unwrap();
            let qn = normalize(&q, "q").unwrap();
            let mut brute: Vec<(String, f64)> = data
                .iter()
                .map(|svec| {
                    let vn = normalize(&svec.components, "v").unwrap();
                    (svec.sentence_id.clone(), dot(&qn, &vn))
                })
                .collect();
            brute.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            for (g, (id, score)) in got.entries.iter().zip(brute.iter().take(15)) {
                assert_eq!(&g.doc_id, id);
                assert!((g.score - score).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_query_is_rejected() {
        let idx = FlatIndex::build(&[sv("a", &[1.0, 0.0])]).unwrap();
        assert!(search_flat(&idx, &[0.0, 0.0], 1).is_err());
    }

    #[test]
    fn kmeans_single_cell_is_the_mean() {
        let vectors = vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![2.0, 0.0],
        ];
        let c = kmeans(&vectors, 1, 5, 25).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0][0] - 1.0).abs() < 1e-12);
        assert!((c[0][1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kmeans_separates_two_clouds() {
        let mut s = SeededStream::new(13);
        let mut vectors = Vec::new();
        for _ in 0..30 {
            vectors.push(vec![10.0 + s.next_signed() * 0.1, s.next_signed() * 0.1]);
        }
        for _ in 0..30 {
            vectors.push(vec![-10.0 + s.next_signed() * 0.1, s.next_signed() * 0.1]);
        }
        let centroids = kmeans(&vectors, 2, 3, 25).unwrap();
        let signs: Vec<f64> = centroids.iter().map(|c| c[0].signum()).collect();
        assert_ne!(signs[0], signs[1], "one centroid per cloud");
        for (i, v) in vectors.iter().enumerate() {
            let cell = nearest_centroid(v, &centroids);
            assert_eq!(
                centroids[cell][0].signum(),
                v[0].signum(),
                "point {i} crossed clouds"
            );
        }
    }

    #[test]
    fn kmeans_is_seed_deterministic() {
        let vectors: Vec<Vec<f64>> = random_vectors(64, 6, 31)
            .into_iter()
            .map(|v| v.components)
            .collect();
        let a = kmeans(&vectors, 8, 17, 25).unwrap();
        let b = kmeans(&vectors, 8, 17, 25).unwrap();
        assert_eq!(a, b);
        let c = kmeans(&vectors, 8, 18, 25).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn kmeans_rejects_too_few_vectors() {
        assert!(kmeans(&[vec![1.0]], 2, 0, 25).is_err());
        assert!(kmeans(&[vec![1.0]], 0, 0, 25).is_err());
    }

    #[test]
    fn ivf_cells_partition_the_rows() {
        let data = random_vectors(100, 8, 2);
        let idx = IvfIndex::build(&data, 7, 11).unwrap();
        let sizes = idx.cell_sizes();
        assert_eq!(sizes.iter().sum::<usize>(), 100);
        assert!(sizes.iter().all(|&s| s > 0), "cells: {sizes:?}");
    }

    #[test]
    fn single_cell_ivf_equals_flat() {
        let data = random_vectors(40, 6, 5);
        let flat = FlatIndex::build(&data).unwrap();
        let ivf = IvfIndex::build(&data, 1, 0).unwrap();
        let mut qs = SeededStream::new(50);
        for _ in 0..5 {
            let q: Vec<f64> = (0..6).map(|_| qs.next_signed()).collect();
            let a = search_flat(&flat, &q, 10).unwrap();
            let b = search_ivf(&ivf, &q, 10, 1).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn probing_every_cell_equals_flat() {
        let data = random_vectors(150, 10, 8);
        let flat = FlatIndex::build(&data).unwrap();
        let ivf = IvfIndex::build(&data, 12, 4).unwrap();
        let mut qs = SeededStream::new(51);
        for _ in 0..20 {
            let q: Vec<f64> = (0..10).map(|_| qs.next_signed()).collect();
            let a = search_flat(&flat, &q, 20).unwrap();
            let b = search_ivf(&ivf, &q, 20, 12).unwrap();
            assert_eq!(
                a.doc_ids().collect::<Vec<_>>(),
                b.doc_ids().collect::<Vec<_>>()
            );
            for (x, y) in a.entries.iter().zip(&b.entries) {
                assert!((x.score - y.score).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn probing_one_cell_solves_separated_clouds() {
        let mut s = SeededStream::new(23);
        let mut data = Vec::new();
        for i in 0..25 {
            data.push(sv(
                &format!("left{i:02}"),
                &[-5.0 + s.next_signed() * 0.2, s.next_signed() * 0.2, 1.0],
            ));
        }
        for i in 0..25 {
            data.push(sv(
                &format!("right{i:02}"),
                &[5.0 + s.next_signed() * 0.2, s.next_signed() * 0.2, 1.0],
            ));
        }
        let flat = FlatIndex::build(&data).unwrap();
        let ivf = IvfIndex::build(&data, 2, 9).unwrap();
        for probe in &data {
            let a = search_flat(&flat, &probe.components, 5).unwrap();
            let b = search_ivf(&ivf, &probe.components, 5, 1).unwrap();
            assert_eq!(a, b, "query {}", probe.sentence_id);
        }
    }

    #[test]
    fn recall_does_not_decrease_with_more_probes() {
        let data = random_vectors(300, 8, 77);
        let flat = FlatIndex::build(&data).unwrap();
        let ivf = IvfIndex::build(&data, 16, 6).unwrap();
        let mut qs = SeededStream::new(101);
        let queries: Vec<Vec<f64>> = (0..15)
            .map(|_| (0..8).map(|_| qs.next_signed()).collect())
            .collect();
        let mut last = 0.0;
        for nprobe in 1..=16 {
            let mut hits = 0usize;
            let mut total = 0usize;
            for q in &queries {
                let truth: HashSet<String> = search_flat(&flat, q, 10)
                    .unwrap()
                    .doc_ids()
                    .map(str::to_owned)
                    .collect();
                let got = search_ivf(&ivf, q, 10, nprobe).unwrap();
                hits += got.doc_ids().filter(|id| truth.contains(*id)).count();
                total += truth.len();
            }
            let recall = hits as f64 / total as f64;
            assert!(
                recall >= last - 1e-12,
                "recall fell from {last} to {recall} at nprobe {nprobe}"
            );
            last = recall;
        }
        assert!((last - 1.0).abs() < 1e-12, "full probing must reach recall 1");
    }

    #[test]
    fn nprobe_bounds_are_enforced() {
        let data = random_vectors(30, 4, 3);
        let ivf = IvfIndex::build(&data, 5, 2).unwrap();
        let q = vec![1.0, 0.0, 0.0, 0.0];
        assert!(search_ivf(&ivf, &q, 5, 0).is_err());
        assert!(search_ivf(&ivf, &q, 5, 6).is_err());
    }

    #[test]
    fn index_files_round_trip_byte_stably() {
        let data = random_vectors(60, 5, 14);
        for built in [
            VectorIndex::Flat(FlatIndex::build(&data).unwrap()),
            VectorIndex::Ivf(IvfIndex::build(&data, 6, 10).unwrap()),
        ] {
            let mut buf = Vec::new();
            built.write_to(&mut buf).unwrap();
            let back = VectorIndex::read_from(&mut std::io::Cursor::new(&buf)).unwrap();
            assert_eq!(back.len(), built.len());
            let mut buf2 = Vec::new();
            back.write_to(&mut buf2).unwrap();
            assert_eq!(buf, buf2, "write/read/write must be byte-identical");
            // Search through the reloaded index agrees with the original to
            // float32 precision.
            let q = vec![0.3, -0.2, 0.9, 0.1, -0.5];
            let a = built.search(&q, 10, Some(3.min(match &built {
                VectorIndex::Ivf(i) => i.nlist(),
                _ => 1,
            }))).unwrap();
            let b = back.search(&q, 10, Some(3.min(match &back {
                VectorIndex::Ivf(i) => i.nlist(),
                _ => 1,
            }))).unwrap();
            assert_eq!(
                a.doc_ids().collect::<Vec<_>>(),
                b.doc_ids().collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn index_file_rejects_corruption() {
        let data = random_vectors(10, 3, 1);
        let built = VectorIndex::Flat(FlatIndex::build(&data).unwrap());
        let mut buf = Vec::new();
        built.write_to(&mut buf).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'Q';
        assert!(VectorIndex::read_from(&mut std::io::Cursor::new(&bad_magic)).is_err());

        assert!(VectorIndex::read_from(&mut std::io::Cursor::new(&buf[..buf.len() - 1])).is_err());

        let mut trailing = buf.clone();
        trailing.push(7);
        assert!(VectorIndex::read_from(&mut std::io::Cursor::new(&trailing)).is_err());

        // Denormalized vector payloads are rejected.
        let denorm = [sv("a", &[8.0, 0.0, 0.0])];
        let mut idx = FlatIndex::build(&denorm).unwrap();
        idx.vectors[0] = vec![8.0, 0.0, 0.0];
        let mut bad = Vec::new();
        VectorIndex::Flat(idx).write_to(&mut bad).unwrap();
        assert!(VectorIndex::read_from(&mut std::io::Cursor::new(&bad)).is_err());
    }

    #[test]
    fn default_nlist_scales_with_sqrt() {
        assert_eq!(default_nlist(0), 1);
        assert_eq!(default_nlist(1), 1);
        assert_eq!(default_nlist(100), 10);
        assert_eq!(default_nlist(101), 11);
    }
}
