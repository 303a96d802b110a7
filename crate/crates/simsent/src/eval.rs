//! Graded-relevance evaluation: judgment (qrels) and run-file interchange,
//! nDCG@k, and top-k pooling of system outputs into an annotation
//! worksheet.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::ranked::{RankedEntry, RankedList};

/// Highest relevance grade: exactly on-point. 2 = relevant, 1 = somewhat
/// relevant, 0 = irrelevant.
pub const MAX_GRADE: u8 = 3;

/// Default pooling depth for judgment worksheets.
pub const DEFAULT_POOL_DEPTH: usize = 10;

/// One graded relevance judgment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgment {
    pub query_id: String,
    pub doc_id: String,
    pub grade: u8,
}

impl Judgment {
    pub fn new(
        query_id: impl Into<String>,
        doc_id: impl Into<String>,
        grade: u8,
    ) -> Result<Self> {
        if grade > MAX_GRADE {
            return Err(Error::InvalidParam(format!(
                "grade {grade} out of range 0..={MAX_GRADE}"
            )));
        }
        let query_id = query_id.into();
        let doc_id = doc_id.into();
        if query_id.is_empty() || doc_id.is_empty() {
            return Err(Error::InvalidParam("judgment with an empty id".into()));
        }
        Ok(Judgment {
            query_id,
            doc_id,
            grade,
        })
    }
}

/// Judgments indexed by query, then document; (query, doc) pairs unique.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JudgmentSet {
    by_query: BTreeMap<String, BTreeMap<String, u8>>,
}

impl JudgmentSet {
    pub fn new() -> Self {
        JudgmentSet::default()
    }

    pub fn insert(&mut self, judgment: Judgment) -> Result<()> {
        let docs = self.by_query.entry(judgment.query_id.clone()).or_default();
        if docs.contains_key(&judgment.doc_id) {
            return Err(Error::DuplicateJudgment {
                query: judgment.query_id,
                doc: judgment.doc_id,
            });
        }
        docs.insert(judgment.doc_id, judgment.grade);
        Ok(())
    }

    pub fn from_judgments(judgments: impl IntoIterator<Item = Judgment>) -> Result<Self> {
        let mut set = JudgmentSet::new();
        for j in judgments {
            set.insert(j)?;
        }
        Ok(set)
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> Option<u8> {
        self.by_query.get(query_id)?.get(doc_id).copied()
    }

    /// All judged docs for one query, in doc-id order.
    pub fn query_grades(&self, query_id: &str) -> Option<&BTreeMap<String, u8>> {
        self.by_query.get(query_id)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.by_query.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.by_query.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_query.is_empty()
    }

    /// Qrels lines: `query_id 0 doc_id grade`, space-separated.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        for (query, docs) in &self.by_query {
            for (doc, grade) in docs {
                writeln!(w, "{query} 0 {doc} {grade}")?;
            }
        }
        Ok(())
    }

    pub fn read_from(reader: impl BufRead, source: &Path) -> Result<Self> {
        let mut set = JudgmentSet::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::parse(
                    source,
                    idx + 1,
                    format!("expected 4 fields, got {}", fields.len()),
                ));
            }
            if fields[1] != "0" {
                return Err(Error::parse(
                    source,
                    idx + 1,
                    format!("expected literal 0 in field 2, got {:?}", fields[1]),
                ));
            }
            let grade: u8 = fields[3]
                .parse()
                .map_err(|e| Error::parse(source, idx + 1, format!("bad grade: {e}")))?;
            let judgment = Judgment::new(fields[0], fields[2], grade)
                .map_err(|e| Error::parse(source, idx + 1, e.to_string()))?;
            set.insert(judgment)
                .map_err(|e| Error::parse(source, idx + 1, e.to_string()))?;
        }
        Ok(set)
    }

    pub fn write_to_path(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(&mut f).map_err(|e| Error::io(path, e))
    }

    pub fn read_from_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        JudgmentSet::read_from(std::io::BufReader::new(f), path)
    }
}

/// Per-query rankings produced by one tagged system run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSet {
    tag: String,
    by_query: BTreeMap<String, RankedList>,
}

impl RunSet {
    pub fn new(tag: impl Into<String>) -> Result<Self> {
        let tag = tag.into();
        if tag.is_empty() || tag.chars().any(char::is_whitespace) {
            return Err(Error::InvalidParam(format!(
                "run tag {tag:?} must be nonempty without whitespace"
            )));
        }
        Ok(RunSet {
            tag,
            by_query: BTreeMap::new(),
        })
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn insert(&mut self, list: RankedList) -> Result<()> {
        if list.query_id.is_empty() {
            return Err(Error::InvalidParam(
                "run entry without a query id".into(),
            ));
        }
        list.validate_unique()?;
        if self.by_query.contains_key(&list.query_id) {
            return Err(Error::InvalidParam(format!(
                "duplicate ranking for query {:?}",
                list.query_id
            )));
        }
        self.by_query.insert(list.query_id.clone(), list);
        Ok(())
    }

    pub fn get(&self, query_id: &str) -> Option<&RankedList> {
        self.by_query.get(query_id)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.by_query.keys().map(String::as_str)
    }

    pub fn rankings(&self) -> impl Iterator<Item = &RankedList> {
        self.by_query.values()
    }

    pub fn len(&self) -> usize {
        self.by_query.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_query.is_empty()
    }

    /// Run lines: `query_id Q0 doc_id rank score tag`, rank 1-based and
    /// ascending within a query. Scores print in shortest round-trip form,
    /// so write → read → write is byte-stable.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        for (query, list) in &self.by_query {
            for (rank, entry) in list.entries.iter().enumerate() {
                writeln!(
                    w,
                    "{query} Q0 {doc} {rank} {score} {tag}",
                    doc = entry.doc_id,
                    rank = rank + 1,
                    score = entry.score,
                    tag = self.tag
                )?;
            }
        }
        Ok(())
    }

    pub fn read_from(reader: impl BufRead, source: &Path) -> Result<Self> {
        let mut tag: Option<String> = None;
        let mut per_query: BTreeMap<String, Vec<RankedEntry>> = BTreeMap::new();
        let mut last_rank: std::collections::HashMap<String, u32> =
            std::collections::HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(Error::parse(
                    source,
                    idx + 1,
                    format!("expected 6 fields, got {}", fields.len()),
                ));
            }
            if fields[1] != "Q0" {
                return Err(Error::parse(
                    source,
                    idx + 1,
                    format!("expected literal Q0 in field 2, got {:?}", fields[1]),
                ));
            }
            let rank: u32 = fields[3]
                .parse()
                .map_err(|e| Error::parse(source, idx + 1, format!("bad rank: {e}")))?;
            let score: f64 = fields[4]
                .parse()
                .map_err(|e| Error::parse(source, idx + 1, format!("bad score: {e}")))?;
            if !score.is_finite() {
                return Err(Error::parse(source, idx + 1, "non-finite score"));
            }
            match &tag {
                None => tag = Some(fields[5].to_owned()),
                Some(t) if t != fields[5] => {
                    return Err(Error::parse(
                        source,
                        idx + 1,
                        format!("run tag changed from {t:?} to {:?}", fields[5]),
                    ));
                }
                Some(_) => {}
            }
            let query = fields[0].to_owned();
            let prev = last_rank.get(&query).copied().unwrap_or(0);
            if rank != prev + 1 {
                return Err(Error::parse(
                    source,
                    idx + 1,
                    format!("rank {rank} for query {query:?} does not follow {prev}"),
                ));
            }
            last_rank.insert(query.clone(), rank);
            per_query.entry(query).or_default().push(RankedEntry {
                doc_id: fields[2].to_owned(),
                score,
            });
        }
        let tag = tag.ok_or_else(|| Error::bad_format("run file", "no entries"))?;
        let mut set = RunSet::new(tag)?;
        for (query_id, entries) in per_query {
            for pair in entries.windows(2) {
                if pair[1].score > pair[0].score {
                    log::warn!(
                        "run {}: scores increase with rank for query {query_id:?}",
                        set.tag
                    );
                    break;
                }
            }
            set.insert(RankedList { query_id, entries })?;
        }
        Ok(set)
    }

    pub fn write_to_path(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(&mut f).map_err(|e| Error::io(path, e))
    }

    pub fn read_from_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        RunSet::read_from(std::io::BufReader::new(f), path)
    }
}

fn gain(grade: u8) -> f64 {
    (1u32 << grade) as f64 - 1.0
}

/// nDCG@k for one query's ranking: exponential gain `2^g − 1`, discount
/// `log2(i + 1)`, unjudged documents at grade 0. Returns `None` when the
/// query has no positively graded judgments (IDCG zero: unevaluable).
pub fn ndcg(run: &RankedList, judgments: &JudgmentSet, k: usize) -> Result<Option<f64>> {
    if k == 0 {
        return Err(Error::InvalidParam("ndcg cutoff must be >= 1".into()));
    }
    let mut ideal: Vec<u8> = judgments
        .query_grades(&run.query_id)
        .map(|docs| docs.values().copied().collect())
        .unwrap_or_default();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain(g) / ((i + 2) as f64).log2())
        .sum();
    if idcg == 0.0 {
        return Ok(None);
    }
    let dcg: f64 = run
        .entries
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, entry)| {
            let g = judgments.grade(&run.query_id, &entry.doc_id).unwrap_or(0);
            gain(g) / ((i + 2) as f64).log2()
        })
        .sum();
    Ok(Some(dcg / idcg))
}

/// Mean nDCG@k over the run set's evaluable queries, with the count of
/// queries that entered the mean.
pub fn mean_ndcg(
    runset: &RunSet,
    judgments: &JudgmentSet,
    k: usize,
) -> Result<(f64, usize)> {
    let mut total = 0.0;
    let mut evaluated = 0usize;
    for list in runset.rankings() {
        if let Some(value) = ndcg(list, judgments, k)? {
            total += value;
            evaluated += 1;
        }
    }
    if evaluated == 0 {
        return Err(Error::Degenerate(
            "no evaluable queries: every query has an all-zero judgment profile".into(),
        ));
    }
    Ok((total / evaluated as f64, evaluated))
}

/// One row of the annotation worksheet produced by pooling.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct WorksheetRow {
    pub query_id: String,
    pub doc_id: String,
    pub doc_text: String,
}

/// Deduplicated union of each system's top-k per query, as unjudged rows
/// sorted by query then doc id.
pub fn pool_top_k(
    runsets: &[&RunSet],
    corpus: &Corpus,
    k: usize,
) -> Result<Vec<WorksheetRow>> {
    if k == 0 {
        return Err(Error::InvalidParam("pool depth must be >= 1".into()));
    }
    let mut pairs: std::collections::BTreeSet<(String, String)> =
        std::collections::BTreeSet::new();
    for runset in runsets {
        for list in runset.rankings() {
            for entry in list.entries.iter().take(k) {
                pairs.insert((list.query_id.clone(), entry.doc_id.clone()));
            }
        }
    }
    pairs
        .into_iter()
        .map(|(query_id, doc_id)| {
            let doc_text = corpus.require(&doc_id)?.text.clone();
            Ok(WorksheetRow {
                query_id,
                doc_id,
                doc_text,
            })
        })
        .collect()
}

/// Worksheet lines: `query_id⇥doc_id⇥doc_text⇥` with the grade column left
/// empty for the annotator.
pub fn write_worksheet(w: &mut impl Write, rows: &[WorksheetRow]) -> std::io::Result<()> {
    for row in rows {
        writeln!(w, "{}\t{}\t{}\t", row.query_id, row.doc_id, row.doc_text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SentenceRecord;

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

    fn qrels(rows: &[(&str, &str, u8)]) -> JudgmentSet {
        JudgmentSet::from_judgments(
            rows.iter().map(|(q, d, g)| Judgment::new(*q, *d, *g).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn ideal_order_scores_one() {
        let judgments = qrels(&[("q1", "d1", 3), ("q1", "d2", 2), ("q1", "d3", 0)]);
        let run = list("q1", &[("d1", 0.9), ("d2", 0.8), ("d3", 0.7)]);
        let value = ndcg(&run, &judgments, 10).unwrap().unwrap();
        assert!((value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn worked_two_document_case() {
        let judgments = qrels(&[("q1", "d1", 3), ("q1", "d2", 0)]);
        let run = list("q1", &[("d2", 0.9), ("d1", 0.8)]);
        let value = ndcg(&run, &judgments, 2).unwrap().unwrap();
        // DCG = 7/log2(3), IDCG = 7.
        assert!((value - 0.63093).abs() < 1e-5);
        assert!((value - 1.0 / 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn all_zero_grades_are_unevaluable() {
        let judgments = qrels(&[("q1", "d1", 0), ("q1", "d2", 0)]);
        let run = list("q1", &[("d1", 1.0)]);
        assert_eq!(ndcg(&run, &judgments, 5).unwrap(), None);
        let unjudged_query = list("q9", &[("d1", 1.0)]);
        assert_eq!(ndcg(&unjudged_query, &judgments, 5).unwrap(), None);
        assert!(ndcg(&run, &judgments, 0).is_err());
    }

    #[test]
    fn entries_below_the_cutoff_do_not_matter() {
        let judgments = qrels(&[("q1", "d1", 3), ("q1", "d2", 1)]);
        let short = list("q1", &[("d2", 0.9), ("d1", 0.8)]);
        let long = list(
            "q1",
            &[("d2", 0.9), ("d1", 0.8), ("x1", 0.7), ("x2", 0.6)],
        );
        assert_eq!(
            ndcg(&short, &judgments, 2).unwrap(),
            ndcg(&long, &judgments, 2).unwrap()
        );
    }

    #[test]
    fn fixing_an_adjacent_inversion_never_hurts() {
        let grades = [3u8, 0, 2, 1, 0, 3, 1];
        let judgments = qrels(
            &grades
                .iter()
                .enumerate()
                .map(|(i, &g)| ("q1", Box::leak(format!("d{i}").into_boxed_str()) as &str, g))
                .collect::<Vec<_>>(),
        );
        let docs: Vec<(String, f64)> = (0..grades.len())
            .map(|i| (format!("d{i}"), 1.0 - i as f64 * 0.1))
            .collect();
        for i in 0..docs.len() - 1 {
            let gi = grades[i];
            let gj = grades[i + 1];
            if gi >= gj {
                continue;
            }
            let base: Vec<(&str, f64)> =
                docs.iter().map(|(d, s)| (d.as_str(), *s)).collect();
            let mut swapped = base.clone();
            swapped.swap(i, i + 1);
            // Keep scores attached to positions so the list stays sorted.
            let swapped: Vec<(&str, f64)> = swapped
                .iter()
                .zip(&base)
                .map(|((d, _), (_, s))| (*d, *s))
                .collect();
            let before = ndcg(&list("q1", &base), &judgments, 10).unwrap().unwrap();
            let after = ndcg(&list("q1", &swapped), &judgments, 10).unwrap().unwrap();
            assert!(
                after >= before - 1e-12,
                "promoting the higher grade lowered nDCG at {i}"
            );
        }
    }

    #[test]
    fn mean_skips_unevaluable_queries() {
        let judgments = qrels(&[
            ("q1", "d1", 3),
            ("q2", "d1", 1),
            ("q2", "d2", 3),
            ("q3", "d1", 0),
        ]);
        let mut runs = RunSet::new("sys").unwrap();
        runs.insert(list("q1", &[("d1", 1.0)])).unwrap();
        runs.insert(list("q2", &[("d1", 1.0), ("d2", 0.5)])).unwrap();
        runs.insert(list("q3", &[("d1", 1.0)])).unwrap();
        let (mean, count) = mean_ndcg(&runs, &judgments, 10).unwrap();
        assert_eq!(count, 2);
        let q2 = ndcg(runs.get("q2").unwrap(), &judgments, 10)
            .unwrap()
            .unwrap();
        assert!((mean - (1.0 + q2) / 2.0).abs() < 1e-12);

        let zeros = qrels(&[("q1", "d1", 0)]);
        assert!(mean_ndcg(&runs, &zeros, 10).is_err());
    }

    #[test]
    fn mean_matches_per_query_recomputation() {
        let mut judgments = JudgmentSet::new();
        let mut runs = RunSet::new("sys").unwrap();
        let mut stream = crate::seeded::SeededStream::new(12);
        for q in 0..20 {
            let query = format!("q{q:02}");
            let mut docs = Vec::new();
            for d in 0..8 {
                let doc = format!("d{d}");
                let grade = (stream.next_below(4)) as u8;
                judgments
                    .insert(Judgment::new(query.clone(), doc.clone(), grade).unwrap())
                    .unwrap();
                docs.push((doc, stream.next_f64()));
            }
            docs.sort_by(|a, b| b.1.total_cmp(&a.1));
            let refs: Vec<(&str, f64)> = docs.iter().map(|(d, s)| (d.as_str(), *s)).collect();
            runs.insert(list(&query, &refs)).unwrap();
        }
        let (mean, count) = mean_ndcg(&runs, &judgments, 5).unwrap();
        let mut manual = Vec::new();
        for ranking in runs.rankings() {
            if let Some(v) = ndcg(ranking, &judgments, 5).unwrap() {
                manual.push(v);
            }
        }
        assert_eq!(count, manual.len());
        let expected = manual.iter().sum::<f64>() / manual.len() as f64;
        assert!((mean - expected).abs() < 1e-12);
    }

    #[test]
    fn pooling_unions_and_deduplicates() {
        let corpus = Corpus::from_records(
            (0..30)
                .map(|i| SentenceRecord::new(format!("d{i:02}"), format!("text {i}")))
                .collect(),
        )
        .unwrap();
        let top = |offset: usize| -> RankedList {
            let docs: Vec<(String, f64)> = (0..10)
                .map(|i| (format!("d{:02}", i + offset), 1.0 - i as f64 * 0.01))
                .collect();
            let refs: Vec<(&str, f64)> = docs.iter().map(|(d, s)| (d.as_str(), *s)).collect();
            list("q1", &refs)
        };
        let mut a = RunSet::new("a").unwrap();
        a.insert(top(0)).unwrap();
        let mut b = RunSet::new("b").unwrap();
        b.insert(top(10)).unwrap();
        let disjoint = pool_top_k(&[&a, &b], &corpus, 10).unwrap();
        assert_eq!(disjoint.len(), 20);
        let identical = pool_top_k(&[&a, &a], &corpus, 10).unwrap();
        assert_eq!(identical.len(), 10);

        let mut c = RunSet::new("c").unwrap();
        c.insert(top(5)).unwrap();
        let pooled = pool_top_k(&[&a, &b, &c], &corpus, 10).unwrap();
        let mut expected: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
        for runset in [&a, &b, &c] {
            for entry in &runset.get("q1").unwrap().entries[..10] {
                expected.insert(entry.doc_id.clone());
            }
        }
        let got: std::collections::BTreeSet<String> =
            pooled.iter().map(|r| r.doc_id.clone()).collect();
        assert_eq!(got, expected);
        assert!(pooled.windows(2).all(|w| w[0] < w[1]), "rows must be sorted");
        assert_eq!(pooled[0].doc_text, corpus.require(&pooled[0].doc_id).unwrap().text);

        let mut sheet = Vec::new();
        write_worksheet(&mut sheet, &pooled[..1]).unwrap();
        let line = String::from_utf8(sheet).unwrap();
        assert_eq!(line.matches('\t').count(), 3, "grade column stays empty");
    }

    #[test]
    fn qrels_round_trip_and_validation() {
        let judgments = qrels(&[("q1", "d7", 3), ("q1", "d2", 0), ("q2", "d7", 1)]);
        let mut buf = Vec::new();
        judgments.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("q1 0 d7 3"));
        let back = JudgmentSet::read_from(buf.as_slice(), Path::new("q.qrels")).unwrap();
        assert_eq!(back, judgments);

        let dup = b"q1 0 d1 2\nq1 0 d1 3\n";
        let err = JudgmentSet::read_from(&dup[..], Path::new("q.qrels")).unwrap_err();
        assert!(err.to_string().contains("q.qrels:2"));
        let bad_grade = b"q1 0 d1 4\n";
        assert!(JudgmentSet::read_from(&bad_grade[..], Path::new("q.qrels")).is_err());
        let bad_marker = b"q1 1 d1 2\n";
        assert!(JudgmentSet::read_from(&bad_marker[..], Path::new("q.qrels")).is_err());
    }

    #[test]
    fn run_files_round_trip_byte_stably()  {
        let mut runs = RunSet::new("sys-1").unwrap();
        runs.insert(list("q1", &[("d3", 2.5), ("d1", 1.125), ("d9", 0.1)]))
            .unwrap();
        runs.insert(list("q2", &[("d2", 0.3333333333333333)])).unwrap();
        let mut first = Vec::new();
        runs.write_to(&mut first).unwrap();
        let back = RunSet::read_from(first.as_slice(), Path::new("r.run")).unwrap();
        assert_eq!(back.tag(), "sys-1");
        let mut second = Vec::new();
        back.write_to(&mut second).unwrap();
        assert_eq!(first, second, "second write must be byte-identical");
        assert_eq!(back.get("q1").unwrap().entries[1].score, 1.125);
    }

    #[test]
    fn run_files_reject_malformed_lines() {
        let missing = b"q1 Q0 d1 1\n";
        assert!(RunSet::read_from(&missing[..], Path::new("r.run")).is_err());
        let marker = b"q1 XX d1 1 0.5 tag\n";
        assert!(RunSet::read_from(&marker[..], Path::new("r.run")).is_err());
        let gap = b"q1 Q0 d1 1 0.9 tag\nq1 Q0 d2 3 0.8 tag\n";
        let err = RunSet::read_from(&gap[..], Path::new("r.run")).unwrap_err();
        assert!(err.to_string().contains("r.run:2"));
        let retag = b"q1 Q0 d1 1 0.9 tag\nq2 Q0 d2 1 0.8 other\n";
        assert!(RunSet::read_from(&retag[..], Path::new("r.run")).is_err());
        let dup = b"q1 Q0 d1 1 0.9 tag\nq1 Q0 d1 2 0.8 tag\n";
        assert!(RunSet::read_from(&dup[..], Path::new("r.run")).is_err());
        let empty = b"";
        assert!(RunSet::read_from(&empty[..], Path::new("r.run")).is_err());
    }

    #[test]
    fn runset_rejects_duplicate_queries_and_anonymous_lists() {
        let mut runs = RunSet::new("t").unwrap();
        runs.insert(list("q1", &[("d1", 1.0)])).unwrap();
        assert!(runs.insert(list("q1", &[("d2", 1.0)])).is_err());
        assert!(runs.insert(list("", &[("d2", 1.0)])).is_err());
        assert!(RunSet::new("bad tag").is_err());
    }
}
