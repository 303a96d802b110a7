//! End-to-end orchestration: text-to-vector plumbing, index assembly,
//! projection training from judgments, per-query run production, and the
//! seven-system comparison runner.

use std::collections::HashMap;

use crate::annindex::{default_nlist, FlatIndex, IvfIndex, VectorIndex};
use crate::config::{IndexChoice, PipelineSettings, ProviderChoice};
use crate::corpus::{tokenize, Corpus, SentenceRecord, TermStats};
use crate::embed::{
    pool, read_synonyms_path, ComponentStats, EmbeddingProvider, FileProvider, PoolingMode,
    SentenceVector, StubProvider,
};
use crate::error::{Error, Result};
use crate::eval::{mean_ndcg, JudgmentSet, RunSet};
use crate::fuse::{fuse, FusionInput};
use crate::lexical::{
    bm25_search, sdm_search, Bm25Params, InvertedIndex, SdmCandidates, SdmParams,
};
use crate::ranked::RankedList;
use crate::rerank::{build_training_pairs, rerank, PairRef, RerankConfig, SiameseScorer};
use crate::siamese::{train, vectorize_pairs, ProjectionModel};

/// The seven compared systems, in report order: the two lexical baselines,
/// reranked BM25, the unsupervised pooled-vector ranker, the trained
/// projection ranker, its reranked variant, and the weighted fusion of the
/// reranked projection ranker with BM25.
pub const ABLATION_SYSTEMS: [&str; 7] = [
    "bm25",
    "sdm",
    "bm25-reranked",
    "pooled",
    "projected",
    "projected-reranked",
    "fused",
];

/// Instantiate the configured token-vector provider.
pub fn build_provider(settings: &PipelineSettings) -> Result<Box<dyn EmbeddingProvider>> {
    let synonyms = match &settings.synonyms {
        Some(path) => read_synonyms_path(path)?,
        None => HashMap::new(),
    };
    match &settings.provider {
        ProviderChoice::Stub { dim, seed } => {
            Ok(Box::new(StubProvider::with_synonyms(*dim, *seed, synonyms)))
        }
        ProviderChoice::File(path) => {
            if !synonyms.is_empty() {
                return Err(Error::Config(
                    "synonym folding only applies to the stub provider".into(),
                ));
            }
            Ok(Box::new(FileProvider::from_path(path, settings.unknown_term)?))
        }
    }
}

/// Per-component moments of every token vector the corpus produces.
pub fn corpus_component_stats(
    corpus: &Corpus,
    provider: &dyn EmbeddingProvider,
) -> Result<ComponentStats> {
    let mut stats = ComponentStats::new(provider.dim());
    for s in corpus.sentences() {
        if s.tokens.is_empty() {
            continue;
        }
        let matrix = provider.embed(&s.tokens)?;
        stats.accumulate(&matrix)?;
    }
    Ok(stats)
}

/// The full text-to-vector path: tokenize, embed, pool, and optionally
/// project. Degenerate texts (no tokens, or a vector that cancels to zero)
/// produce `None` rather than an unusable zero vector.
pub struct Vectorizer<'a> {
    provider: &'a dyn EmbeddingProvider,
    pooling: PoolingMode,
    context: Option<(&'a TermStats, &'a ComponentStats)>,
    model: Option<&'a ProjectionModel>,
}

impl<'a> Vectorizer<'a> {
    pub fn new(
        provider: &'a dyn EmbeddingProvider,
        pooling: PoolingMode,
        context: Option<(&'a TermStats, &'a ComponentStats)>,
        model: Option<&'a ProjectionModel>,
    ) -> Result<Self> {
        if pooling == PoolingMode::Tfidf && context.is_none() {
            return Err(Error::InvalidParam(
                "weighted pooling requires term and component stats".into(),
            ));
        }
        if let Some((_, comp)) = context {
            if comp.d() != provider.dim() {
                return Err(Error::DimensionMismatch {
                    expected: provider.dim(),
                    got: comp.d(),
                });
            }
        }
        if let Some(model) = model {
            if model.d_in() != provider.dim() {
                return Err(Error::DimensionMismatch {
                    expected: provider.dim(),
                    got: model.d_in(),
                });
            }
        }
        Ok(Vectorizer {
            provider,
            pooling,
            context,
            model,
        })
    }

    /// Output dimensionality after the optional projection.
    pub fn dim(&self) -> usize {
        self.model
            .map(ProjectionModel::d_out)
            .unwrap_or_else(|| self.provider.dim())
    }

    pub fn vector_for_tokens(&self, tokens: &[String]) -> Result<Option<Vec<f64>>> {
        if tokens.is_empty() {
            return Ok(None);
        }
        let matrix = self.provider.embed(tokens)?;
        let pooled = pool(&matrix, self.pooling, self.context)?;
        let v = match self.model {
            Some(model) => model.project(&pooled)?,
            None => pooled,
        };
        if v.iter().all(|&x| x == 0.0) {
            return Ok(None);
        }
        Ok(Some(v))
    }

    pub fn vector(&self, text: &str) -> Result<Option<Vec<f64>>> {
        self.vector_for_tokens(&tokenize(text))
    }

    /// One vector per usable sentence; degenerate sentences are skipped
    /// with a warning so index construction stays total.
    pub fn vectorize_corpus(&self, corpus: &Corpus) -> Result<Vec<SentenceVector>> {
        let mut out = Vec::with_capacity(corpus.len());
        for s in corpus.sentences() {
            match self.vector_for_tokens(&s.tokens)? {
                Some(components) => out.push(SentenceVector {
                    sentence_id: s.id.clone(),
                    components,
                }),
                None => log::warn!(
                    "sentence {:?} has no usable vector and is left out of the index",
                    s.id
                ),
            }
        }
        Ok(out)
    }

    /// The same vectors keyed by sentence id.
    pub fn vector_table(&self, corpus: &Corpus) -> Result<HashMap<String, Vec<f64>>> {
        Ok(self
            .vectorize_corpus(corpus)?
            .into_iter()
            .map(|v| (v.sentence_id, v.components))
            .collect())
    }
}

/// Build the configured nearest-neighbor index over sentence vectors.
pub fn build_vector_index(
    vectors: &[SentenceVector],
    settings: &PipelineSettings,
) -> Result<VectorIndex> {
    match settings.index {
        IndexChoice::Flat => Ok(VectorIndex::Flat(FlatIndex::build(vectors)?)),
        IndexChoice::Ivf => {
            let nlist = if settings.nlist == 0 {
                default_nlist(vectors.len())
            } else {
                settings.nlist
            };
            Ok(VectorIndex::Ivf(IvfIndex::build(
                vectors,
                nlist,
                settings.index_seed,
            )?))
        }
    }
}

/// Vector search over free query text. A degenerate query returns an empty
/// list (with a warning) instead of failing the batch.
pub fn search_vector(
    index: &VectorIndex,
    vectorizer: &Vectorizer<'_>,
    query_text: &str,
    k: usize,
    nprobe: Option<usize>,
) -> Result<RankedList> {
    match vectorizer.vector(query_text)? {
        Some(v) => index.search(&v, k, nprobe),
        None => {
            log::warn!("query has no usable vector; returning no results");
            Ok(RankedList {
                query_id: String::new(),
                entries: Vec::new(),
            })
        }
    }
}

/// Run one ranker over every query sentence, collecting a tagged run set.
pub fn run_for_queries(
    tag: &str,
    queries: &Corpus,
    mut rank: impl FnMut(&SentenceRecord) -> Result<RankedList>,
) -> Result<RunSet> {
    let mut runs = RunSet::new(tag)?;
    for q in queries.sentences() {
        let mut list = rank(q)?;
        list.query_id = q.id.clone();
        runs.insert(list)?;
    }
    Ok(runs)
}

/// Train the projection from graded judgments: labeled id pairs are built
/// from the judgments plus seeded random negatives, resolved to mean-pooled
/// vectors, and fitted by cosine regression. Returns the model and the
/// per-epoch loss history.
pub fn train_projection(
    corpus: &Corpus,
    queries: &Corpus,
    judgments: &JudgmentSet,
    provider: &dyn EmbeddingProvider,
    settings: &PipelineSettings,
) -> Result<(ProjectionModel, Vec<f64>)> {
    let records =
        build_training_pairs(judgments, corpus, settings.random_pairs, settings.train.seed)?;
    let mean = Vectorizer::new(provider, PoolingMode::Mean, None, None)?;
    let query_table = mean.vector_table(queries)?;
    let doc_table = mean.vector_table(corpus)?;
    let pairs = vectorize_pairs(&records, &query_table, &doc_table)?;
    let d_out = if settings.projection_dim == 0 {
        provider.dim()
    } else {
        settings.projection_dim
    };
    train(&pairs, provider.dim(), d_out, &settings.train)
}

/// One comparison row: the system tag, one mean nDCG per requested cutoff,
/// and how many queries entered each mean.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub system: String,
    pub scores: Vec<f64>,
    pub evaluated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub eval_k: Vec<usize>,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    /// Machine-readable tab-separated form, full float precision.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("system");
        for k in &self.eval_k {
            out.push_str(&format!("\tndcg@{k}"));
        }
        out.push_str("\tqueries\n");
        for row in &self.rows {
            out.push_str(&row.system);
            for score in &row.scores {
                out.push_str(&format!("\t{score}"));
            }
            out.push_str(&format!("\t{}\n", row.evaluated));
        }
        out
    }

    /// Aligned human-readable table, scores at four decimals.
    pub fn render(&self) -> String {
        let name_width = self
            .rows
            .iter()
            .map(|r| r.system.len())
            .chain(["system".len()])
            .max()
            .unwrap_or(6);
        let mut out = format!("{:<name_width$}", "system");
        for k in &self.eval_k {
            out.push_str(&format!("  {:>8}", format!("ndcg@{k}")));
        }
        out.push_str("  queries\n");
        for row in &self.rows {
            out.push_str(&format!("{:<name_width$}", row.system));
            for score in &row.scores {
                out.push_str(&format!("  {score:>8.4}"));
            }
            out.push_str(&format!("  {:>7}\n", row.evaluated));
        }
        out
    }
}

/// Everything the comparison runner produces: the per-system run sets (in
/// [`ABLATION_SYSTEMS`] order) and the metric report.
#[derive(Debug, Clone)]
pub struct AblationOutput {
    pub report: AblationReport,
    pub runs: Vec<RunSet>,
}

/// Run all seven systems over the same corpus, queries, and judgments.
/// Deterministic end to end: reruns produce byte-identical run files and
/// reports, and each row equals the corresponding standalone invocation.
pub fn run_ablation(
    corpus: &Corpus,
    queries: &Corpus,
    judgments: &JudgmentSet,
    provider: &dyn EmbeddingProvider,
    settings: &PipelineSettings,
) -> Result<AblationOutput> {
    if settings.fusion_weights.len() != 2 {
        return Err(Error::Config(format!(
            "the fused system combines exactly two rankings; got {} fusion weights",
            settings.fusion_weights.len()
        )));
    }
    let depth = settings.first_stage_depth;
    let rerank_config = RerankConfig {
        depth: settings.rerank_depth,
    };
    let wrap = |name: &str| {
        let name = name.to_owned();
        move |e: Error| Error::system(name.clone(), e)
    };

    // Shared stages.
    let lex = InvertedIndex::build(corpus);
    let comp = corpus_component_stats(corpus, provider)?;
    let pooled_vectorizer = Vectorizer::new(
        provider,
        PoolingMode::Tfidf,
        Some((corpus.stats(), &comp)),
        None,
    )?;
    let pooled_index = build_vector_index(&pooled_vectorizer.vectorize_corpus(corpus)?, settings)?;

    let (model, _history) = train_projection(corpus, queries, judgments, provider, settings)
        .map_err(wrap("projected"))?;
    let projected_vectorizer =
        Vectorizer::new(provider, PoolingMode::Mean, None, Some(&model))?;
    let projected_index =
        build_vector_index(&projected_vectorizer.vectorize_corpus(corpus)?, settings)
            .map_err(wrap("projected"))?;
    let scorer = SiameseScorer::new(&model, provider, PoolingMode::Mean, None)?;

    let nprobe = if settings.nprobe == 0 {
        None
    } else {
        Some(settings.nprobe)
    };

    // First-stage systems.
    let bm25_runs = run_for_queries("bm25", queries, |q| {
        bm25_search(&q.tokens, &lex, &Bm25Params::default(), depth)
    })
    .map_err(wrap("bm25"))?;
    let sdm_runs = run_for_queries("sdm", queries, |q| {
        sdm_search(
            &q.tokens,
            &lex,
            &SdmParams::default(),
            depth,
            SdmCandidates::AnyTermMatch,
        )
    })
    .map_err(wrap("sdm"))?;
    let pooled_runs = run_for_queries("pooled", queries, |q| {
        search_vector(&pooled_index, &pooled_vectorizer, &q.text, depth, nprobe)
    })
    .map_err(wrap("pooled"))?;
    let projected_runs = run_for_queries("projected", queries, |q| {
        search_vector(&projected_index, &projected_vectorizer, &q.text, depth, nprobe)
    })
    .map_err(wrap("projected"))?;

    // Reranked and fused systems built on the first-stage output.
    let rerank_over = |tag: &str, base: &RunSet| -> Result<RunSet> {
        run_for_queries(tag, queries, |q| {
            let list = base
                .get(&q.id)
                .ok_or_else(|| Error::UnknownId(q.id.clone()))?;
            rerank(
                list,
                &scorer,
                PairRef {
                    id: &q.id,
                    text: &q.text,
                },
                corpus,
                &rerank_config,
            )
        })
    };
    let bm25_reranked_runs =
        rerank_over("bm25-reranked", &bm25_runs).map_err(wrap("bm25-reranked"))?;
    let projected_reranked_runs =
        rerank_over("projected-reranked", &projected_runs).map_err(wrap("projected-reranked"))?;

    let fused_runs = run_for_queries("fused", queries, |q| {
        let first = projected_reranked_runs
            .get(&q.id)
            .ok_or_else(|| Error::UnknownId(q.id.clone()))?;
        let second = bm25_runs
            .get(&q.id)
            .ok_or_else(|| Error::UnknownId(q.id.clone()))?;
        let rankings = [first.clone(), second.clone()];
        fuse(&FusionInput {
            rankings: &rankings,
            weights: &settings.fusion_weights,
        })
    })
    .map_err(wrap("fused"))?;

    let runs = vec![
        bm25_runs,
        sdm_runs,
        bm25_reranked_runs,
        pooled_runs,
        projected_runs,
        projected_reranked_runs,
        fused_runs,
    ];
    let mut rows = Vec::with_capacity(runs.len());
    for runset in &runs {
        let mut scores = Vec::with_capacity(settings.eval_k.len());
        let mut evaluated = 0;
        for &k in &settings.eval_k {
            let (mean, count) =
                mean_ndcg(runset, judgments, k).map_err(wrap(runset.tag()))?;
            scores.push(mean);
            evaluated = count;
        }
        rows.push(AblationRow {
            system: runset.tag().to_owned(),
            scores,
            evaluated,
        });
    }
    Ok(AblationOutput {
        report: AblationReport {
            eval_k: settings.eval_k.clone(),
            rows,
        },
        runs,
    })
}
