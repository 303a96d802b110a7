//! Command-line front end for the similar-sentence retrieval toolkit.
//!
//! Subcommands cover the whole pipeline: corpus ingestion, statistics,
//! index building, projection training, pair generation and export,
//! search, reranking, fusion, evaluation, judgment pooling, the
//! seven-system comparison, and synthetic-corpus generation.
//!
//! Exit codes: 0 on success, 1 for command-line usage errors, 2 for any
//! configuration or data failure.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use simsent::config::{parse_config, PipelineSettings, CONFIG_KEYS};
use simsent::corpus::Corpus;
use simsent::embed::{write_synonyms_path, ComponentStats, PoolingMode};
use simsent::error::{Error, Result};
use simsent::eval::{mean_ndcg, pool_top_k, write_worksheet, JudgmentSet, RunSet};
use simsent::fuse::{fuse, FusionInput};
use simsent::lexical::{
    bm25_search, sdm_search, Bm25Params, InvertedIndex, SdmCandidates, SdmParams,
};
use simsent::pipeline::{
    build_provider, build_vector_index, corpus_component_stats, run_ablation, search_vector,
    train_projection, Vectorizer,
};
use simsent::ranked::RankedList;
use simsent::rerank::{
    build_training_pairs, export_cross_encoder_inputs, rerank, PairRef, PairScorer, RerankConfig,
    ScoreFileScorer, SiameseScorer,
};
use simsent::siamese::{
    read_pairs_path, sample_random_pairs, train, vectorize_pairs, write_pairs_path,
    ProjectionModel,
};
use simsent::synth::{generate, SynthParams};

/// Similar-sentence retrieval, ranking, and evaluation.
#[derive(Parser)]
#[command(name = "simsent", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by the pipeline commands: an optional key=value file
/// plus repeatable overrides. Overrides win over the file; either source
/// accepts exactly the documented setting keys.
#[derive(Args, Default)]
struct SettingsArgs {
    /// Settings file with one key=value per line (# comments allowed).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one setting, e.g. --set pooling=mean (repeatable).
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl SettingsArgs {
    fn load(&self) -> Result<PipelineSettings> {
        let mut map = match &self.config {
            Some(path) => {
                let file = File::open(path).map_err(|e| Error::io(path, e))?;
                parse_config(std::io::BufReader::new(file), path)?
            }
            None => BTreeMap::new(),
        };
        for item in &self.set {
            let Some((key, value)) = item.split_once('=') else {
                return Err(Error::Config(format!(
                    "override {item:?} is not of the form key=value"
                )));
            };
            let key = key.trim();
            if !CONFIG_KEYS.contains(&key) {
                return Err(Error::Config(format!("unknown setting {key:?}")));
            }
            // Unlike duplicate file keys, a repeated override wins silently:
            // later command-line words override earlier ones.
            map.insert(key.to_owned(), value.trim().to_owned());
        }
        PipelineSettings::from_map(&map)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus file and report its shape.
    Ingest {
        /// Corpus JSONL file ({"id": ..., "text": ...} per line).
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        /// Rewrite the validated corpus here in normalized form.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Compute per-dimension token statistics used by tf-idf pooling.
    Stats {
        #[command(flatten)]
        settings: SettingsArgs,
        /// Corpus JSONL file (overrides the corpus setting).
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Output statistics file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Build the positional inverted index for the lexical rankers.
    IndexLexical {
        /// Corpus JSONL file.
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        /// Output index file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Embed and pool every sentence, then build the vector index.
    IndexVector {
        #[command(flatten)]
        settings: SettingsArgs,
        /// Corpus JSONL file (overrides the corpus setting).
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Apply a trained projection to every sentence vector.
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// Output index file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Fit the projection that pulls labeled pairs together.
    TrainSiamese {
        #[command(flatten)]
        settings: SettingsArgs,
        /// Corpus JSONL file (overrides the corpus setting).
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Query JSONL file (overrides the queries setting).
        #[arg(long, value_name = "FILE")]
        queries: Option<PathBuf>,
        /// Graded judgments to derive training pairs from.
        #[arg(long, value_name = "FILE", conflicts_with = "pairs")]
        qrels: Option<PathBuf>,
        /// Pre-built labeled pairs file (id<TAB>id<TAB>label).
        #[arg(long, value_name = "FILE")]
        pairs: Option<PathBuf>,
        /// Output model file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Also write the per-epoch loss history, one value per line.
        #[arg(long, value_name = "FILE")]
        history: Option<PathBuf>,
    },
    /// Build labeled training pairs from judgments, or random ones without.
    MakePairs {
        #[command(flatten)]
        settings: SettingsArgs,
        /// Corpus JSONL file (overrides the corpus setting).
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Query JSONL file (overrides the queries setting).
        #[arg(long, value_name = "FILE")]
        queries: Option<PathBuf>,
        /// Graded judgments; omit to sample unlabeled random pairs only.
        #[arg(long, value_name = "FILE")]
        qrels: Option<PathBuf>,
        /// Output pairs file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Export pairs as cross-encoder input lines.
    ExportXenc {
        /// Labeled pairs file.
        #[arg(long, value_name = "FILE")]
        pairs: PathBuf,
        /// Corpus JSONL file resolving result ids.
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        /// Query JSONL file resolving query ids.
        #[arg(long, value_name = "FILE")]
        queries: PathBuf,
        /// Output text file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Rank the corpus against one query text.
    Search {
        #[command(flatten)]
        settings: SettingsArgs,
        /// Corpus JSONL file (overrides the corpus setting).
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Ranking system to apply.
        #[arg(long, default_value = "vector", value_parser = ["bm25", "sdm", "vector"])]
        system: String,
        /// Apply a trained projection (vector system only).
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// Number of results to print.
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        /// Query text.
        query: String,
    },
    /// Re-order the head of each ranking in a run file with a pair scorer.
    Rerank {
        #[command(flatten)]
        settings: SettingsArgs,
        /// Run file to rerank.
        #[arg(long, value_name = "FILE")]
        run: PathBuf,
        /// Corpus JSONL file resolving candidate texts.
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Query JSONL file resolving query texts.
        #[arg(long, value_name = "FILE")]
        queries: Option<PathBuf>,
        /// Score with a trained projection model.
        #[arg(long, value_name = "FILE", conflicts_with = "scores")]
        model: Option<PathBuf>,
        /// Score from a precomputed (query, doc, score) file instead.
        #[arg(long, value_name = "FILE")]
        scores: Option<PathBuf>,
        /// Tag for the output run (default: input tag + "-reranked").
        #[arg(long)]
        tag: Option<String>,
        /// Output run file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Merge run files by weighted reciprocal-free rank fusion.
    Fuse {
        #[command(flatten)]
        settings: SettingsArgs,
        /// Run files to merge, best-trusted first.
        #[arg(long, value_name = "FILE", num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        /// Comma-separated positive integer weights, one per run
        /// (default: the fusion-weights setting).
        #[arg(long)]
        weights: Option<String>,
        /// Tag for the fused run.
        #[arg(long, default_value = "fused")]
        tag: String,
        /// Output run file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Score a run file against graded judgments.
    Eval {
        #[command(flatten)]
        settings: SettingsArgs,
        /// Run file to score.
        #[arg(long, value_name = "FILE")]
        run: PathBuf,
        /// Graded judgments file.
        #[arg(long, value_name = "FILE")]
        qrels: PathBuf,
        /// Comma-separated cutoffs (default: the eval-k setting).
        #[arg(short, long)]
        k: Option<String>,
    },
    /// Pool the top results of several runs into a judgment worksheet.
    Pool {
        /// Run files to pool.
        #[arg(long, value_name = "FILE", num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        /// Corpus JSONL file resolving document texts.
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        /// Pooling depth per run and query.
        #[arg(short, long, default_value_t = simsent::eval::DEFAULT_POOL_DEPTH)]
        k: usize,
        /// Output worksheet file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Run the seven-system comparison and write runs plus a report.
    Ablate {
        #[command(flatten)]
        settings: SettingsArgs,
        /// Corpus JSONL file (overrides the corpus setting).
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Query JSONL file (overrides the queries setting).
        #[arg(long, value_name = "FILE")]
        queries: Option<PathBuf>,
        /// Graded judgments file.
        #[arg(long, value_name = "FILE")]
        qrels: PathBuf,
        /// Output directory (overrides the out-dir setting).
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Generate a synthetic paraphrase-cluster corpus with judgments.
    Synth {
        /// Number of relevance clusters.
        #[arg(long, default_value_t = 20)]
        clusters: usize,
        /// Sentences per cluster.
        #[arg(long, default_value_t = 5)]
        paraphrases: usize,
        /// Fraction of word slots given paraphrase-specific surfaces
        /// (0 = fully shared vocabulary, 1 = fully disjoint).
        #[arg(long, default_value_t = 1.0)]
        split: f64,
        /// Tokens per sentence.
        #[arg(long, default_value_t = 8)]
        words: usize,
        /// Shuffle seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Directory receiving corpus.jsonl, synonyms.tsv, and qrels.txt.
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; everything else is
            // a usage error.
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp
                | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err}");
        let mut source = std::error::Error::source(&err);
        while let Some(cause) = source {
            eprintln!("  caused by: {cause}");
            source = cause.source();
        }
        std::process::exit(2);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest { corpus, out } => cmd_ingest(&corpus, out.as_deref()),
        Command::Stats {
            settings,
            corpus,
            out,
        } => cmd_stats(&settings, corpus, &out),
        Command::IndexLexical { corpus, out } => cmd_index_lexical(&corpus, &out),
        Command::IndexVector {
            settings,
            corpus,
            model,
            out,
        } => cmd_index_vector(&settings, corpus, model.as_deref(), &out),
        Command::TrainSiamese {
            settings,
            corpus,
            queries,
            qrels,
            pairs,
            out,
            history,
        } => cmd_train_siamese(
            &settings,
            corpus,
            queries,
            qrels.as_deref(),
            pairs.as_deref(),
            &out,
            history.as_deref(),
        ),
        Command::MakePairs {
            settings,
            corpus,
            queries,
            qrels,
            out,
        } => cmd_make_pairs(&settings, corpus, queries, qrels.as_deref(), &out),
        Command::ExportXenc {
            pairs,
            corpus,
            queries,
            out,
        } => cmd_export_xenc(&pairs, &corpus, &queries, &out),
        Command::Search {
            settings,
            corpus,
            system,
            model,
            k,
            query,
        } => cmd_search(&settings, corpus, &system, model.as_deref(), k, &query),
        Command::Rerank {
            settings,
            run,
            corpus,
            queries,
            model,
            scores,
            tag,
            out,
        } => cmd_rerank(
            &settings,
            &run,
            corpus,
            queries,
            model.as_deref(),
            scores.as_deref(),
            tag,
            &out,
        ),
        Command::Fuse {
            settings,
            runs,
            weights,
            tag,
            out,
        } => cmd_fuse(&settings, &runs, weights.as_deref(), &tag, &out),
        Command::Eval {
            settings,
            run,
            qrels,
            k,
        } => cmd_eval(&settings, &run, &qrels, k.as_deref()),
        Command::Pool {
            runs,
            corpus,
            k,
            out,
        } => cmd_pool(&runs, &corpus, k, &out),
        Command::Ablate {
            settings,
            corpus,
            queries,
            qrels,
            out_dir,
        } => cmd_ablate(&settings, corpus, queries, &qrels, out_dir),
        Command::Synth {
            clusters,
            paraphrases,
            split,
            words,
            seed,
            out_dir,
        } => cmd_synth(clusters, paraphrases, split, words, seed, &out_dir),
    }
}

/// Resolve a path given on the command line, falling back to the settings
/// file; the command line wins when both are present.
fn resolve_path(
    flag: Option<PathBuf>,
    setting: &Option<PathBuf>,
    what: &str,
) -> Result<PathBuf> {
    flag.or_else(|| setting.clone()).ok_or_else(|| {
        Error::Config(format!(
            "no {what} given: pass --{what} or set {what}= in the settings file"
        ))
    })
}

fn create_output(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(BufWriter::new(file))
}

fn parse_usize_list(text: &str, what: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad {what} entry {part:?}")))
        })
        .collect()
}

fn parse_weight_list(text: &str) -> Result<Vec<u32>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<u32>()
                .map_err(|_| Error::Config(format!("bad fusion weight {part:?}")))
        })
        .collect()
}

fn cmd_ingest(corpus_path: &Path, out: Option<&Path>) -> Result<()> {
    let corpus = Corpus::from_jsonl_path(corpus_path)?;
    let token_total: usize = corpus.sentences().iter().map(|s| s.tokens.len()).sum();
    let empty = corpus
        .sentences()
        .iter()
        .filter(|s| s.tokens.is_empty())
        .count();
    if let Some(path) = out {
        let mut w = create_output(path)?;
        corpus.write_jsonl(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    println!(
        "{} sentences, {} tokens, {} distinct terms, {} without tokens",
        corpus.len(),
        token_total,
        corpus.stats().df.len(),
        empty
    );
    Ok(())
}

fn cmd_stats(settings: &SettingsArgs, corpus: Option<PathBuf>, out: &Path) -> Result<()> {
    let settings = settings.load()?;
    let corpus_path = resolve_path(corpus, &settings.corpus, "corpus")?;
    let corpus = Corpus::from_jsonl_path(&corpus_path)?;
    let provider = build_provider(&settings)?;
    let comp = corpus_component_stats(&corpus, provider.as_ref())?;
    comp.write_to_path(out)?;
    println!(
        "{} token observations across {} dimensions -> {}",
        comp.count(),
        comp.d(),
        out.display()
    );
    Ok(())
}

fn cmd_index_lexical(corpus_path: &Path, out: &Path) -> Result<()> {
    let corpus = Corpus::from_jsonl_path(corpus_path)?;
    let index = InvertedIndex::build(&corpus);
    index.write_to_path(out)?;
    println!(
        "{} documents, {} terms, {} tokens -> {}",
        index.doc_count(),
        index.terms().count(),
        index.total_tokens(),
        out.display()
    );
    Ok(())
}

/// Build the sentence vectorizer a command needs: the token statistics are
/// computed only when tf-idf pooling asks for them, and an optional trained
/// projection is applied after pooling.
struct VectorStage {
    provider: Box<dyn simsent::embed::EmbeddingProvider>,
    comp: Option<ComponentStats>,
    model: Option<ProjectionModel>,
}

impl VectorStage {
    fn prepare(
        settings: &PipelineSettings,
        corpus: &Corpus,
        model_path: Option<&Path>,
    ) -> Result<Self> {
        let provider = build_provider(settings)?;
        let comp = match settings.pooling {
            PoolingMode::Tfidf => Some(corpus_component_stats(corpus, provider.as_ref())?),
            PoolingMode::Mean => None,
        };
        let model = model_path.map(ProjectionModel::read_from_path).transpose()?;
        Ok(VectorStage {
            provider,
            comp,
            model,
        })
    }

    fn vectorizer<'a>(&'a self, corpus: &'a Corpus, settings: &PipelineSettings) -> Result<Vectorizer<'a>> {
        let context = self
            .comp
            .as_ref()
            .map(|comp| (corpus.stats(), comp));
        Vectorizer::new(
            self.provider.as_ref(),
            settings.pooling,
            context,
            self.model.as_ref(),
        )
    }
}

fn cmd_index_vector(
    settings: &SettingsArgs,
    corpus: Option<PathBuf>,
    model: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let settings = settings.load()?;
    let corpus_path = resolve_path(corpus, &settings.corpus, "corpus")?;
    let corpus = Corpus::from_jsonl_path(&corpus_path)?;
    let stage = VectorStage::prepare(&settings, &corpus, model)?;
    let vectorizer = stage.vectorizer(&corpus, &settings)?;
    let vectors = vectorizer.vectorize_corpus(&corpus)?;
    let index = build_vector_index(&vectors, &settings)?;
    index.write_to_path(out)?;
    println!(
        "{} vectors of dimension {} -> {}",
        index.len(),
        index.d(),
        out.display()
    );
    Ok(())
}

fn cmd_train_siamese(
    settings: &SettingsArgs,
    corpus: Option<PathBuf>,
    queries: Option<PathBuf>,
    qrels: Option<&Path>,
    pairs_path: Option<&Path>,
    out: &Path,
    history_path: Option<&Path>,
) -> Result<()> {
    let settings = settings.load()?;
    let corpus_path = resolve_path(corpus, &settings.corpus, "corpus")?;
    let queries_path = resolve_path(queries, &settings.queries, "queries")?;
    let corpus = Corpus::from_jsonl_path(&corpus_path)?;
    let queries = Corpus::from_jsonl_path(&queries_path)?;
    let provider = build_provider(&settings)?;

    let (model, history) = match (qrels, pairs_path) {
        (Some(qrels), None) => {
            let judgments = JudgmentSet::read_from_path(qrels)?;
            train_projection(&corpus, &queries, &judgments, provider.as_ref(), &settings)?
        }
        (None, Some(pairs_path)) => {
            let records = read_pairs_path(pairs_path)?;
            let mean = Vectorizer::new(provider.as_ref(), PoolingMode::Mean, None, None)?;
            let query_table = mean.vector_table(&queries)?;
            let doc_table = mean.vector_table(&corpus)?;
            let pairs = vectorize_pairs(&records, &query_table, &doc_table)?;
            let d_out = if settings.projection_dim == 0 {
                provider.dim()
            } else {
                settings.projection_dim
            };
            train(&pairs, provider.dim(), d_out, &settings.train)?
        }
        _ => {
            return Err(Error::Config(
                "pass exactly one of --qrels or --pairs".into(),
            ))
        }
    };

    model.write_to_path(out)?;
    if let Some(path) = history_path {
        let mut w = create_output(path)?;
        for loss in &history {
            writeln!(w, "{loss}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    let first = history.first().copied().unwrap_or(f64::NAN);
    let last = history.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained {}x{} projection over {} epochs, loss {first:.6} -> {last:.6} -> {}",
        model.d_in(),
        model.d_out(),
        history.len(),
        out.display()
    );
    Ok(())
}

fn cmd_make_pairs(
    settings: &SettingsArgs,
    corpus: Option<PathBuf>,
    queries: Option<PathBuf>,
    qrels: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let settings = settings.load()?;
    let corpus_path = resolve_path(corpus, &settings.corpus, "corpus")?;
    let corpus = Corpus::from_jsonl_path(&corpus_path)?;
    let records = match qrels {
        Some(qrels) => {
            let judgments = JudgmentSet::read_from_path(qrels)?;
            build_training_pairs(&judgments, &corpus, settings.random_pairs, settings.train.seed)?
        }
        None => {
            let queries_path = resolve_path(queries, &settings.queries, "queries")?;
            let queries = Corpus::from_jsonl_path(&queries_path)?;
            sample_random_pairs(
                &corpus,
                queries.sentences(),
                settings.random_pairs,
                settings.train.seed,
            )?
        }
    };
    write_pairs_path(out, &records)?;
    println!("{} pairs -> {}", records.len(), out.display());
    Ok(())
}

fn cmd_export_xenc(
    pairs_path: &Path,
    corpus_path: &Path,
    queries_path: &Path,
    out: &Path,
) -> Result<()> {
    let pairs = read_pairs_path(pairs_path)?;
    let corpus = Corpus::from_jsonl_path(corpus_path)?;
    let queries = Corpus::from_jsonl_path(queries_path)?;
    let mut w = create_output(out)?;
    export_cross_encoder_inputs(&pairs, &queries, &corpus, &mut w)?;
    w.flush().map_err(|e| Error::io(out, e))?;
    println!("{} lines -> {}", pairs.len(), out.display());
    Ok(())
}

fn cmd_search(
    settings: &SettingsArgs,
    corpus: Option<PathBuf>,
    system: &str,
    model: Option<&Path>,
    k: usize,
    query: &str,
) -> Result<()> {
    let settings = settings.load()?;
    let corpus_path = resolve_path(corpus, &settings.corpus, "corpus")?;
    let corpus = Corpus::from_jsonl_path(&corpus_path)?;
    let query_tokens = simsent::corpus::tokenize(query);

    let list = match system {
        "bm25" => {
            let index = InvertedIndex::build(&corpus);
            bm25_search(&query_tokens, &index, &Bm25Params::default(), k)?
        }
        "sdm" => {
            let index = InvertedIndex::build(&corpus);
            sdm_search(
                &query_tokens,
                &index,
                &SdmParams::default(),
                k,
                SdmCandidates::AnyTermMatch,
            )?
        }
        "vector" => {
            let stage = VectorStage::prepare(&settings, &corpus, model)?;
            let vectorizer = stage.vectorizer(&corpus, &settings)?;
            let vectors = vectorizer.vectorize_corpus(&corpus)?;
            let index = build_vector_index(&vectors, &settings)?;
            let nprobe = if settings.nprobe == 0 {
                None
            } else {
                Some(settings.nprobe)
            };
            search_vector(&index, &vectorizer, query, k, nprobe)?
        }
        other => return Err(Error::Config(format!("unknown system {other:?}"))),
    };

    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    for (pos, entry) in list.entries.iter().enumerate() {
        writeln!(w, "{}\t{}\t{}", pos + 1, entry.doc_id, entry.score)
            .map_err(|e| Error::io(Path::new("stdout"), e))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_rerank(
    settings: &SettingsArgs,
    run_path: &Path,
    corpus: Option<PathBuf>,
    queries: Option<PathBuf>,
    model_path: Option<&Path>,
    scores_path: Option<&Path>,
    tag: Option<String>,
    out: &Path,
) -> Result<()> {
    let settings = settings.load()?;
    let corpus_path = resolve_path(corpus, &settings.corpus, "corpus")?;
    let queries_path = resolve_path(queries, &settings.queries, "queries")?;
    let corpus = Corpus::from_jsonl_path(&corpus_path)?;
    let queries = Corpus::from_jsonl_path(&queries_path)?;
    let input = RunSet::read_from_path(run_path)?;

    // Both scorers are driven through the same trait object so the loop
    // below stays agnostic of where scores come from.
    let provider;
    let model;
    let siamese;
    let file_scores;
    let scorer: &dyn PairScorer = match (model_path, scores_path) {
        (Some(path), None) => {
            provider = build_provider(&settings)?;
            model = ProjectionModel::read_from_path(path)?;
            siamese = SiameseScorer::new(&model, provider.as_ref(), PoolingMode::Mean, None)?;
            &siamese
        }
        (None, Some(path)) => {
            file_scores = ScoreFileScorer::read_from_path(path)?;
            &file_scores
        }
        _ => {
            return Err(Error::Config(
                "pass exactly one of --model or --scores".into(),
            ))
        }
    };

    let tag = tag.unwrap_or_else(|| format!("{}-reranked", input.tag()));
    let mut output = RunSet::new(&tag)?;
    let config = RerankConfig {
        depth: settings.rerank_depth,
    };
    for list in input.rankings() {
        let query = queries.require(&list.query_id)?;
        let reranked = rerank(
            list,
            scorer,
            PairRef {
                id: &query.id,
                text: &query.text,
            },
            &corpus,
            &config,
        )?;
        output.insert(reranked)?;
    }
    output.write_to_path(out)?;
    println!(
        "reranked {} rankings to depth {} -> {}",
        output.len(),
        config.depth,
        out.display()
    );
    Ok(())
}

fn cmd_fuse(
    settings: &SettingsArgs,
    run_paths: &[PathBuf],
    weights: Option<&str>,
    tag: &str,
    out: &Path,
) -> Result<()> {
    let settings = settings.load()?;
    let weights = match weights {
        Some(text) => parse_weight_list(text)?,
        None => settings.fusion_weights.clone(),
    };
    if weights.len() != run_paths.len() {
        return Err(Error::Config(format!(
            "{} runs but {} weights",
            run_paths.len(),
            weights.len()
        )));
    }
    let runsets = run_paths
        .iter()
        .map(|p| RunSet::read_from_path(p))
        .collect::<Result<Vec<_>>>()?;

    // Queries are fused over the union: a run without a given query simply
    // contributes nothing to it.
    let mut query_ids: Vec<&str> = Vec::new();
    for runset in &runsets {
        for q in runset.queries() {
            if !query_ids.contains(&q) {
                query_ids.push(q);
            }
        }
    }
    query_ids.sort_unstable();

    let mut output = RunSet::new(tag)?;
    for query_id in query_ids {
        let rankings: Vec<RankedList> = runsets
            .iter()
            .map(|rs| {
                rs.get(query_id).cloned().unwrap_or_else(|| RankedList {
                    query_id: query_id.to_owned(),
                    entries: Vec::new(),
                })
            })
            .collect();
        let fused = fuse(&FusionInput {
            rankings: &rankings,
            weights: &weights,
        })?;
        output.insert(fused)?;
    }
    output.write_to_path(out)?;
    println!("fused {} runs over {} queries -> {}", runsets.len(), output.len(), out.display());
    Ok(())
}

fn cmd_eval(
    settings: &SettingsArgs,
    run_path: &Path,
    qrels_path: &Path,
    k: Option<&str>,
) -> Result<()> {
    let settings = settings.load()?;
    let cutoffs = match k {
        Some(text) => parse_usize_list(text, "cutoff")?,
        None => settings.eval_k.clone(),
    };
    let runset = RunSet::read_from_path(run_path)?;
    let judgments = JudgmentSet::read_from_path(qrels_path)?;
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    for cutoff in cutoffs {
        let (mean, evaluated) = mean_ndcg(&runset, &judgments, cutoff)?;
        writeln!(w, "ndcg@{cutoff}\t{mean}\t{evaluated}")
            .map_err(|e| Error::io(Path::new("stdout"), e))?;
    }
    Ok(())
}

fn cmd_pool(run_paths: &[PathBuf], corpus_path: &Path, k: usize, out: &Path) -> Result<()> {
    let corpus = Corpus::from_jsonl_path(corpus_path)?;
    let runsets = run_paths
        .iter()
        .map(|p| RunSet::read_from_path(p))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&RunSet> = runsets.iter().collect();
    let rows = pool_top_k(&refs, &corpus, k)?;
    let mut w = create_output(out)?;
    write_worksheet(&mut w, &rows).map_err(|e| Error::io(out, e))?;
    w.flush().map_err(|e| Error::io(out, e))?;
    println!("{} rows -> {}", rows.len(), out.display());
    Ok(())
}

fn cmd_ablate(
    settings: &SettingsArgs,
    corpus: Option<PathBuf>,
    queries: Option<PathBuf>,
    qrels: &Path,
    out_dir: Option<PathBuf>,
) -> Result<()> {
    let mut settings = settings.load()?;
    if let Some(dir) = out_dir {
        settings.out_dir = dir;
    }
    let corpus_path = resolve_path(corpus, &settings.corpus, "corpus")?;
    let queries_path = resolve_path(queries, &settings.queries, "queries")?;
    let corpus = Corpus::from_jsonl_path(&corpus_path)?;
    let queries = Corpus::from_jsonl_path(&queries_path)?;
    let judgments = JudgmentSet::read_from_path(qrels)?;
    let provider = build_provider(&settings)?;

    let output = run_ablation(&corpus, &queries, &judgments, provider.as_ref(), &settings)?;

    std::fs::create_dir_all(&settings.out_dir).map_err(|e| Error::io(&settings.out_dir, e))?;
    for runset in &output.runs {
        let path = settings.out_dir.join(format!("{}.run", runset.tag()));
        runset.write_to_path(&path)?;
    }
    let report_path = settings.out_dir.join("report.tsv");
    std::fs::write(&report_path, output.report.to_tsv())
        .map_err(|e| Error::io(&report_path, e))?;
    print!("{}", output.report.render());
    Ok(())
}

fn cmd_synth(
    clusters: usize,
    paraphrases: usize,
    split: f64,
    words: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<()> {
    let params = SynthParams {
        clusters,
        paraphrases,
        split,
        words_per_sentence: words,
        seed,
    };
    let output = generate(&params)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let corpus_path = out_dir.join("corpus.jsonl");
    let mut w = create_output(&corpus_path)?;
    output
        .corpus
        .write_jsonl(&mut w)
        .map_err(|e| Error::io(&corpus_path, e))?;
    w.flush().map_err(|e| Error::io(&corpus_path, e))?;

    let synonyms_path = out_dir.join("synonyms.tsv");
    write_synonyms_path(&synonyms_path, &output.synonyms)?;

    let qrels_path = out_dir.join("qrels.txt");
    output.judgments.write_to_path(&qrels_path)?;

    println!(
        "{} sentences, {} synonym entries, {} judgments -> {}",
        output.corpus.len(),
        output.synonyms.len(),
        output.judgments.len(),
        out_dir.display()
    );
    Ok(())
}
