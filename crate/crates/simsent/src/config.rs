//! Flat `key=value` configuration for the pipeline commands: one setting
//! per line, `#` comments, unknown keys rejected. Command-line flags
//! override file values at the CLI layer.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use crate::embed::{PoolingMode, UnknownTermPolicy};
use crate::error::{Error, Result};
use crate::siamese::TrainConfig;

/// Every key a config file may set.
pub const CONFIG_KEYS: &[&str] = &[
    "corpus",
    "queries",
    "provider",
    "stub-dim",
    "stub-seed",
    "synonyms",
    "unknown-term",
    "pooling",
    "index",
    "index-seed",
    "nlist",
    "nprobe",
    "first-stage-depth",
    "rerank-depth",
    "fusion-weights",
    "eval-k",
    "projection-dim",
    "random-pairs",
    "train-lr",
    "train-epochs",
    "train-batch",
    "train-seed",
    "out-dir",
];

/// Parse the raw key=value syntax: blank lines and `#` comments skipped,
/// keys must be known and unique.
pub fn parse_config(reader: impl BufRead, source: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(Error::parse(source, idx + 1, "expected key=value"));
        };
        let key = key.trim();
        let value = value.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(Error::parse(source, idx + 1, format!("unknown key {key:?}")));
        }
        if map.insert(key.to_owned(), value.to_owned()).is_some() {
            return Err(Error::parse(
                source,
                idx + 1,
                format!("key {key:?} set twice"),
            ));
        }
    }
    Ok(map)
}

/// Where token vectors come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderChoice {
    /// Deterministic hashed vectors: dimension and seed.
    Stub { dim: usize, seed: u64 },
    /// A term-vector table loaded from an embedding file.
    File(PathBuf),
}

/// Which nearest-neighbor structure to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexChoice {
    Flat,
    Ivf,
}

/// Typed settings with their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSettings {
    pub corpus: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub provider: ProviderChoice,
    pub synonyms: Option<PathBuf>,
    pub unknown_term: UnknownTermPolicy,
    pub pooling: PoolingMode,
    pub index: IndexChoice,
    /// Seeds the cell-assignment clustering of an inverted-file index.
    pub index_seed: u64,
    /// 0 selects the automatic square-root cell count.
    pub nlist: usize,
    /// 0 selects the index default probe count.
    pub nprobe: usize,
    pub first_stage_depth: usize,
    pub rerank_depth: usize,
    pub fusion_weights: Vec<u32>,
    pub eval_k: Vec<usize>,
    /// 0 keeps the provider dimension.
    pub projection_dim: usize,
    /// Zero-labeled random pairs per query when building training pairs.
    pub random_pairs: usize,
    pub train: TrainConfig,
    pub out_dir: PathBuf,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            corpus: None,
            queries: None,
            provider: ProviderChoice::Stub { dim: 16, seed: 1 },
            synonyms: None,
            unknown_term: UnknownTermPolicy::Zero,
            pooling: PoolingMode::Tfidf,
            index: IndexChoice::Flat,
            index_seed: 1,
            nlist: 0,
            nprobe: 0,
            first_stage_depth: 1000,
            rerank_depth: 100,
            fusion_weights: vec![2, 1],
            eval_k: vec![5, 10],
            projection_dim: 0,
            random_pairs: 4,
            train: TrainConfig::default(),
            out_dir: PathBuf::from("."),
        }
    }
}

fn parse_number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key}: bad value {value:?}: {e}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_number(key, s))
        .collect()
}

impl PipelineSettings {
    /// Apply parsed key=value entries on top of the defaults.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut s = PipelineSettings::default();
        let mut stub_dim: Option<usize> = None;
        let mut stub_seed: Option<u64> = None;
        for (key, value) in map {
            match key.as_str() {
                "corpus" => s.corpus = Some(PathBuf::from(value)),
                "queries" => s.queries = Some(PathBuf::from(value)),
                "provider" => {
                    s.provider = if value == "stub" {
                        ProviderChoice::Stub { dim: 16, seed: 1 }
                    } else if let Some(path) = value.strip_prefix("file:") {
                        if path.is_empty() {
                            return Err(Error::Config("provider: empty file path".into()));
                        }
                        ProviderChoice::File(PathBuf::from(path))
                    } else {
                        return Err(Error::Config(format!(
                            "provider: expected stub or file:<path>, got {value:?}"
                        )));
                    };
                }
                "stub-dim" => stub_dim = Some(parse_number(key, value)?),
                "stub-seed" => stub_seed = Some(parse_number(key, value)?),
                "synonyms" => s.synonyms = Some(PathBuf::from(value)),
                "unknown-term" => {
                    s.unknown_term = match value.as_str() {
                        "error" => UnknownTermPolicy::Error,
                        "zero" => UnknownTermPolicy::Zero,
                        _ => {
                            return Err(Error::Config(format!(
                                "unknown-term: expected error or zero, got {value:?}"
                            )))
                        }
                    };
                }
                "pooling" => {
                    s.pooling = match value.as_str() {
                        "tfidf" => PoolingMode::Tfidf,
                        "mean" => PoolingMode::Mean,
                        _ => {
                            return Err(Error::Config(format!(
                                "pooling: expected tfidf or mean, got {value:?}"
                            )))
                        }
                    };
                }
                "index" => {
                    s.index = match value.as_str() {
                        "flat" => IndexChoice::Flat,
                        "ivf" => IndexChoice::Ivf,
                        _ => {
                            return Err(Error::Config(format!(
                                "index: expected flat or ivf, got {value:?}"
                            )))
                        }
                    };
                }
                "index-seed" => s.index_seed = parse_number(key, value)?,
                "nlist" => s.nlist = parse_number(key, value)?,
                "nprobe" => s.nprobe = parse_number(key, value)?,
                "first-stage-depth" => s.first_stage_depth = parse_number(key, value)?,
                "rerank-depth" => s.rerank_depth = parse_number(key, value)?,
                "fusion-weights" => s.fusion_weights = parse_list(key, value)?,
                "eval-k" => s.eval_k = parse_list(key, value)?,
                "projection-dim" => s.projection_dim = parse_number(key, value)?,
                "random-pairs" => s.random_pairs = parse_number(key, value)?,
                "train-lr" => s.train.learning_rate = parse_number(key, value)?,
                "train-epochs" => s.train.epochs = parse_number(key, value)?,
                "train-batch" => s.train.batch_size = parse_number(key, value)?,
                "train-seed" => s.train.seed = parse_number(key, value)?,
                "out-dir" => s.out_dir = PathBuf::from(value),
                _ => unreachable!("parse_config rejects unknown keys"),
            }
        }
        if let ProviderChoice::Stub { dim, seed } = &mut s.provider {
            if let Some(d) = stub_dim {
                *dim = d;
            }
            if let Some(x) = stub_seed {
                *seed = x;
            }
        } else if stub_dim.is_some() || stub_seed.is_some() {
            return Err(Error::Config(
                "stub-dim/stub-seed only apply to the stub provider".into(),
            ));
        }
        s.validate()?;
        Ok(s)
    }

    pub fn from_reader(reader: impl BufRead, source: &Path) -> Result<Self> {
        PipelineSettings::from_map(&parse_config(reader, source)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        PipelineSettings::from_reader(std::io::BufReader::new(f), path)
    }

    pub fn validate(&self) -> Result<()> {
        if let ProviderChoice::Stub { dim, .. } = self.provider {
            if dim == 0 {
                return Err(Error::Config("stub-dim must be >= 1".into()));
            }
        }
        if self.first_stage_depth == 0 {
            return Err(Error::Config("first-stage-depth must be >= 1".into()));
        }
        if self.rerank_depth == 0 {
            return Err(Error::Config("rerank-depth must be >= 1".into()));
        }
        if self.fusion_weights.is_empty() || self.fusion_weights.contains(&0) {
            return Err(Error::Config(
                "fusion-weights needs at least one weight, all >= 1".into(),
            ));
        }
        if self.eval_k.is_empty() || self.eval_k.contains(&0) {
            return Err(Error::Config(
                "eval-k needs at least one cutoff, all >= 1".into(),
            ));
        }
        self.train.validate().map_err(|e| match e {
            Error::InvalidParam(m) => Error::Config(m),
            other => other,
        })?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_yields_defaults() {
        let settings =
            PipelineSettings::from_reader(&b""[..], Path::new("none.conf")).unwrap();
        assert_eq!(settings, PipelineSettings::default());
        assert_eq!(settings.rerank_depth, 100);
        assert_eq!(settings.eval_k, vec![5, 10]);
        assert_eq!(settings.fusion_weights, vec![2, 1]);
        assert_eq!(settings.first_stage_depth, 1000);
    }

    #[test]
    fn full_file_parses_and_overrides() {
        let text = b"# sample settings\n\
            corpus = data/corpus.jsonl\n\
            provider = stub\n\
            stub-dim = 32\n\
            stub-seed = 99\n\
            pooling = mean\n\
            index = ivf\n\
            nlist = 12\n\
            nprobe = 3\n\
            first-stage-depth = 200\n\
            rerank-depth = 50\n\
            fusion-weights = 1, 1\n\
            eval-k = 5\n\
            train-lr = 0.1\n\
            train-epochs = 10\n\
            \n\
            out-dir = out\n";
        let s = PipelineSettings::from_reader(&text[..], Path::new("t.conf")).unwrap();
        assert_eq!(s.corpus.as_deref(), Some(Path::new("data/corpus.jsonl")));
        assert_eq!(s.provider, ProviderChoice::Stub { dim: 32, seed: 99 });
        assert_eq!(s.pooling, PoolingMode::Mean);
        assert_eq!(s.index, IndexChoice::Ivf);
        assert_eq!((s.nlist, s.nprobe), (12, 3));
        assert_eq!(s.first_stage_depth, 200);
        assert_eq!(s.rerank_depth, 50);
        assert_eq!(s.fusion_weights, vec![1, 1]);
        assert_eq!(s.eval_k, vec![5]);
        assert_eq!(s.train.learning_rate, 0.1);
        assert_eq!(s.train.epochs, 10);
        assert_eq!(s.out_dir, PathBuf::from("out"));
    }

    #[test]
    fn file_provider_form_is_recognized() {
        let text = b"provider = file:vectors.semv\n";
        let s = PipelineSettings::from_reader(&text[..], Path::new("t.conf")).unwrap();
        assert_eq!(s.provider, ProviderChoice::File(PathBuf::from("vectors.semv")));
        let with_stub_key = b"provider = file:v.semv\nstub-dim = 8\n";
        assert!(PipelineSettings::from_reader(&with_stub_key[..], Path::new("t.conf")).is_err());
    }

    #[test]
    fn malformed_input_names_the_line() {
        let unknown = b"corpse = x\n";
        let err = parse_config(&unknown[..], Path::new("t.conf")).unwrap_err();
        assert!(err.to_string().contains("t.conf:1"));
        let no_eq = b"corpus data.jsonl\n";
        assert!(parse_config(&no_eq[..], Path::new("t.conf")).is_err());
        let dup = b"nlist = 1\nnlist = 2\n";
        let err = parse_config(&dup[..], Path::new("t.conf")).unwrap_err();
        assert!(err.to_string().contains("t.conf:2"));
    }

    #[test]
    fn typed_validation_rejects_bad_values() {
        for bad in [
            &b"nlist = many\n"[..],
            &b"pooling = max\n"[..],
            &b"index = hnsw\n"[..],
            &b"provider = net\n"[..],
            &b"fusion-weights = 1,0\n"[..],
            &b"eval-k = \n"[..],
            &b"rerank-depth = 0\n"[..],
            &b"train-lr = -1\n"[..],
            &b"unknown-term = panic\n"[..],
            &b"stub-dim = 0\n"[..],
        ] {
            assert!(
                PipelineSettings::from_reader(bad, Path::new("t.conf")).is_err(),
                "accepted {:?}",
                String::from_utf8_lossy(bad)
            );
        }
    }
}
