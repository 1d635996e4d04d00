//! Pipeline configuration: defaults, a flat key=value config file, and
//! validation. CLI flags override file values, which override defaults.

use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;

use crate::clustering::{EPS_ASPECT_DEFAULT, EPS_EVIDENCE_DEFAULT, MIN_SAMPLES_DEFAULT};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Unreadable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line} is not `key = value`: {text:?}")]
    BadLine { line: usize, text: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {message}")]
    BadValue { key: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Remote,
    Mock,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(value: &str) -> Result<Self, Self::Err> {
        match value {
            "remote" => Ok(BackendKind::Remote),
            "mock" => Ok(BackendKind::Mock),
            other => Err(format!("expected `remote` or `mock`, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbedderKind {
    Remote,
    HashedLocal,
}

impl std::str::FromStr for EmbedderKind {
    type Err = String;

    fn from_str(value: &str) -> Result<Self, Self::Err> {
        match value {
            "remote" => Ok(EmbedderKind::Remote),
            "hashed-local" => Ok(EmbedderKind::HashedLocal),
            other => Err(format!("expected `remote` or `hashed-local`, got {other:?}")),
        }
    }
}

/// Everything a full pipeline run needs. Numeric defaults follow the
/// published configuration: eps 0.5/0.21, min_samples 1, top 8 evidence
/// pieces.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub backend_kind: BackendKind,
    pub model: String,
    pub endpoint: String,
    pub api_key_env: String,
    pub timeout_secs: u64,
    /// Mock rule file; required when the backend is mock.
    pub seed_fixtures: Option<PathBuf>,

    pub embedder_kind: EmbedderKind,
    pub embedding_model: String,
    pub embedding_endpoint: String,
    pub embedding_api_key_env: String,
    pub embedding_dimension: usize,
    pub embedding_batch_size: usize,

    pub eps_aspect: f64,
    pub eps_evidence: f64,
    pub min_samples: usize,
    pub top_n: usize,
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub prompt_aspect_cap: usize,
    pub skip_threshold: f64,
    pub retry_attempts: usize,

    pub cache_dir: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Optional line-delimited JSON file of `{product_id, text}` reference
    /// summaries for ROUGE.
    pub references: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            backend_kind: BackendKind::Mock,
            model: "mock-model".to_owned(),
            endpoint: "https://api.openai.com/v1/chat/completions".to_owned(),
            api_key_env: "OPENAI_API_KEY".to_owned(),
            timeout_secs: 60,
            seed_fixtures: None,
            embedder_kind: EmbedderKind::HashedLocal,
            embedding_model: "text-embedding-3-small".to_owned(),
            embedding_endpoint: "https://api.openai.com/v1/embeddings".to_owned(),
            embedding_api_key_env: "OPENAI_API_KEY".to_owned(),
            embedding_dimension: 256,
            embedding_batch_size: 64,
            eps_aspect: EPS_ASPECT_DEFAULT,
            eps_evidence: EPS_EVIDENCE_DEFAULT,
            min_samples: MIN_SAMPLES_DEFAULT,
            top_n: 8,
            damping: 0.85,
            tolerance: 1e-6,
            max_iterations: 200,
            prompt_aspect_cap: 10,
            skip_threshold: 0.10,
            retry_attempts: 3,
            cache_dir: None,
            input: None,
            out_dir: None,
            references: None,
        }
    }
}

impl PipelineConfig {
    /// Apply a flat `key = value` file; `#` starts a comment. Unknown keys
    /// are errors so typos fail loudly.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Unreadable {
            path: path.to_owned(),
            source,
        })?;
        for (number, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::BadLine {
                    line: number + 1,
                    text: raw_line.to_owned(),
                });
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Set one key from its string form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e: T::Err| ConfigError::BadValue {
                key: key.to_owned(),
                message: e.to_string(),
            })
        }

        match key {
            "backend" => self.backend_kind = parse(key, value)?,
            "model" => self.model = value.to_owned(),
            "endpoint" => self.endpoint = value.to_owned(),
            "api_key_env" => self.api_key_env = value.to_owned(),
            "timeout_secs" => self.timeout_secs = parse(key, value)?,
            "seed_fixtures" => self.seed_fixtures = Some(PathBuf::from(value)),
            "embedder" => self.embedder_kind = parse(key, value)?,
            "embedding_model" => self.embedding_model = value.to_owned(),
            "embedding_endpoint" => self.embedding_endpoint = value.to_owned(),
            "embedding_api_key_env" => self.embedding_api_key_env = value.to_owned(),
            "embedding_dimension" => self.embedding_dimension = parse(key, value)?,
            "embedding_batch_size" => self.embedding_batch_size = parse(key, value)?,
            "eps_aspect" => self.eps_aspect = parse(key, value)?,
            "eps_evidence" => self.eps_evidence = parse(key, value)?,
            "min_samples" => self.min_samples = parse(key, value)?,
            "top_n" => self.top_n = parse(key, value)?,
            "damping" => self.damping = parse(key, value)?,
            "tolerance" => self.tolerance = parse(key, value)?,
            "max_iterations" => self.max_iterations = parse(key, value)?,
            "prompt_aspect_cap" => self.prompt_aspect_cap = parse(key, value)?,
            "skip_threshold" => self.skip_threshold = parse(key, value)?,
            "retry_attempts" => self.retry_attempts = parse(key, value)?,
            "cache_dir" => self.cache_dir = Some(PathBuf::from(value)),
            "input" => self.input = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            "references" => self.references = Some(PathBuf::from(value)),
            other => return Err(ConfigError::UnknownKey(other.to_owned())),
        }
        Ok(())
    }

    /// Check every numeric parameter against its documented range.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, message: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invalid(message.to_owned()))
            }
        };
        check(self.eps_aspect > 0.0, "eps_aspect must be > 0")?;
        check(self.eps_evidence > 0.0, "eps_evidence must be > 0")?;
        check(self.min_samples >= 1, "min_samples must be >= 1")?;
        check(self.top_n >= 1, "top_n must be >= 1")?;
        check(
            self.damping > 0.0 && self.damping < 1.0,
            "damping must lie in (0, 1)",
        )?;
        check(self.tolerance > 0.0, "tolerance must be > 0")?;
        check(self.max_iterations >= 1, "max_iterations must be >= 1")?;
        check(
            (0.0..=1.0).contains(&self.skip_threshold),
            "skip_threshold must lie in [0, 1]",
        )?;
        check(self.retry_attempts >= 1, "retry_attempts must be >= 1")?;
        check(
            self.embedding_dimension >= 1,
            "embedding_dimension must be >= 1",
        )?;
        check(
            self.embedding_batch_size >= 1,
            "embedding_batch_size must be >= 1",
        )?;
        check(self.prompt_aspect_cap >= 1, "prompt_aspect_cap must be >= 1")?;
        if self.backend_kind == BackendKind::Mock && self.seed_fixtures.is_none() {
            return Err(ConfigError::Invalid(
                "mock backend requires seed_fixtures (--seed-fixtures or config key)".to_owned(),
            ));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    pub fn extraction_options(&self) -> crate::extraction::ExtractionOptions {
        crate::extraction::ExtractionOptions {
            prompt_aspect_cap: self.prompt_aspect_cap,
            skip_threshold: self.skip_threshold,
            retry_attempts: self.retry_attempts,
            retry_base_delay: Duration::from_millis(100),
        }
    }

    pub fn rank_config(&self) -> crate::textrank::RankConfig {
        crate::textrank::RankConfig {
            damping: self.damping,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }
}
