//! Pipeline orchestration: load reviews, run the staged per-product
//! pipeline, and emit reports.
//!
//! Stages run in a fixed order per product: induce-aspects, extract,
//! unify-aspects, cluster-evidence, select-representatives, score,
//! summarize, evaluate. Each stage's artifacts are line-delimited JSON
//! under `<out_dir>/<product_id>/stages/`, re-used across runs when the
//! stage's input hash is unchanged. Products are processed independently in
//! sorted id order; a stage failure aborts the run naming the stage.

pub mod stage;

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use thiserror::Error;

use crate::clustering::{cluster_aspects, cluster_evidence, ClusteringConfig, ClusteringError};
use crate::config::{BackendKind, ConfigError, EmbedderKind, PipelineConfig};
use crate::domain::{
    validate_corpus, Argument, AspectTaxonomy, DomainError, EvidenceCluster, Review, Summary,
    ValidatedCorpus,
};
use crate::embedding::{EmbeddingError, EmbeddingProvider, HashedEmbedder, RemoteEmbedder};
use crate::extraction::backend::{BackendError, LlmBackend, MockBackend, RemoteBackend};
use crate::extraction::cache::ResponseCache;
use crate::extraction::prompt::RasTemplate;
use crate::extraction::{extract_arguments, induce_initial_aspects, ExtractionError, SkipRecord};
use crate::metrics::{MetricReport, MetricsError};
use crate::scoring::{assemble_summary, rank_clusters};
use crate::textrank::{rewrite_cluster, select_representative, TextrankError};
use stage::{
    atomic_write, from_jsonl, sha256_hex, to_jsonl, ProductManifest, StageError, StageRunner,
};

use serde::{Deserialize, Serialize};

/// Pipeline failure, classified for process exit codes: configuration 1,
/// data 2, backend 3, skip-threshold abort 4.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error(
        "extraction aborted: {skipped} of {total} reviews skipped, over the {threshold} threshold"
    )]
    SkipThreshold {
        skipped: usize,
        total: usize,
        threshold: f64,
    },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Data(_) => 2,
            PipelineError::Backend(_) => 3,
            PipelineError::SkipThreshold { .. } => 4,
        }
    }

    /// Prefix the message with the failing stage and product.
    fn in_stage(self, stage: &str, product_id: &str) -> Self {
        let tag = |message: String| format!("stage {stage}, product {product_id}: {message}");
        match self {
            PipelineError::Config(m) => PipelineError::Config(tag(m)),
            PipelineError::Data(m) => PipelineError::Data(tag(m)),
            PipelineError::Backend(m) => PipelineError::Backend(tag(m)),
            other @ PipelineError::SkipThreshold { .. } => other,
        }
    }
}

impl From<ConfigError> for PipelineError {
    fn from(error: ConfigError) -> Self {
        PipelineError::Config(error.to_string())
    }
}

impl From<DomainError> for PipelineError {
    fn from(error: DomainError) -> Self {
        PipelineError::Data(error.to_string())
    }
}

impl From<EmbeddingError> for PipelineError {
    fn from(error: EmbeddingError) -> Self {
        match error {
            EmbeddingError::MissingApiKey(_) => PipelineError::Config(error.to_string()),
            EmbeddingError::Remote(_) | EmbeddingError::MalformedResponse(_) => {
                PipelineError::Backend(error.to_string())
            }
            EmbeddingError::DimensionMismatch { .. } => PipelineError::Data(error.to_string()),
        }
    }
}

impl From<BackendError> for PipelineError {
    fn from(error: BackendError) -> Self {
        match error {
            BackendError::MissingApiKey(_) | BackendError::BadFixture(_) => {
                PipelineError::Config(error.to_string())
            }
            other => PipelineError::Backend(other.to_string()),
        }
    }
}

impl From<ExtractionError> for PipelineError {
    fn from(error: ExtractionError) -> Self {
        match error {
            ExtractionError::SkipThresholdExceeded {
                skipped,
                total,
                threshold,
            } => PipelineError::SkipThreshold {
                skipped,
                total,
                threshold,
            },
            ExtractionError::EmptyCategory => PipelineError::Data(error.to_string()),
            ExtractionError::InductionFailed(inner) => {
                let wrapped: PipelineError = inner.into();
                match wrapped {
                    PipelineError::Config(m) => PipelineError::Config(m),
                    other => PipelineError::Backend(other.to_string()),
                }
            }
            ExtractionError::EmptyAspectList(_) => PipelineError::Backend(error.to_string()),
            ExtractionError::Cache(_) => PipelineError::Data(error.to_string()),
        }
    }
}

impl From<ClusteringError> for PipelineError {
    fn from(error: ClusteringError) -> Self {
        match error {
            ClusteringError::Embedding(inner) => inner.into(),
            other => PipelineError::Data(other.to_string()),
        }
    }
}

impl From<TextrankError> for PipelineError {
    fn from(error: TextrankError) -> Self {
        match error {
            TextrankError::Embedding(inner) => inner.into(),
            other => PipelineError::Data(other.to_string()),
        }
    }
}

impl From<MetricsError> for PipelineError {
    fn from(error: MetricsError) -> Self {
        match error {
            MetricsError::Clustering(inner) => inner.into(),
            other => PipelineError::Data(other.to_string()),
        }
    }
}

impl<E: Into<PipelineError>> From<StageError<E>> for PipelineError {
    fn from(error: StageError<E>) -> Self {
        match error {
            StageError::Compute(inner) => inner.into(),
            StageError::Io { path, source } => {
                PipelineError::Data(format!("cannot write {}: {source}", path.display()))
            }
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> PipelineError {
    PipelineError::Data(format!("{}: {source}", path.display()))
}

/// Parse an artifact that must hold exactly one record.
fn single_record<T: serde::de::DeserializeOwned>(
    bytes: &[u8],
    what: &str,
) -> Result<T, PipelineError> {
    let mut records: Vec<T> = from_jsonl(bytes)
        .map_err(|e| PipelineError::Data(format!("corrupt {what} artifact: {e}")))?;
    if records.len() != 1 {
        return Err(PipelineError::Data(format!(
            "corrupt {what} artifact: expected 1 record, found {}",
            records.len()
        )));
    }
    Ok(records.remove(0))
}

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StageId {
    Induce,
    Extract,
    UnifyAspects,
    ClusterEvidence,
    SelectRepresentatives,
    Score,
    Summarize,
    Evaluate,
}

impl StageId {
    pub fn name(self) -> &'static str {
        match self {
            StageId::Induce => "induce-aspects",
            StageId::Extract => "extract",
            StageId::UnifyAspects => "unify-aspects",
            StageId::ClusterEvidence => "cluster-evidence",
            StageId::SelectRepresentatives => "select-representatives",
            StageId::Score => "score",
            StageId::Summarize => "summarize",
            StageId::Evaluate => "evaluate",
        }
    }
}

/// Reviews loaded from a line-delimited JSON file, with per-line warnings.
#[derive(Debug, Clone)]
pub struct LoadedReviews {
    pub reviews: Vec<Review>,
    pub warnings: Vec<String>,
}

/// Parse reviews from a line-delimited JSON file. Malformed lines are
/// skipped with a warning; a file with no valid lines is an error.
pub fn load_reviews(path: &Path) -> Result<LoadedReviews, PipelineError> {
    let file = std::fs::File::open(path).map_err(|e| io_error(path, e))?;
    let mut reviews = Vec::new();
    let mut warnings = Vec::new();
    for (number, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_error(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Review>(&line) {
            Ok(review) => reviews.push(review),
            Err(error) => warnings.push(format!(
                "{} line {}: skipped malformed record: {error}",
                path.display(),
                number + 1
            )),
        }
    }
    if reviews.is_empty() {
        return Err(PipelineError::Data(format!(
            "{}: no valid review records",
            path.display()
        )));
    }
    Ok(LoadedReviews { reviews, warnings })
}

/// Reference summaries keyed by product id, from a line-delimited JSON file
/// of `{product_id, text}` records.
pub fn load_references(path: &Path) -> Result<BTreeMap<String, String>, PipelineError> {
    #[derive(Deserialize)]
    struct ReferenceRecord {
        product_id: String,
        text: String,
    }
    let file = std::fs::File::open(path).map_err(|e| io_error(path, e))?;
    let mut references = BTreeMap::new();
    for (number, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_error(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ReferenceRecord = serde_json::from_str(&line).map_err(|e| {
            PipelineError::Data(format!("{} line {}: {e}", path.display(), number + 1))
        })?;
        references.insert(record.product_id, record.text);
    }
    Ok(references)
}

/// Build the configured LLM backend.
pub fn build_backend(config: &PipelineConfig) -> Result<Box<dyn LlmBackend>, PipelineError> {
    match config.backend_kind {
        BackendKind::Mock => {
            let path = config.seed_fixtures.as_ref().ok_or_else(|| {
                PipelineError::Config("mock backend requires seed_fixtures".to_owned())
            })?;
            Ok(Box::new(MockBackend::from_rules_file(
                config.model.clone(),
                path,
            )?))
        }
        BackendKind::Remote => Ok(Box::new(RemoteBackend::new(
            config.endpoint.clone(),
            config.model.clone(),
            config.api_key_env.clone(),
            config.timeout(),
        )?)),
    }
}

/// Build the configured embedding provider.
pub fn build_embedder(config: &PipelineConfig) -> Result<Box<dyn EmbeddingProvider>, PipelineError> {
    match config.embedder_kind {
        EmbedderKind::HashedLocal => Ok(Box::new(HashedEmbedder::with_dimension(
            config.embedding_dimension,
        ))),
        EmbedderKind::Remote => Ok(Box::new(RemoteEmbedder::new(
            config.embedding_endpoint.clone(),
            config.embedding_model.clone(),
            config.embedding_api_key_env.clone(),
            config.embedding_dimension,
            config.embedding_batch_size,
            config.timeout(),
        )?)),
    }
}

/// Report for one product's run.
#[derive(Debug, Clone)]
pub struct ProductReport {
    pub product_id: String,
    pub summary: Option<Summary>,
    pub metrics: Option<MetricReport>,
    pub manifest: ProductManifest,
}

/// Report for a whole run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub products: Vec<ProductReport>,
    pub load_warnings: Vec<String>,
}

/// Run the full pipeline as configured.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    run_pipeline_until(config, StageId::Evaluate)
}

/// Run the pipeline through `until` (inclusive).
pub fn run_pipeline_until(
    config: &PipelineConfig,
    until: StageId,
) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let backend = build_backend(config)?;
    let embedder = build_embedder(config)?;
    run_pipeline_with(config, backend.as_ref(), embedder.as_ref(), until)
}

/// Run the pipeline with explicit backend and embedder instances. Exposed
/// so tests can wrap backends with call counters.
pub fn run_pipeline_with(
    config: &PipelineConfig,
    backend: &dyn LlmBackend,
    embedder: &dyn EmbeddingProvider,
    until: StageId,
) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let input = config
        .input
        .as_ref()
        .ok_or_else(|| PipelineError::Config("input path is required".to_owned()))?;
    let out_dir = config
        .out_dir
        .as_ref()
        .ok_or_else(|| PipelineError::Config("out_dir is required".to_owned()))?;

    let loaded = load_reviews(input)?;
    let references = match &config.references {
        Some(path) => load_references(path)?,
        None => BTreeMap::new(),
    };
    let cache = match &config.cache_dir {
        Some(dir) => Some(ResponseCache::new(dir).map_err(|e| io_error(dir, e))?),
        None => None,
    };

    let mut by_product: BTreeMap<String, Vec<Review>> = BTreeMap::new();
    for review in loaded.reviews {
        by_product
            .entry(review.product_id.clone())
            .or_default()
            .push(review);
    }

    let mut products = Vec::new();
    for (product_id, reviews) in by_product {
        let report = run_product(
            config,
            backend,
            embedder,
            cache.as_ref(),
            out_dir,
            &product_id,
            reviews,
            references.get(&product_id).map(String::as_str),
            until,
        )?;
        products.push(report);
    }

    Ok(RunReport {
        products,
        load_warnings: loaded.warnings,
    })
}

fn sanitize_for_path(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Rank bookkeeping per cluster, persisted so warnings survive stage reuse.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RankReportRow {
    cluster_id: usize,
    converged: bool,
    iterations: usize,
}

#[allow(clippy::too_many_arguments)]
fn run_product(
    config: &PipelineConfig,
    backend: &dyn LlmBackend,
    embedder: &dyn EmbeddingProvider,
    cache: Option<&ResponseCache>,
    out_dir: &Path,
    product_id: &str,
    reviews: Vec<Review>,
    reference: Option<&str>,
    until: StageId,
) -> Result<ProductReport, PipelineError> {
    let product_dir = out_dir.join(sanitize_for_path(product_id));
    std::fs::create_dir_all(&product_dir).map_err(|e| io_error(&product_dir, e))?;

    let corpus = validate_corpus(reviews)?;
    let category = corpus
        .reviews
        .iter()
        .find_map(|r| r.category.as_deref().filter(|c| !c.trim().is_empty()))
        .ok_or_else(|| {
            PipelineError::Data(format!(
                "product {product_id}: no review carries a category; aspect induction needs one"
            ))
        })?
        .to_owned();

    // Canonical corpus hash: validated reviews in sorted id order.
    let mut sorted_reviews = corpus.reviews.clone();
    sorted_reviews.sort_by(|a, b| a.review_id.cmp(&b.review_id));
    let reviews_hash = sha256_hex(&to_jsonl(&sorted_reviews));

    let options = config.extraction_options();
    let template = RasTemplate::default();
    let mut runner = StageRunner::new(&product_dir);
    let mut warnings: Vec<String> = Vec::new();
    let mut backend_calls = 0usize;

    let stage_failed =
        |stage: StageId, error: PipelineError| error.in_stage(stage.name(), product_id);

    // induce-aspects
    let induce_params = format!(
        "backend={};category={}",
        backend.fingerprint(),
        category
    );
    let induce_out = runner
        .run_stage(
            StageId::Induce.name(),
            &[],
            &induce_params,
            &["stages/taxonomy_initial.jsonl"],
            || -> Result<Vec<Vec<u8>>, PipelineError> {
                let taxonomy = induce_initial_aspects(&category, backend, cache, &options)?;
                Ok(vec![to_jsonl(&[taxonomy])])
            },
        )
        .map_err(|e| stage_failed(StageId::Induce, e.into()))?;
    let initial_taxonomy: AspectTaxonomy = single_record(&induce_out.payloads[0], "taxonomy")?;

    if until == StageId::Induce {
        return finish_product(
            &product_dir,
            product_id,
            &corpus,
            runner,
            warnings,
            Vec::new(),
            backend_calls,
            None,
            None,
            until,
        );
    }

    // extract
    let extract_params = format!(
        "backend={};aspect_cap={};skip_threshold={}",
        backend.fingerprint(),
        options.prompt_aspect_cap,
        options.skip_threshold
    );
    let induce_hash = induce_out.hashes[0].clone();
    let extract_out = runner
        .run_stage(
            StageId::Extract.name(),
            &[&induce_hash, &reviews_hash],
            &extract_params,
            &[
                "stages/arguments_raw.jsonl",
                "stages/taxonomy_extracted.jsonl",
                "stages/extraction_skips.jsonl",
            ],
            || -> Result<Vec<Vec<u8>>, PipelineError> {
                let outcome = extract_arguments(
                    &corpus,
                    &template,
                    initial_taxonomy.clone(),
                    backend,
                    cache,
                    &options,
                )?;
                backend_calls = outcome.backend_calls;
                Ok(vec![
                    to_jsonl(&outcome.arguments),
                    to_jsonl(&[outcome.taxonomy]),
                    to_jsonl(&outcome.skipped),
                ])
            },
        )
        .map_err(|e| stage_failed(StageId::Extract, e.into()))?;
    let raw_arguments: Vec<Argument> = from_jsonl(&extract_out.payloads[0])
        .map_err(|e| PipelineError::Data(format!("corrupt arguments artifact: {e}")))?;
    let extracted_taxonomy: AspectTaxonomy = single_record(&extract_out.payloads[1], "taxonomy")?;
    let skipped: Vec<SkipRecord> = from_jsonl(&extract_out.payloads[2])
        .map_err(|e| PipelineError::Data(format!("corrupt skip artifact: {e}")))?;

    if until == StageId::Extract {
        return finish_product(
            &product_dir,
            product_id,
            &corpus,
            runner,
            warnings,
            skipped,
            backend_calls,
            None,
            None,
            until,
        );
    }

    // unify-aspects
    let unify_params = format!(
        "embedder={};eps_aspect={};min_samples={}",
        embedder.fingerprint(),
        config.eps_aspect,
        config.min_samples
    );
    let aspect_config = ClusteringConfig::new(config.eps_aspect, config.min_samples)
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let unify_out = runner
        .run_stage(
            StageId::UnifyAspects.name(),
            &[&extract_out.hashes[1], &extract_out.hashes[0]],
            &unify_params,
            &[
                "stages/taxonomy_unified.jsonl",
                "stages/arguments_unified.jsonl",
            ],
            || -> Result<Vec<Vec<u8>>, PipelineError> {
                let unified = cluster_aspects(&extracted_taxonomy, embedder, &aspect_config)?;
                let mut arguments = raw_arguments.clone();
                for argument in &mut arguments {
                    let symbol = unified
                        .symbol_of
                        .get(argument.aspect_raw.trim())
                        .ok_or_else(|| {
                            PipelineError::Data(format!(
                                "aspect {:?} missing from unified taxonomy",
                                argument.aspect_raw
                            ))
                        })?;
                    argument.aspect_id = Some(symbol.clone());
                }
                Ok(vec![to_jsonl(&[unified]), to_jsonl(&arguments)])
            },
        )
        .map_err(|e| stage_failed(StageId::UnifyAspects, e.into()))?;
    let arguments: Vec<Argument> = from_jsonl(&unify_out.payloads[1])
        .map_err(|e| PipelineError::Data(format!("corrupt arguments artifact: {e}")))?;

    if until == StageId::UnifyAspects {
        return finish_product(
            &product_dir,
            product_id,
            &corpus,
            runner,
            warnings,
            skipped,
            backend_calls,
            None,
            None,
            until,
        );
    }

    // cluster-evidence
    let cluster_params = format!(
        "embedder={};eps_evidence={};min_samples={}",
        embedder.fingerprint(),
        config.eps_evidence,
        config.min_samples
    );
    let evidence_config = ClusteringConfig::new(config.eps_evidence, config.min_samples)
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let cluster_out = runner
        .run_stage(
            StageId::ClusterEvidence.name(),
            &[&unify_out.hashes[1]],
            &cluster_params,
            &["stages/clusters_raw.jsonl"],
            || -> Result<Vec<Vec<u8>>, PipelineError> {
                let clusters = cluster_evidence(&arguments, embedder, &evidence_config)?;
                Ok(vec![to_jsonl(&clusters)])
            },
        )
        .map_err(|e| stage_failed(StageId::ClusterEvidence, e.into()))?;
    let clusters: Vec<EvidenceCluster> = from_jsonl(&cluster_out.payloads[0])
        .map_err(|e| PipelineError::Data(format!("corrupt cluster artifact: {e}")))?;

    if until == StageId::ClusterEvidence {
        return finish_product(
            &product_dir,
            product_id,
            &corpus,
            runner,
            warnings,
            skipped,
            backend_calls,
            None,
            None,
            until,
        );
    }

    // select-representatives
    let rank_config = config.rank_config();
    let select_params = format!(
        "embedder={};damping={};tolerance={};max_iterations={}",
        embedder.fingerprint(),
        config.damping,
        config.tolerance,
        config.max_iterations
    );
    let select_out = runner
        .run_stage(
            StageId::SelectRepresentatives.name(),
            &[&cluster_out.hashes[0]],
            &select_params,
            &[
                "stages/clusters_represented.jsonl",
                "stages/rank_reports.jsonl",
            ],
            || -> Result<Vec<Vec<u8>>, PipelineError> {
                let mut represented = Vec::with_capacity(clusters.len());
                let mut reports = Vec::new();
                for cluster in &clusters {
                    let choice = select_representative(cluster, embedder, &rank_config)?;
                    if let Some(rank) = &choice.rank {
                        reports.push(RankReportRow {
                            cluster_id: cluster.cluster_id,
                            converged: rank.converged,
                            iterations: rank.iterations,
                        });
                    }
                    let mut cluster = cluster.clone();
                    cluster.representative = Some(choice.evidence);
                    represented.push(rewrite_cluster(cluster));
                }
                Ok(vec![to_jsonl(&represented), to_jsonl(&reports)])
            },
        )
        .map_err(|e| stage_failed(StageId::SelectRepresentatives, e.into()))?;
    let represented: Vec<EvidenceCluster> = from_jsonl(&select_out.payloads[0])
        .map_err(|e| PipelineError::Data(format!("corrupt cluster artifact: {e}")))?;
    let rank_reports: Vec<RankReportRow> = from_jsonl(&select_out.payloads[1])
        .map_err(|e| PipelineError::Data(format!("corrupt rank report artifact: {e}")))?;
    for report in &rank_reports {
        if !report.converged {
            warnings.push(format!(
                "pagerank did not converge for cluster {} within {} iterations",
                report.cluster_id, report.iterations
            ));
        }
    }

    if until == StageId::SelectRepresentatives {
        return finish_product(
            &product_dir,
            product_id,
            &corpus,
            runner,
            warnings,
            skipped,
            backend_calls,
            None,
            None,
            until,
        );
    }

    // score
    let score_out = runner
        .run_stage(
            StageId::Score.name(),
            &[&select_out.hashes[0]],
            "scoring=v1",
            &["stages/clusters_ranked.jsonl"],
            || -> Result<Vec<Vec<u8>>, PipelineError> {
                let ranked = rank_clusters(represented.clone());
                Ok(vec![to_jsonl(&ranked)])
            },
        )
        .map_err(|e| stage_failed(StageId::Score, e.into()))?;
    let ranked: Vec<EvidenceCluster> = from_jsonl(&score_out.payloads[0])
        .map_err(|e| PipelineError::Data(format!("corrupt cluster artifact: {e}")))?;

    if until == StageId::Score {
        return finish_product(
            &product_dir,
            product_id,
            &corpus,
            runner,
            warnings,
            skipped,
            backend_calls,
            None,
            None,
            until,
        );
    }

    // summarize
    let summarize_out = runner
        .run_stage(
            StageId::Summarize.name(),
            &[&score_out.hashes[0]],
            &format!("top_n={}", config.top_n),
            &["stages/summary.jsonl", "stages/summary_notes.jsonl"],
            || -> Result<Vec<Vec<u8>>, PipelineError> {
                let assembled = assemble_summary(&ranked, config.top_n);
                Ok(vec![
                    to_jsonl(&[assembled.summary]),
                    to_jsonl(&assembled.warnings),
                ])
            },
        )
        .map_err(|e| stage_failed(StageId::Summarize, e.into()))?;
    let summary: Summary = single_record(&summarize_out.payloads[0], "summary")?;
    let summary_notes: Vec<String> = from_jsonl(&summarize_out.payloads[1])
        .map_err(|e| PipelineError::Data(format!("corrupt summary notes artifact: {e}")))?;
    warnings.extend(summary_notes);

    if until == StageId::Summarize {
        return finish_product(
            &product_dir,
            product_id,
            &corpus,
            runner,
            warnings,
            skipped,
            backend_calls,
            Some(summary),
            None,
            until,
        );
    }

    // evaluate
    let reference_hash = reference.map_or("no-reference".to_owned(), |r| sha256_hex(r.as_bytes()));
    let evaluate_params = format!(
        "embedder={};eps={};min_samples={}",
        embedder.fingerprint(),
        config.eps_aspect,
        config.min_samples
    );
    let summary_text = summary.text.clone();
    let evaluate_out = runner
        .run_stage(
            StageId::Evaluate.name(),
            &[&summarize_out.hashes[0], &reference_hash],
            &evaluate_params,
            &["stages/metrics.jsonl"],
            || -> Result<Vec<Vec<u8>>, PipelineError> {
                let report =
                    MetricReport::compute(&summary_text, reference, embedder, config.eps_aspect)?;
                Ok(vec![to_jsonl(&[report])])
            },
        )
        .map_err(|e| stage_failed(StageId::Evaluate, e.into()))?;
    let metrics: MetricReport = single_record(&evaluate_out.payloads[0], "metrics")?;

    finish_product(
        &product_dir,
        product_id,
        &corpus,
        runner,
        warnings,
        skipped,
        backend_calls,
        Some(summary),
        Some(metrics),
        until,
    )
}

/// Assemble the manifest and write the per-product report files.
#[allow(clippy::too_many_arguments)]
fn finish_product(
    product_dir: &Path,
    product_id: &str,
    corpus: &ValidatedCorpus,
    runner: StageRunner,
    warnings: Vec<String>,
    skipped: Vec<SkipRecord>,
    backend_calls: usize,
    summary: Option<Summary>,
    metrics: Option<MetricReport>,
    until: StageId,
) -> Result<ProductReport, PipelineError> {
    let manifest = ProductManifest {
        product_id: product_id.to_owned(),
        stages: runner.executions,
        dropped_reviews: corpus.dropped.clone(),
        skipped_reviews: skipped,
        warnings,
        backend_calls,
    };
    emit_report(
        product_dir,
        summary.as_ref(),
        metrics.as_ref(),
        &manifest,
        until,
    )?;
    Ok(ProductReport {
        product_id: product_id.to_owned(),
        summary,
        metrics,
        manifest,
    })
}

fn write_pretty<T: Serialize>(
    product_dir: &Path,
    name: &str,
    value: &T,
) -> Result<(), PipelineError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report types serialize");
    bytes.push(b'\n');
    let path = product_dir.join(name);
    atomic_write(&path, &bytes).map_err(|e| io_error(&path, e))
}

/// Write the user-facing report files: `summary.txt` and `summary.json`
/// once the summarize stage has run, `metrics.json` once evaluate has run,
/// and `manifest.json` always.
pub fn emit_report(
    product_dir: &Path,
    summary: Option<&Summary>,
    metrics: Option<&MetricReport>,
    manifest: &ProductManifest,
    until: StageId,
) -> Result<(), PipelineError> {
    if until >= StageId::Summarize {
        if let Some(summary) = summary {
            let path = product_dir.join("summary.txt");
            atomic_write(&path, format!("{}\n", summary.text).as_bytes())
                .map_err(|e| io_error(&path, e))?;
            write_pretty(product_dir, "summary.json", summary)?;
        }
    }
    if until >= StageId::Evaluate {
        if let Some(metrics) = metrics {
            write_pretty(product_dir, "metrics.json", metrics)?;
        }
    }
    write_pretty(product_dir, "manifest.json", manifest)
}
