//! Argument extraction: induce the initial aspect taxonomy, prompt an LLM
//! backend per review, parse responses into raw arguments, and grow the
//! taxonomy as new aspects appear.
//!
//! Reviews are processed in canonical order (sorted by review id) so the
//! taxonomy each prompt sees, and therefore every output, is independent of
//! scheduling. A review whose call or parse fails is skipped and recorded;
//! the run aborts only when the skipped fraction exceeds the configured
//! threshold.

pub mod backend;
pub mod cache;
pub mod prompt;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Argument, AspectTaxonomy, Sentiment, ValidatedCorpus};
use backend::{BackendError, LlmBackend, LlmRequest};
use cache::ResponseCache;
use prompt::{build_extraction_prompt, build_induction_prompt, RasTemplate};

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("category must be non-empty")]
    EmptyCategory,
    #[error("backend returned an empty aspect list for category {0:?}")]
    EmptyAspectList(String),
    #[error("aspect induction failed: {0}")]
    InductionFailed(#[source] BackendError),
    #[error("{skipped} of {total} reviews skipped, over the {threshold} abort threshold")]
    SkipThresholdExceeded {
        skipped: usize,
        total: usize,
        threshold: f64,
    },
    #[error("cache I/O failure: {0}")]
    Cache(#[from] std::io::Error),
}

/// A review's response could not be turned into arguments.
#[derive(Debug, Error)]
#[error("unparseable response: {0}")]
pub struct ExtractionFailure(pub String);

/// A sentiment label outside the accepted set.
#[derive(Debug, Error)]
#[error("unsupported sentiment label: {0:?}")]
pub struct InvalidSentiment(pub String);

/// One record as emitted by the backend, before sentiment normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawArgument {
    pub aspect: String,
    pub sentiment_label: String,
    pub evidence: String,
}

/// A review dropped during extraction, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub review_id: String,
    pub reason: String,
}

/// Knobs for the extraction loop.
#[derive(Debug, Clone)]
pub struct ExtractionOptions {
    /// Maximum aspects listed in each prompt.
    pub prompt_aspect_cap: usize,
    /// Abort when skipped/total exceeds this fraction.
    pub skip_threshold: f64,
    /// Attempts per backend call for retryable failures.
    pub retry_attempts: usize,
    /// Base delay of the exponential backoff between retries.
    pub retry_base_delay: Duration,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        ExtractionOptions {
            prompt_aspect_cap: 10,
            skip_threshold: 0.10,
            retry_attempts: 3,
            retry_base_delay: Duration::from_millis(100),
        }
    }
}

/// Extraction result: arguments with provenance, the grown taxonomy, and
/// the skipped-review report.
#[derive(Debug, Clone)]
pub struct ExtractionOutcome {
    pub arguments: Vec<Argument>,
    pub taxonomy: AspectTaxonomy,
    pub skipped: Vec<SkipRecord>,
    /// Backend calls actually issued (cache hits excluded).
    pub backend_calls: usize,
}

/// Map a backend sentiment label onto the scheme's closed sentiment set:
/// "positive" (any case) is good, "negative" is bad, anything else is
/// rejected.
pub fn normalize_sentiment(label: &str) -> Result<Sentiment, InvalidSentiment> {
    match label.trim().to_lowercase().as_str() {
        "positive" => Ok(Sentiment::Good),
        "negative" => Ok(Sentiment::Bad),
        _ => Err(InvalidSentiment(label.to_owned())),
    }
}

/// Strip a Markdown code fence if the whole response is wrapped in one.
fn strip_code_fence(text: &str) -> &str {
    let trimmed = text.trim();
    let Some(inner) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    let Some(inner) = inner.strip_suffix("```") else {
        return trimmed;
    };
    // Drop an optional language tag on the opening fence.
    match inner.split_once('\n') {
        Some((first, rest)) if !first.trim().is_empty() && !first.trim().starts_with('[') => rest,
        _ => inner,
    }
    .trim()
}

/// Parse a backend response into raw arguments. The top level must be a
/// JSON array; each element contributes a record only when it carries
/// non-empty `aspect`, `sentiment` and `evidence` strings and the sentiment
/// label is in the accepted set. A response that is not a JSON array at the
/// top level fails as a whole.
pub fn parse_llm_response(text: &str) -> Result<Vec<RawArgument>, ExtractionFailure> {
    let body = strip_code_fence(text);
    let value: serde_json::Value = serde_json::from_str(body)
        .map_err(|e| ExtractionFailure(format!("not valid JSON: {e}")))?;
    let serde_json::Value::Array(records) = value else {
        return Err(ExtractionFailure("top level is not a JSON array".to_owned()));
    };
    let mut out = Vec::new();
    for record in records {
        let get = |key: &str| {
            record
                .get(key)
                .and_then(|v| v.as_str())
                .map(str::trim)
                .filter(|s| !s.is_empty())
        };
        let (Some(aspect), Some(sentiment), Some(evidence)) =
            (get("aspect"), get("sentiment"), get("evidence"))
        else {
            continue;
        };
        if normalize_sentiment(sentiment).is_err() {
            continue;
        }
        out.push(RawArgument {
            aspect: aspect.to_owned(),
            sentiment_label: sentiment.to_owned(),
            evidence: evidence.to_owned(),
        });
    }
    Ok(out)
}

/// Issue one backend call with bounded retries for retryable failures,
/// consulting and filling the cache when one is provided. Returns the
/// response and whether a live call was made.
fn complete_with_retries(
    backend: &dyn LlmBackend,
    cache: Option<&ResponseCache>,
    request: &LlmRequest<'_>,
    options: &ExtractionOptions,
) -> Result<(String, bool), BackendError> {
    let key = ResponseCache::key(backend.model(), request.prompt);
    if let Some(cache) = cache {
        if let Some(hit) = cache.get(&key) {
            return Ok((hit, false));
        }
    }
    let mut last_error = None;
    for attempt in 0..options.retry_attempts.max(1) {
        if attempt > 0 {
            std::thread::sleep(options.retry_base_delay * 2u32.pow(attempt as u32 - 1));
        }
        match backend.complete(request) {
            Ok(response) => {
                if let Some(cache) = cache {
                    // A failed write spoils reruns but not this run.
                    let _ = cache.put(&key, &response);
                }
                return Ok((response, true));
            }
            Err(error) => {
                let retryable = error.is_retryable();
                last_error = Some(error);
                if !retryable {
                    break;
                }
            }
        }
    }
    Err(last_error.expect("at least one attempt was made"))
}

/// Ask the backend for the critical aspects of a product category and seed
/// the taxonomy with them, counts all zero.
pub fn induce_initial_aspects(
    category: &str,
    backend: &dyn LlmBackend,
    cache: Option<&ResponseCache>,
    options: &ExtractionOptions,
) -> Result<AspectTaxonomy, ExtractionError> {
    if category.trim().is_empty() {
        return Err(ExtractionError::EmptyCategory);
    }
    let prompt = build_induction_prompt(category);
    let tag = format!("induce:{category}");
    let request = LlmRequest {
        prompt: &prompt,
        tag: Some(&tag),
    };
    let (response, _) = complete_with_retries(backend, cache, &request, options)
        .map_err(ExtractionError::InductionFailed)?;
    let labels: Vec<String> = serde_json::from_str(strip_code_fence(&response)).map_err(|e| {
        ExtractionError::InductionFailed(BackendError::MalformedResponse(format!(
            "expected a JSON array of aspect strings: {e}"
        )))
    })?;
    let taxonomy = AspectTaxonomy::from_labels(labels);
    if taxonomy.is_empty() {
        return Err(ExtractionError::EmptyAspectList(category.to_owned()));
    }
    Ok(taxonomy)
}

/// Run extraction over a validated corpus. One backend call per review
/// (served from the cache when possible), reviews in sorted id order, the
/// taxonomy growing as responses come back.
pub fn extract_arguments(
    corpus: &ValidatedCorpus,
    template: &RasTemplate,
    mut taxonomy: AspectTaxonomy,
    backend: &dyn LlmBackend,
    cache: Option<&ResponseCache>,
    options: &ExtractionOptions,
) -> Result<ExtractionOutcome, ExtractionError> {
    let mut reviews: Vec<_> = corpus.reviews.iter().collect();
    reviews.sort_by(|a, b| a.review_id.cmp(&b.review_id));

    let total = reviews.len();
    let mut arguments = Vec::new();
    let mut skipped = Vec::new();
    let mut backend_calls = 0usize;

    for review in reviews {
        let prompt = build_extraction_prompt(review, template, &taxonomy, options.prompt_aspect_cap);
        let request = LlmRequest {
            prompt: &prompt,
            tag: Some(&review.review_id),
        };
        let response = match complete_with_retries(backend, cache, &request, options) {
            Ok((response, live)) => {
                if live {
                    backend_calls += 1;
                }
                response
            }
            Err(error) => {
                skipped.push(SkipRecord {
                    review_id: review.review_id.clone(),
                    reason: format!("backend failure: {error}"),
                });
                continue;
            }
        };
        let raw_arguments = match parse_llm_response(&response) {
            Ok(raw) => raw,
            Err(failure) => {
                skipped.push(SkipRecord {
                    review_id: review.review_id.clone(),
                    reason: failure.to_string(),
                });
                continue;
            }
        };
        for raw in raw_arguments {
            let Ok(sentiment) = normalize_sentiment(&raw.sentiment_label) else {
                continue; // parse already filters these; belt and braces
            };
            taxonomy.admit_raw(&raw.aspect);
            arguments.push(Argument {
                review_id: review.review_id.clone(),
                aspect_raw: raw.aspect.trim().to_owned(),
                aspect_id: None,
                sentiment,
                evidence: raw.evidence,
                original_evidence: None,
            });
        }
    }

    if total > 0 && skipped.len() as f64 / total as f64 > options.skip_threshold {
        return Err(ExtractionError::SkipThresholdExceeded {
            skipped: skipped.len(),
            total,
            threshold: options.skip_threshold,
        });
    }

    Ok(ExtractionOutcome {
        arguments,
        taxonomy,
        skipped,
        backend_calls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{validate_corpus, Review};
    use backend::{MockBackend, MockRule};

    fn review(id: &str, text: &str) -> Review {
        Review {
            review_id: id.to_owned(),
            product_id: "p1".to_owned(),
            text: text.to_owned(),
            category: Some("shoes".to_owned()),
        }
    }

    fn rule(match_expr: &str, response: &str) -> MockRule {
        MockRule {
            match_expr: match_expr.to_owned(),
            response: response.to_owned(),
        }
    }

    const FIT_RESPONSE: &str =
        r#"[{"aspect":"fit","sentiment":"negative","evidence":"runs small"}]"#;

    #[test]
    fn normalize_accepts_positive_negative_any_case() {
        assert_eq!(normalize_sentiment("positive").unwrap(), Sentiment::Good);
        assert_eq!(normalize_sentiment("NEGATIVE").unwrap(), Sentiment::Bad);
        assert_eq!(normalize_sentiment("Positive").unwrap(), Sentiment::Good);
        assert!(normalize_sentiment("neutral").is_err());
        assert!(normalize_sentiment("").is_err());
    }

    #[test]
    fn parse_reads_well_formed_records() {
        let parsed = parse_llm_response(FIT_RESPONSE).unwrap();
        assert_eq!(
            parsed,
            vec![RawArgument {
                aspect: "fit".to_owned(),
                sentiment_label: "negative".to_owned(),
                evidence: "runs small".to_owned(),
            }]
        );
    }

    #[test]
    fn parse_accepts_empty_array() {
        assert!(parse_llm_response("[]").unwrap().is_empty());
    }

    #[test]
    fn parse_rejects_non_json() {
        assert!(parse_llm_response("not json at all").is_err());
    }

    #[test]
    fn parse_rejects_non_array_top_level() {
        assert!(parse_llm_response(r#"{"aspect":"fit"}"#).is_err());
    }

    #[test]
    fn parse_drops_records_with_bad_sentiment_or_missing_keys() {
        let response = r#"[
            {"aspect":"fit","sentiment":"negative","evidence":"runs small"},
            {"aspect":"fit","sentiment":"neutral","evidence":"meh"},
            {"aspect":"fit","sentiment":"positive"},
            {"aspect":"","sentiment":"positive","evidence":"nice"}
        ]"#;
        let parsed = parse_llm_response(response).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].evidence, "runs small");
    }

    #[test]
    fn parse_strips_code_fences() {
        let fenced = format!("```json\n{FIT_RESPONSE}\n```");
        assert_eq!(parse_llm_response(&fenced).unwrap().len(), 1);
    }

    #[test]
    fn induction_builds_zero_count_taxonomy() {
        let backend = MockBackend::from_rules(
            "mock-model",
            vec![rule("induce:shoes", r#"["fit","comfort","durability"]"#)],
        )
        .unwrap();
        let taxonomy =
            induce_initial_aspects("shoes", &backend, None, &ExtractionOptions::default())
                .unwrap();
        assert_eq!(taxonomy.len(), 3);
        assert_eq!(taxonomy.total_count(), 0);
        assert_eq!(taxonomy.aspects, vec!["fit", "comfort", "durability"]);
    }

    #[test]
    fn induction_rejects_empty_category() {
        let backend = MockBackend::from_rules("mock-model", Vec::new()).unwrap();
        assert!(matches!(
            induce_initial_aspects("  ", &backend, None, &ExtractionOptions::default()),
            Err(ExtractionError::EmptyCategory)
        ));
    }

    #[test]
    fn induction_rejects_empty_aspect_list() {
        let backend =
            MockBackend::from_rules("mock-model", vec![rule("induce:shoes", "[]")]).unwrap();
        assert!(matches!(
            induce_initial_aspects("shoes", &backend, None, &ExtractionOptions::default()),
            Err(ExtractionError::EmptyAspectList(_))
        ));
    }

    fn fixture_backend() -> MockBackend {
        MockBackend::from_rules(
            "mock-model",
            vec![
                rule("r1", FIT_RESPONSE),
                rule(
                    "r2",
                    r#"[{"aspect":"sole","sentiment":"positive","evidence":"sole grips well"}]"#,
                ),
            ],
        )
        .unwrap()
    }

    #[test]
    fn extraction_is_deterministic_and_ordered_by_review_id() {
        let corpus =
            validate_corpus(vec![review("r2", "grippy"), review("r1", "small")]).unwrap();
        let taxonomy = AspectTaxonomy::from_labels(["fit"]);
        let backend = fixture_backend();
        let options = ExtractionOptions::default();
        let run = |taxonomy: AspectTaxonomy| {
            extract_arguments(
                &corpus,
                &RasTemplate::default(),
                taxonomy,
                &backend,
                None,
                &options,
            )
            .unwrap()
        };
        let first = run(taxonomy.clone());
        let second = run(taxonomy);
        assert_eq!(first.arguments, second.arguments);
        assert_eq!(first.arguments[0].review_id, "r1");
        assert_eq!(first.arguments[1].review_id, "r2");
        assert!(first.skipped.is_empty());
        // The taxonomy grew by the new aspect and counted both occurrences.
        assert_eq!(first.taxonomy.len(), 2);
        assert_eq!(first.taxonomy.total_count(), 2);
    }

    #[test]
    fn malformed_response_skips_the_review_only() {
        let corpus = validate_corpus(vec![
            review("r1", "small"),
            review("r2", "grippy"),
            review("r3", "broken"),
            review("r4", "ok"),
            review("r5", "ok"),
            review("r6", "ok"),
            review("r7", "ok"),
            review("r8", "ok"),
            review("r9", "ok"),
            review("ra", "ok"),
        ])
        .unwrap();
        let mut rules = vec![
            rule("r1", FIT_RESPONSE),
            rule("r3", "not json at all"),
        ];
        for id in ["r2", "r4", "r5", "r6", "r7", "r8", "r9", "ra"] {
            rules.push(rule(id, FIT_RESPONSE));
        }
        let backend = MockBackend::from_rules("mock-model", rules).unwrap();
        let outcome = extract_arguments(
            &corpus,
            &RasTemplate::default(),
            AspectTaxonomy::from_labels(["fit"]),
            &backend,
            None,
            &ExtractionOptions::default(),
        )
        .unwrap();
        assert_eq!(outcome.skipped.len(), 1);
        assert_eq!(outcome.skipped[0].review_id, "r3");
        assert_eq!(outcome.arguments.len(), 9);
        // Skip accounting: every review either contributed or is recorded.
        assert_eq!(
            corpus.reviews.len(),
            outcome.skipped.len()
                + corpus
                    .reviews
                    .iter()
                    .filter(|r| !outcome.skipped.iter().any(|s| s.review_id == r.review_id))
                    .count()
        );
    }

    #[test]
    fn exceeding_skip_threshold_aborts() {
        let corpus = validate_corpus(vec![review("r1", "a"), review("r2", "b")]).unwrap();
        let backend = MockBackend::from_rules(
            "mock-model",
            vec![rule("r1", FIT_RESPONSE), rule("r2", "garbage")],
        )
        .unwrap();
        let err = extract_arguments(
            &corpus,
            &RasTemplate::default(),
            AspectTaxonomy::from_labels(["fit"]),
            &backend,
            None,
            &ExtractionOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            ExtractionError::SkipThresholdExceeded {
                skipped: 1,
                total: 2,
                ..
            }
        ));
    }

    #[test]
    fn warm_cache_serves_responses_without_backend_calls() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path()).unwrap();
        let corpus =
            validate_corpus(vec![review("r1", "small"), review("r2", "grippy")]).unwrap();
        let backend = fixture_backend();
        let options = ExtractionOptions::default();
        let taxonomy = AspectTaxonomy::from_labels(["fit"]);

        let cold = extract_arguments(
            &corpus,
            &RasTemplate::default(),
            taxonomy.clone(),
            &backend,
            Some(&cache),
            &options,
        )
        .unwrap();
        assert_eq!(cold.backend_calls, 2);

        let warm = extract_arguments(
            &corpus,
            &RasTemplate::default(),
            taxonomy.clone(),
            &backend,
            Some(&cache),
            &options,
        )
        .unwrap();
        assert_eq!(warm.backend_calls, 0);
        assert_eq!(cold.arguments, warm.arguments);

        // Cache soundness: outputs match the cache-disabled run.
        let uncached = extract_arguments(
            &corpus,
            &RasTemplate::default(),
            taxonomy,
            &backend,
            None,
            &options,
        )
        .unwrap();
        assert_eq!(uncached.arguments, warm.arguments);
        assert_eq!(uncached.taxonomy, warm.taxonomy);
    }
}
