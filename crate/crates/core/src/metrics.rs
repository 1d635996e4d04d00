//! Summary evaluation: sentence diversity, ROUGE-N and ROUGE-L F1.
//!
//! Tokenization is fixed (lowercase, split on non-alphanumerics) so scores
//! are reproducible bit for bit; published ROUGE implementations differ in
//! detail, so absolute comparability with other toolkits is not claimed.
//! ROUGE-L uses the whole-text longest common subsequence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{dbscan, ClusteringConfig, ClusteringError};
use crate::embedding::EmbeddingProvider;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("diversity is undefined for an empty summary")]
    EmptySummary,
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
}

/// Split on sentence-terminating punctuation (`.`, `!`, `?`) followed by
/// whitespace or end of text; trims and drops empty pieces.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut current = String::new();
    for (index, &c) in chars.iter().enumerate() {
        current.push(c);
        let terminator = matches!(c, '.' | '!' | '?');
        let boundary = terminator
            && chars
                .get(index + 1)
                .is_none_or(|next| next.is_whitespace());
        if boundary {
            let piece = current.trim();
            if !piece.is_empty() {
                sentences.push(piece.to_owned());
            }
            current.clear();
        }
    }
    let piece = current.trim();
    if !piece.is_empty() {
        sentences.push(piece.to_owned());
    }
    sentences
}

/// Diversity of a summary: semantic cluster count over sentence count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityScore {
    pub diversity: f64,
    pub sentence_count: usize,
    pub cluster_count: usize,
}

/// Segment the summary, embed the sentences, cluster them (min_samples 1)
/// and return cluster count over sentence count.
pub fn diversity(
    summary_text: &str,
    provider: &dyn EmbeddingProvider,
    eps: f64,
) -> Result<DiversityScore, MetricsError> {
    let sentences = segment_sentences(summary_text);
    if sentences.is_empty() {
        return Err(MetricsError::EmptySummary);
    }
    let refs: Vec<&str> = sentences.iter().map(String::as_str).collect();
    let vectors = provider
        .embed_batch(&refs)
        .map_err(ClusteringError::from)?;
    let config = ClusteringConfig::new(eps, 1)?;
    let labeling = dbscan(&vectors, &config)?;
    Ok(DiversityScore {
        diversity: labeling.cluster_count as f64 / sentences.len() as f64,
        sentence_count: sentences.len(),
        cluster_count: labeling.cluster_count,
    })
}

/// Lowercase tokens split on non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Precision/recall/F1 triple for a ROUGE variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    const ZERO: RougeScore = RougeScore {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        if candidate_total == 0 || reference_total == 0 {
            return Self::ZERO;
        }
        let precision = overlap as f64 / candidate_total as f64;
        let recall = overlap as f64 / reference_total as f64;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        RougeScore {
            precision,
            recall,
            f1,
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> std::collections::HashMap<&[String], usize> {
    let mut counts = std::collections::HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// ROUGE-N with clipped n-gram multiset overlap. Either side having fewer
/// than `n` tokens yields all-zero scores.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> RougeScore {
    assert!(n >= 1, "n-gram order must be at least 1");
    let candidate_tokens = tokenize(candidate);
    let reference_tokens = tokenize(reference);
    if candidate_tokens.len() < n || reference_tokens.len() < n {
        return RougeScore::ZERO;
    }
    let candidate_counts = ngram_counts(&candidate_tokens, n);
    let reference_counts = ngram_counts(&reference_tokens, n);
    let overlap: usize = candidate_counts
        .iter()
        .map(|(gram, count)| count.min(reference_counts.get(gram).unwrap_or(&0)))
        .sum();
    let candidate_total = candidate_tokens.len() - n + 1;
    let reference_total = reference_tokens.len() - n + 1;
    RougeScore::from_counts(overlap, candidate_total, reference_total)
}

fn lcs_length(a: &[String], b: &[String]) -> usize {
    let mut previous = vec![0usize; b.len() + 1];
    let mut current = vec![0usize; b.len() + 1];
    for token_a in a {
        for (j, token_b) in b.iter().enumerate() {
            current[j + 1] = if token_a == token_b {
                previous[j] + 1
            } else {
                previous[j + 1].max(current[j])
            };
        }
        std::mem::swap(&mut previous, &mut current);
    }
    previous[b.len()]
}

/// ROUGE-L from the whole-text longest common subsequence.
pub fn rouge_l(candidate: &str, reference: &str) -> RougeScore {
    let candidate_tokens = tokenize(candidate);
    let reference_tokens = tokenize(reference);
    if candidate_tokens.is_empty() || reference_tokens.is_empty() {
        return RougeScore::ZERO;
    }
    let lcs = lcs_length(&candidate_tokens, &reference_tokens);
    RougeScore::from_counts(lcs, candidate_tokens.len(), reference_tokens.len())
}

/// Evaluation report emitted as `metrics.json`. ROUGE fields are null when
/// no reference summary was supplied; diversity is null for an empty
/// summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rouge2_f1: Option<f64>,
    #[serde(rename = "rougeL_f1")]
    pub rouge_l_f1: Option<f64>,
    pub diversity: Option<f64>,
    pub sentence_count: usize,
    pub cluster_count: usize,
}

impl MetricReport {
    /// Evaluate a candidate summary against an optional reference.
    pub fn compute(
        candidate: &str,
        reference: Option<&str>,
        provider: &dyn EmbeddingProvider,
        eps: f64,
    ) -> Result<MetricReport, MetricsError> {
        let diversity_score = match diversity(candidate, provider, eps) {
            Ok(score) => Some(score),
            Err(MetricsError::EmptySummary) => None,
            Err(other) => return Err(other),
        };
        let (rouge2, rouge_l_score) = match reference {
            Some(reference) => (
                Some(rouge_n(candidate, reference, 2).f1),
                Some(rouge_l(candidate, reference).f1),
            ),
            None => (None, None),
        };
        Ok(MetricReport {
            rouge2_f1: rouge2,
            rouge_l_f1: rouge_l_score,
            diversity: diversity_score.map(|d| d.diversity),
            sentence_count: diversity_score.map_or(0, |d| d.sentence_count),
            cluster_count: diversity_score.map_or(0, |d| d.cluster_count),
        })
    }
}
