//! Core data types shared by every pipeline stage.
//!
//! All types are immutable value types with serde encodings; the canonical
//! on-disk form of each is one JSON record per line. Provenance is kept at
//! every level: arguments carry their source `review_id`, clusters keep full
//! member lists, and summaries link back to the reviews that support each
//! selected piece of evidence.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("corpus is empty after validation ({dropped} records dropped)")]
    EmptyCorpus { dropped: usize },
}

/// One customer review, the pipeline's input unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub review_id: String,
    pub product_id: String,
    pub text: String,
    /// Product category, used to seed the aspect taxonomy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

/// Sentiment a review expresses toward an aspect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Good,
    Bad,
}

impl Sentiment {
    pub fn flipped(self) -> Self {
        match self {
            Sentiment::Good => Sentiment::Bad,
            Sentiment::Bad => Sentiment::Good,
        }
    }
}

/// An aspect/sentiment/evidence tuple extracted from one review.
///
/// `aspect_raw` is the aspect string as extracted; `aspect_id` is the
/// canonical symbol assigned once aspect wording has been unified by
/// clustering. After evidence rewriting, `evidence` holds the cluster's
/// representative sentence and `original_evidence` the sentence this
/// argument was extracted with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Argument {
    pub review_id: String,
    pub aspect_raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspect_id: Option<String>,
    pub sentiment: Sentiment,
    pub evidence: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_evidence: Option<String>,
}

/// The evolving set of canonical aspects plus the mapping from raw aspect
/// strings onto canonical symbols `A_1..A_n`.
///
/// Before aspect unification every raw string is its own canonical entry;
/// unification merges entries whose strings cluster together and re-points
/// `symbol_of` at the merged symbols.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectTaxonomy {
    /// Canonical aspect labels in first-seen order; index `i` carries the
    /// symbol `A_{i+1}`.
    pub aspects: Vec<String>,
    /// Raw aspect string -> canonical symbol.
    pub symbol_of: BTreeMap<String, String>,
    /// Canonical symbol -> number of raw occurrences mapped to it.
    pub counts: BTreeMap<String, u64>,
}

impl AspectTaxonomy {
    /// Symbol carried by the canonical aspect at `index`.
    pub fn symbol_for_index(index: usize) -> String {
        format!("A_{}", index + 1)
    }

    /// Index encoded in a canonical symbol, if it parses.
    pub fn index_of_symbol(symbol: &str) -> Option<usize> {
        symbol
            .strip_prefix("A_")
            .and_then(|n| n.parse::<usize>().ok())
            .and_then(|n| n.checked_sub(1))
    }

    /// Build a taxonomy from initial labels, one canonical entry per distinct
    /// label, all counts zero.
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut taxonomy = AspectTaxonomy {
            aspects: Vec::new(),
            symbol_of: BTreeMap::new(),
            counts: BTreeMap::new(),
        };
        for label in labels {
            let label: String = label.into();
            let label = label.trim().to_owned();
            if label.is_empty() || taxonomy.symbol_of.contains_key(&label) {
                continue;
            }
            let symbol = Self::symbol_for_index(taxonomy.aspects.len());
            taxonomy.aspects.push(label.clone());
            taxonomy.symbol_of.insert(label, symbol.clone());
            taxonomy.counts.insert(symbol, 0);
        }
        taxonomy
    }

    pub fn len(&self) -> usize {
        self.aspects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aspects.is_empty()
    }

    /// Record one occurrence of a raw aspect string. Unknown strings (by
    /// exact match) are appended as new canonical entries; known strings
    /// only bump the count of their symbol. Returns the symbol.
    pub fn admit_raw(&mut self, raw: &str) -> String {
        let raw = raw.trim();
        if let Some(symbol) = self.symbol_of.get(raw) {
            let symbol = symbol.clone();
            *self.counts.entry(symbol.clone()).or_insert(0) += 1;
            return symbol;
        }
        let symbol = Self::symbol_for_index(self.aspects.len());
        self.aspects.push(raw.to_owned());
        self.symbol_of.insert(raw.to_owned(), symbol.clone());
        self.counts.insert(symbol.clone(), 1);
        symbol
    }

    /// Occurrence count of the canonical aspect at `index`.
    pub fn count_for_index(&self, index: usize) -> u64 {
        self.counts
            .get(&Self::symbol_for_index(index))
            .copied()
            .unwrap_or(0)
    }

    /// Canonical labels ordered by descending count, ties broken by
    /// first-seen order, capped at `cap` entries.
    pub fn popular_labels(&self, cap: usize) -> Vec<&str> {
        let mut order: Vec<usize> = (0..self.aspects.len()).collect();
        order.sort_by(|&a, &b| {
            self.count_for_index(b)
                .cmp(&self.count_for_index(a))
                .then(a.cmp(&b))
        });
        order
            .into_iter()
            .take(cap)
            .map(|i| self.aspects[i].as_str())
            .collect()
    }

    /// Distinct raw aspect strings in a stable order: by the first-seen
    /// order of the symbol they map to, then alphabetically within a symbol.
    pub fn raw_aspects_in_order(&self) -> Vec<&str> {
        let mut raws: Vec<&str> = self.symbol_of.keys().map(String::as_str).collect();
        raws.sort_by_key(|raw| {
            let index = self
                .symbol_of
                .get(*raw)
                .and_then(|s| Self::index_of_symbol(s))
                .unwrap_or(usize::MAX);
            (index, *raw)
        });
        raws
    }

    /// Total raw occurrences mapped into the taxonomy.
    pub fn total_count(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// A group of arguments whose evidence sentences are semantically close.
///
/// `representative` and `score` are filled by later stages; until then they
/// are absent. After rewriting, every member's `evidence` equals the
/// representative while `original_evidence` keeps the extracted sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceCluster {
    pub cluster_id: usize,
    pub members: Vec<Argument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representative: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<i64>,
}

impl EvidenceCluster {
    /// Sorted, de-duplicated review ids of all members.
    pub fn source_review_ids(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.members.iter().map(|m| m.review_id.as_str()).collect();
        set.into_iter().map(str::to_owned).collect()
    }
}

/// One selected evidence piece with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryItem {
    pub evidence: String,
    pub cluster_id: usize,
    pub aspect_id: String,
    pub score: i64,
    pub source_review_ids: Vec<String>,
}

/// The assembled summary: selected evidence in rank order plus the
/// concatenated text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub items: Vec<SummaryItem>,
    pub text: String,
}

/// A review dropped during corpus validation, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedReview {
    pub review_id: String,
    pub reason: String,
}

/// Validation result: surviving reviews plus the dropped-record report.
#[derive(Debug, Clone)]
pub struct ValidatedCorpus {
    pub reviews: Vec<Review>,
    pub dropped: Vec<DroppedReview>,
}

impl ValidatedCorpus {
    pub fn review_ids(&self) -> BTreeSet<&str> {
        self.reviews.iter().map(|r| r.review_id.as_str()).collect()
    }
}

/// Drop reviews with empty text or duplicate ids (first occurrence wins).
/// Fails if nothing survives.
pub fn validate_corpus(reviews: Vec<Review>) -> Result<ValidatedCorpus, DomainError> {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for review in reviews {
        if review.text.trim().is_empty() {
            dropped.push(DroppedReview {
                review_id: review.review_id,
                reason: "empty text".to_owned(),
            });
            continue;
        }
        if !seen.insert(review.review_id.clone()) {
            dropped.push(DroppedReview {
                review_id: review.review_id,
                reason: "duplicate id".to_owned(),
            });
            continue;
        }
        kept.push(review);
    }
    if kept.is_empty() {
        return Err(DomainError::EmptyCorpus {
            dropped: dropped.len(),
        });
    }
    Ok(ValidatedCorpus {
        reviews: kept,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn review(id: &str, text: &str) -> Review {
        Review {
            review_id: id.to_owned(),
            product_id: "p".to_owned(),
            text: text.to_owned(),
            category: None,
        }
    }

    #[test]
    fn validate_keeps_distinct_reviews() {
        let corpus = validate_corpus(vec![review("r1", "good"), review("r2", "bad")]).unwrap();
        assert_eq!(corpus.reviews.len(), 2);
        assert!(corpus.dropped.is_empty());
    }

    #[test]
    fn validate_drops_duplicate_ids() {
        let corpus = validate_corpus(vec![review("r1", "good"), review("r1", "again")]).unwrap();
        assert_eq!(corpus.reviews.len(), 1);
        assert_eq!(corpus.dropped.len(), 1);
        assert_eq!(corpus.dropped[0].reason, "duplicate id");
    }

    #[test]
    fn validate_rejects_whitespace_only_corpus() {
        let err = validate_corpus(vec![review("r1", "   \t")]).unwrap_err();
        assert!(matches!(err, DomainError::EmptyCorpus { dropped: 1 }));
    }

    #[test]
    fn taxonomy_from_labels_assigns_symbols_in_order() {
        let taxonomy = AspectTaxonomy::from_labels(["fit", "comfort", "durability"]);
        assert_eq!(taxonomy.len(), 3);
        assert_eq!(taxonomy.symbol_of["fit"], "A_1");
        assert_eq!(taxonomy.symbol_of["durability"], "A_3");
        assert_eq!(taxonomy.total_count(), 0);
    }

    #[test]
    fn admit_raw_appends_unknown_and_counts_known() {
        let mut taxonomy = AspectTaxonomy::from_labels(["fit"]);
        assert_eq!(taxonomy.admit_raw("fit"), "A_1");
        assert_eq!(taxonomy.admit_raw("battery"), "A_2");
        assert_eq!(taxonomy.admit_raw("battery"), "A_2");
        assert_eq!(taxonomy.counts["A_1"], 1);
        assert_eq!(taxonomy.counts["A_2"], 2);
        assert_eq!(taxonomy.total_count(), 3);
    }

    #[test]
    fn popular_labels_orders_by_count_then_first_seen() {
        let mut taxonomy = AspectTaxonomy::from_labels(["fit", "comfort", "sole"]);
        for _ in 0..5 {
            taxonomy.admit_raw("fit");
        }
        for _ in 0..2 {
            taxonomy.admit_raw("comfort");
        }
        for _ in 0..2 {
            taxonomy.admit_raw("sole");
        }
        assert_eq!(taxonomy.popular_labels(10), vec!["fit", "comfort", "sole"]);
        assert_eq!(taxonomy.popular_labels(2), vec!["fit", "comfort"]);
    }

    #[test]
    fn domain_values_round_trip_through_json() {
        let argument = Argument {
            review_id: "r9".to_owned(),
            aspect_raw: "lid fit".to_owned(),
            aspect_id: Some("A_2".to_owned()),
            sentiment: Sentiment::Bad,
            evidence: "the lids do not stay on".to_owned(),
            original_evidence: Some("lids pop off".to_owned()),
        };
        let line = serde_json::to_string(&argument).unwrap();
        let back: Argument = serde_json::from_str(&line).unwrap();
        assert_eq!(argument, back);

        let cluster = EvidenceCluster {
            cluster_id: 3,
            members: vec![argument],
            representative: None,
            score: None,
        };
        let line = serde_json::to_string(&cluster).unwrap();
        assert!(!line.contains("representative"));
        let back: EvidenceCluster = serde_json::from_str(&line).unwrap();
        assert_eq!(cluster, back);

        let mut taxonomy = AspectTaxonomy::from_labels(["fit"]);
        taxonomy.admit_raw("battery life");
        let line = serde_json::to_string(&taxonomy).unwrap();
        let back: AspectTaxonomy = serde_json::from_str(&line).unwrap();
        assert_eq!(taxonomy, back);

        let review = Review {
            review_id: "r1".to_owned(),
            product_id: "p1".to_owned(),
            text: "solid".to_owned(),
            category: None,
        };
        let line = serde_json::to_string(&review).unwrap();
        assert!(!line.contains("category"));
        let back: Review = serde_json::from_str(&line).unwrap();
        assert_eq!(review, back);

        let summary = Summary {
            items: vec![SummaryItem {
                evidence: "fits well.".to_owned(),
                cluster_id: 0,
                aspect_id: "A_1".to_owned(),
                score: 2,
                source_review_ids: vec!["r1".to_owned()],
            }],
            text: "fits well.".to_owned(),
        };
        let line = serde_json::to_string(&summary).unwrap();
        let back: Summary = serde_json::from_str(&line).unwrap();
        assert_eq!(summary, back);
    }

    #[test]
    fn sentiment_serializes_lowercase() {
        assert_eq!(serde_json::to_string(&Sentiment::Good).unwrap(), "\"good\"");
        assert_eq!(serde_json::to_string(&Sentiment::Bad).unwrap(), "\"bad\"");
    }

    #[test]
    fn cluster_source_ids_are_sorted_unique() {
        let member = |id: &str| Argument {
            review_id: id.to_owned(),
            aspect_raw: "fit".to_owned(),
            aspect_id: Some("A_1".to_owned()),
            sentiment: Sentiment::Good,
            evidence: "fits well".to_owned(),
            original_evidence: None,
        };
        let cluster = EvidenceCluster {
            cluster_id: 0,
            members: vec![member("r2"), member("r1"), member("r2")],
            representative: None,
            score: None,
        };
        assert_eq!(cluster.source_review_ids(), vec!["r1", "r2"]);
    }
}
