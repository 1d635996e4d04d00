//! Aspect-centric relations, argument validity scores, cluster ranking and
//! summary assembly.
//!
//! Within an evidence cluster, two arguments on the same canonical aspect
//! support each other when their sentiments agree and contradict each other
//! when they differ. An argument's score sums the sentiment-polarity
//! products over its same-aspect peers, so it equals supports minus
//! contradictions; evidence that backs both sides of an aspect scores low
//! and drops out of the summary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{EvidenceCluster, Sentiment, Summary, SummaryItem};

/// Sentiment polarity used in the score: good = +1.0, bad = -1.0.
pub fn polarity(sentiment: Sentiment) -> f64 {
    match sentiment {
        Sentiment::Good => 1.0,
        Sentiment::Bad => -1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelationKind {
    Support,
    Contradiction,
}

/// A typed relation between two members (by index) of one cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationEdge {
    pub from: usize,
    pub to: usize,
    pub kind: RelationKind,
}

fn aspect_id_of(cluster: &EvidenceCluster, index: usize) -> &str {
    cluster.members[index]
        .aspect_id
        .as_deref()
        .expect("scoring requires canonical aspect ids; run aspect unification first")
}

/// One edge per unordered same-aspect member pair, typed by sentiment
/// agreement. Pairs with different aspects get no edge.
pub fn build_relations(cluster: &EvidenceCluster) -> Vec<RelationEdge> {
    let n = cluster.members.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if aspect_id_of(cluster, i) != aspect_id_of(cluster, j) {
                continue;
            }
            let kind = if cluster.members[i].sentiment == cluster.members[j].sentiment {
                RelationKind::Support
            } else {
                RelationKind::Contradiction
            };
            edges.push(RelationEdge { from: i, to: j, kind });
        }
    }
    edges
}

/// Validity score of member `index`: the sum of polarity products over all
/// same-aspect peers, i.e. supports minus contradictions.
pub fn argument_score(index: usize, cluster: &EvidenceCluster) -> i64 {
    let member = &cluster.members[index];
    let aspect = aspect_id_of(cluster, index);
    let mut agree = 0i64;
    let mut disagree = 0i64;
    for (j, peer) in cluster.members.iter().enumerate() {
        if j == index || aspect_id_of(cluster, j) != aspect {
            continue;
        }
        if peer.sentiment == member.sentiment {
            agree += 1;
        } else {
            disagree += 1;
        }
    }
    agree - disagree
}

/// Cluster score: the highest score achieved by any member.
pub fn cluster_score(cluster: &EvidenceCluster) -> i64 {
    assert!(!cluster.members.is_empty(), "clusters are non-empty");
    (0..cluster.members.len())
        .map(|i| argument_score(i, cluster))
        .max()
        .unwrap()
}

/// Index of the first member achieving the cluster score; its aspect is the
/// one the cluster's summary item reports.
pub fn top_member_index(cluster: &EvidenceCluster) -> usize {
    let best = cluster_score(cluster);
    (0..cluster.members.len())
        .find(|&i| argument_score(i, cluster) == best)
        .unwrap()
}

/// Fill every cluster's score and sort descending; ties prefer the larger
/// member count, then the lexicographically smaller representative.
pub fn rank_clusters(mut clusters: Vec<EvidenceCluster>) -> Vec<EvidenceCluster> {
    for cluster in &mut clusters {
        cluster.score = Some(cluster_score(cluster));
    }
    clusters.sort_by(|a, b| {
        let score_a = a.score.unwrap();
        let score_b = b.score.unwrap();
        score_b
            .cmp(&score_a)
            .then_with(|| b.members.len().cmp(&a.members.len()))
            .then_with(|| {
                a.representative
                    .as_deref()
                    .unwrap_or("")
                    .cmp(b.representative.as_deref().unwrap_or(""))
            })
    });
    clusters
}

/// Append a "." when a sentence lacks terminating punctuation, so the
/// joined summary segments back into the same sentences.
pub fn normalize_sentence(text: &str) -> String {
    let trimmed = text.trim();
    if trimmed.ends_with(['.', '!', '?']) {
        trimmed.to_owned()
    } else {
        format!("{trimmed}.")
    }
}

/// Summary assembly outcome: the summary plus warnings destined for the run
/// manifest.
#[derive(Debug, Clone)]
pub struct AssembledSummary {
    pub summary: Summary,
    pub warnings: Vec<String>,
}

/// Walk ranked clusters and take each representative whose text is not
/// already taken, stopping at `top_n`. Clusters whose best score is negative
/// are admitted only when the non-negative ones cannot fill the budget, and
/// doing so is flagged. A budget shortfall is also flagged.
pub fn assemble_summary(ranked: &[EvidenceCluster], top_n: usize) -> AssembledSummary {
    assert!(top_n >= 1, "top_n must be at least 1");
    let mut warnings = Vec::new();
    if ranked.is_empty() {
        warnings.push("empty summary: no evidence clusters".to_owned());
        return AssembledSummary {
            summary: Summary {
                items: Vec::new(),
                text: String::new(),
            },
            warnings,
        };
    }

    let mut items: Vec<SummaryItem> = Vec::new();
    let mut taken: Vec<String> = Vec::new();
    let mut negative_admitted = 0usize;

    let admit = |cluster: &EvidenceCluster,
                     items: &mut Vec<SummaryItem>,
                     taken: &mut Vec<String>| {
        let representative = cluster
            .representative
            .as_deref()
            .expect("ranked clusters carry representatives");
        let evidence = normalize_sentence(representative);
        if taken.contains(&evidence) {
            return false;
        }
        let top = top_member_index(cluster);
        taken.push(evidence.clone());
        items.push(SummaryItem {
            evidence,
            cluster_id: cluster.cluster_id,
            aspect_id: cluster.members[top]
                .aspect_id
                .clone()
                .expect("scored members carry aspect ids"),
            score: cluster.score.expect("ranked clusters carry scores"),
            source_review_ids: cluster.source_review_ids(),
        });
        true
    };

    for cluster in ranked.iter().filter(|c| c.score.unwrap_or(0) >= 0) {
        if items.len() >= top_n {
            break;
        }
        admit(cluster, &mut items, &mut taken);
    }
    if items.len() < top_n {
        for cluster in ranked.iter().filter(|c| c.score.unwrap_or(0) < 0) {
            if items.len() >= top_n {
                break;
            }
            if admit(cluster, &mut items, &mut taken) {
                negative_admitted += 1;
            }
        }
    }

    if negative_admitted > 0 {
        warnings.push(format!(
            "admitted {negative_admitted} negative-scored cluster(s) to fill the budget"
        ));
    }
    if items.len() < top_n {
        warnings.push(format!(
            "summary shortfall: {} unique evidence piece(s) for a budget of {top_n}",
            items.len()
        ));
    }

    let text = items
        .iter()
        .map(|item| item.evidence.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    AssembledSummary {
        summary: Summary { items, text },
        warnings,
    }
}

/// Count relations by kind touching member `index`; used by tests to check
/// the score identity score = supports - contradictions.
pub fn relation_counts_for(edges: &[RelationEdge], index: usize) -> BTreeMap<RelationKind, usize> {
    let mut counts = BTreeMap::new();
    for edge in edges {
        if edge.from == index || edge.to == index {
            *counts.entry(edge.kind).or_insert(0) += 1;
        }
    }
    counts
}

impl Ord for RelationKind {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (*self as u8).cmp(&(*other as u8))
    }
}

impl PartialOrd for RelationKind {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
