//! Representative-evidence selection via weighted PageRank.
//!
//! Each evidence cluster gets a complete sentence-similarity graph whose
//! edge weights are clamped cosine similarities. The ranking recurrence is
//!
//! `WS(V_i) = (1 - d) + d * sum_{j != i} [w_ji / sum_k w_jk] * WS(V_j)`
//!
//! iterated synchronously from all-ones until the max-norm change drops
//! below the tolerance. The highest-scoring sentence becomes the cluster's
//! representative and replaces every member's evidence; the extracted
//! sentence is kept as `original_evidence`.

use thiserror::Error;

use crate::domain::EvidenceCluster;
use crate::embedding::{cosine_similarity, EmbeddingError, EmbeddingProvider, EmbeddingVector};

#[derive(Debug, Error)]
pub enum TextrankError {
    #[error("similarity graph requires at least one text")]
    EmptyGraph,
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Complete graph over sentences with symmetric non-negative weights.
#[derive(Debug, Clone)]
pub struct SimilarityGraph {
    pub texts: Vec<String>,
    pub embeddings: Vec<EmbeddingVector>,
    /// `weights[i][j] = max(0, cosine(i, j))`, zero diagonal.
    pub weights: Vec<Vec<f64>>,
}

impl SimilarityGraph {
    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }
}

/// PageRank iteration parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankConfig {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig {
            damping: 0.85,
            tolerance: 1e-6,
            max_iterations: 200,
        }
    }
}

/// Scores per node plus convergence bookkeeping.
#[derive(Debug, Clone)]
pub struct RankScores {
    pub scores: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Build the complete similarity graph over `texts`. Negative cosine
/// similarities are clamped to zero so all weights are valid for ranking.
pub fn build_similarity_graph(
    texts: &[&str],
    provider: &dyn EmbeddingProvider,
) -> Result<SimilarityGraph, TextrankError> {
    if texts.is_empty() {
        return Err(TextrankError::EmptyGraph);
    }
    let embeddings = provider.embed_batch(texts)?;
    let n = texts.len();
    let mut weights = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let w = cosine_similarity(&embeddings[i], &embeddings[j])?.max(0.0);
            weights[i][j] = w;
            weights[j][i] = w;
        }
    }
    Ok(SimilarityGraph {
        texts: texts.iter().map(|t| (*t).to_owned()).collect(),
        embeddings,
        weights,
    })
}

/// Run the weighted ranking recurrence. Nodes with zero outgoing weight
/// distribute their score uniformly over the other nodes. If the iteration
/// does not converge within `max_iterations`, the current scores are
/// returned with `converged` unset.
pub fn weighted_pagerank(graph: &SimilarityGraph, config: &RankConfig) -> RankScores {
    let n = graph.len();
    assert!(n > 0, "weighted_pagerank requires a non-empty graph");
    assert!(
        config.damping > 0.0 && config.damping < 1.0,
        "damping must lie in (0, 1)"
    );

    let row_sums: Vec<f64> = graph.weights.iter().map(|row| row.iter().sum()).collect();
    let uniform_share = if n > 1 { 1.0 / (n as f64 - 1.0) } else { 0.0 };

    let mut scores = vec![1.0f64; n];
    for iteration in 1..=config.max_iterations {
        let mut next = vec![0.0f64; n];
        for (i, slot) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let share = if row_sums[j] > 0.0 {
                    graph.weights[j][i] / row_sums[j]
                } else {
                    uniform_share
                };
                acc += share * scores[j];
            }
            *slot = (1.0 - config.damping) + config.damping * acc;
        }
        let delta = next
            .iter()
            .zip(&scores)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        scores = next;
        if delta < config.tolerance {
            return RankScores {
                scores,
                converged: true,
                iterations: iteration,
            };
        }
    }
    RankScores {
        scores,
        converged: false,
        iterations: config.max_iterations,
    }
}

/// Outcome of representative selection for one cluster.
#[derive(Debug, Clone)]
pub struct RepresentativeChoice {
    pub evidence: String,
    /// Ranking bookkeeping; absent for singleton clusters, which need no
    /// graph.
    pub rank: Option<RankScores>,
}

/// Pick the member evidence with the highest rank score; ties go to the
/// earliest member. Singleton clusters return their sole evidence directly.
pub fn select_representative(
    cluster: &EvidenceCluster,
    provider: &dyn EmbeddingProvider,
    config: &RankConfig,
) -> Result<RepresentativeChoice, TextrankError> {
    if cluster.members.is_empty() {
        return Err(TextrankError::EmptyCluster(cluster.cluster_id));
    }
    if cluster.members.len() == 1 {
        return Ok(RepresentativeChoice {
            evidence: cluster.members[0].evidence.clone(),
            rank: None,
        });
    }
    let texts: Vec<&str> = cluster.members.iter().map(|m| m.evidence.as_str()).collect();
    let graph = build_similarity_graph(&texts, provider)?;
    let rank = weighted_pagerank(&graph, config);
    let mut best = 0usize;
    for (index, score) in rank.scores.iter().enumerate() {
        if *score > rank.scores[best] {
            best = index;
        }
    }
    Ok(RepresentativeChoice {
        evidence: cluster.members[best].evidence.clone(),
        rank: Some(rank),
    })
}

/// Substitute the chosen representative into every member, keeping each
/// member's extracted sentence in `original_evidence`.
///
/// Panics if the cluster has no representative chosen yet.
pub fn rewrite_cluster(mut cluster: EvidenceCluster) -> EvidenceCluster {
    let representative = cluster
        .representative
        .clone()
        .expect("rewrite_cluster requires a chosen representative");
    for member in &mut cluster.members {
        if member.original_evidence.is_none() {
            member.original_evidence = Some(member.evidence.clone());
        }
        member.evidence = representative.clone();
    }
    cluster
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Argument, Sentiment};
    use crate::embedding::HashedEmbedder;

    fn argument(evidence: &str) -> Argument {
        Argument {
            review_id: "r1".to_owned(),
            aspect_raw: "fit".to_owned(),
            aspect_id: Some("A_1".to_owned()),
            sentiment: Sentiment::Good,
            evidence: evidence.to_owned(),
            original_evidence: None,
        }
    }

    fn cluster(evidences: &[&str]) -> EvidenceCluster {
        EvidenceCluster {
            cluster_id: 0,
            members: evidences.iter().map(|e| argument(e)).collect(),
            representative: None,
            score: None,
        }
    }

    fn graph_with_weights(weights: Vec<Vec<f64>>) -> SimilarityGraph {
        let n = weights.len();
        SimilarityGraph {
            texts: (0..n).map(|i| format!("t{i}")).collect(),
            embeddings: Vec::new(),
            weights,
        }
    }

    #[test]
    fn identical_texts_get_unit_edge() {
        let provider = HashedEmbedder::new();
        let graph = build_similarity_graph(&["same words", "same words"], &provider).unwrap();
        assert!((graph.weights[0][1] - 1.0).abs() < 1e-9);
        assert_eq!(graph.weights[0][0], 0.0);
    }

    #[test]
    fn graph_matches_pairwise_clamped_dot_products() {
        let provider = HashedEmbedder::new();
        let texts = ["pops out easily", "pops out with no effort", "tray cracked"];
        let graph = build_similarity_graph(&texts, &provider).unwrap();
        let vectors = provider.embed_batch(&texts).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j {
                    0.0
                } else {
                    cosine_similarity(&vectors[i], &vectors[j]).unwrap().max(0.0)
                };
                assert_eq!(graph.weights[i][j], expected, "weight ({i},{j})");
            }
        }
    }

    /// Provider handing out fixed vectors by text, for exercising negative
    /// raw similarities (the hashed embedder never produces them).
    struct FixedProvider;

    impl crate::embedding::EmbeddingProvider for FixedProvider {
        fn dimension(&self) -> usize {
            2
        }

        fn embed_batch(
            &self,
            texts: &[&str],
        ) -> Result<Vec<crate::embedding::EmbeddingVector>, crate::embedding::EmbeddingError>
        {
            Ok(texts
                .iter()
                .map(|t| {
                    let values = match *t {
                        "east" => vec![1.0, 0.0],
                        "west" => vec![-1.0, 0.0],
                        _ => vec![0.0, 1.0],
                    };
                    crate::embedding::EmbeddingVector::from_unnormalized(values)
                })
                .collect())
        }

        fn fingerprint(&self) -> String {
            "fixed".to_owned()
        }
    }

    #[test]
    fn negative_raw_similarity_clamps_to_zero_weight() {
        let graph = build_similarity_graph(&["east", "west"], &FixedProvider).unwrap();
        assert_eq!(graph.weights[0][1], 0.0);
        assert_eq!(graph.weights[1][0], 0.0);
    }

    #[test]
    fn two_symmetric_nodes_score_equally() {
        let graph = graph_with_weights(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let rank = weighted_pagerank(&graph, &RankConfig::default());
        assert!(rank.converged);
        assert_eq!(rank.scores[0], rank.scores[1]);
    }

    #[test]
    fn uniform_complete_graph_scores_uniformly() {
        for n in [3usize, 5, 9] {
            let mut weights = vec![vec![0.7f64; n]; n];
            for (i, row) in weights.iter_mut().enumerate() {
                row[i] = 0.0;
            }
            let rank = weighted_pagerank(&graph_with_weights(weights), &RankConfig::default());
            assert!(rank.converged);
            for score in &rank.scores {
                assert!((score - rank.scores[0]).abs() < 1e-10);
                assert!(*score > 0.0);
            }
        }
    }

    #[test]
    fn three_node_graph_matches_an_independent_dense_iteration() {
        // w12 = 0.9, w13 = 0.1, w23 = 0.5.
        let weights = vec![
            vec![0.0, 0.9, 0.1],
            vec![0.9, 0.0, 0.5],
            vec![0.1, 0.5, 0.0],
        ];
        let config = RankConfig {
            damping: 0.85,
            tolerance: 1e-12,
            max_iterations: 1000,
        };
        let rank = weighted_pagerank(&graph_with_weights(weights.clone()), &config);
        assert!(rank.converged);

        // Oracle: the same recurrence through an explicit transition matrix.
        let n = 3;
        let row_sums: Vec<f64> = weights.iter().map(|r| r.iter().sum()).collect();
        let mut scores = vec![1.0f64; n];
        for _ in 0..config.max_iterations {
            let next: Vec<f64> = (0..n)
                .map(|i| {
                    let flow: f64 = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| weights[j][i] / row_sums[j] * scores[j])
                        .sum();
                    (1.0 - config.damping) + config.damping * flow
                })
                .collect();
            let delta = next
                .iter()
                .zip(&scores)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            scores = next;
            if delta < config.tolerance {
                break;
            }
        }
        for (ours, expected) in rank.scores.iter().zip(&scores) {
            assert!((ours - expected).abs() <= 1e-8);
        }
        // Node 1 sits on both heavy edges and must rank first.
        assert!(rank.scores[1] > rank.scores[0]);
        assert!(rank.scores[0] > rank.scores[2]);
    }

    #[test]
    fn zero_weight_graph_falls_back_to_uniform_sharing() {
        let graph = graph_with_weights(vec![vec![0.0; 3]; 3]);
        let rank = weighted_pagerank(&graph, &RankConfig::default());
        assert!(rank.converged);
        for score in &rank.scores {
            assert!((score - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn singleton_cluster_keeps_its_evidence() {
        let provider = HashedEmbedder::new();
        let c = cluster(&["only sentence"]);
        let choice = select_representative(&c, &provider, &RankConfig::default()).unwrap();
        assert_eq!(choice.evidence, "only sentence");
        assert!(choice.rank.is_none());
    }

    #[test]
    fn duplicated_sentence_accrues_rank() {
        let provider = HashedEmbedder::new();
        let c = cluster(&[
            "cubes pop out easily",
            "cubes pop out easily",
            "cubes pop right out",
        ]);
        let choice = select_representative(&c, &provider, &RankConfig::default()).unwrap();
        assert_eq!(choice.evidence, "cubes pop out easily");
    }

    #[test]
    fn all_identical_members_tie_break_to_first() {
        let provider = HashedEmbedder::new();
        let c = cluster(&["same", "same", "same"]);
        let choice = select_representative(&c, &provider, &RankConfig::default()).unwrap();
        assert_eq!(choice.evidence, "same");
        let rank = choice.rank.unwrap();
        assert!(rank.converged);
    }

    #[test]
    fn representative_is_always_a_member_sentence() {
        let provider = HashedEmbedder::new();
        let c = cluster(&["lid fits snug", "the lid fits snug", "lid seals tight"]);
        let choice = select_representative(&c, &provider, &RankConfig::default()).unwrap();
        assert!(c.members.iter().any(|m| m.evidence == choice.evidence));
    }

    #[test]
    fn rewrite_replaces_evidence_and_keeps_originals() {
        let mut c = cluster(&["x1", "x2", "x3", "x4", "x5"]);
        c.representative = Some("x2".to_owned());
        let rewritten = rewrite_cluster(c);
        let mut originals: Vec<&str> = rewritten
            .members
            .iter()
            .map(|m| m.original_evidence.as_deref().unwrap())
            .collect();
        originals.sort_unstable();
        assert!(rewritten.members.iter().all(|m| m.evidence == "x2"));
        assert_eq!(originals, vec!["x1", "x2", "x3", "x4", "x5"]);
    }

    #[test]
    fn rewrite_is_idempotent_on_originals() {
        let mut c = cluster(&["x1", "x2"]);
        c.representative = Some("x1".to_owned());
        let once = rewrite_cluster(c);
        let twice = rewrite_cluster(once.clone());
        assert_eq!(once, twice);
    }

    mod random_properties {
        use super::*;
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;

        #[allow(clippy::needless_range_loop)] // symmetric matrix fill
        fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> SimilarityGraph {
            let mut weights = vec![vec![0.0f64; n]; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let w = if rng.random_bool(0.2) {
                        0.0
                    } else {
                        rng.random_range(0.0..1.0)
                    };
                    weights[i][j] = w;
                    weights[j][i] = w;
                }
            }
            graph_with_weights(weights)
        }

        #[test]
        fn default_config_converges_with_positive_scores_up_to_100_nodes() {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            for _ in 0..25 {
                let n = rng.random_range(1..=100);
                let graph = random_graph(&mut rng, n);
                let rank = weighted_pagerank(&graph, &RankConfig::default());
                assert!(rank.converged, "no convergence for n={n}");
                assert!(rank.scores.iter().all(|&s| s > 0.0));
            }
        }
    }
}
