//! DBSCAN over cosine distance.
//!
//! One algorithm serves three call sites: aspect unification (eps 0.5),
//! evidence clustering (eps 0.21) and the sentence-diversity metric
//! (eps 0.5). `min_samples` defaults to 1, in which case the labeling is
//! exactly the connected components of the graph with an edge wherever
//! cosine distance <= eps.

use std::collections::VecDeque;

use thiserror::Error;

use crate::domain::{Argument, AspectTaxonomy, EvidenceCluster};
use crate::embedding::{cosine_distance, EmbeddingError, EmbeddingProvider, EmbeddingVector};

/// Default eps for aspect unification and the diversity metric.
pub const EPS_ASPECT_DEFAULT: f64 = 0.5;
/// Default eps for evidence clustering.
pub const EPS_EVIDENCE_DEFAULT: f64 = 0.21;
/// Default minimum samples per cluster.
pub const MIN_SAMPLES_DEFAULT: usize = 1;

#[derive(Debug, Error)]
pub enum ClusteringError {
    #[error("invalid clustering config: {0}")]
    InvalidConfig(String),
    #[error("clustering requires at least one input point")]
    EmptyInput,
    #[error("argument at index {0} has no aspect_id; run aspect unification first")]
    MissingAspectId(usize),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// DBSCAN parameters; the metric is fixed to cosine distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusteringConfig {
    pub eps: f64,
    pub min_samples: usize,
}

impl ClusteringConfig {
    pub fn new(eps: f64, min_samples: usize) -> Result<Self, ClusteringError> {
        if eps.is_nan() || eps <= 0.0 {
            return Err(ClusteringError::InvalidConfig(format!(
                "eps must be > 0, got {eps}"
            )));
        }
        if min_samples < 1 {
            return Err(ClusteringError::InvalidConfig(
                "min_samples must be >= 1".to_owned(),
            ));
        }
        Ok(ClusteringConfig { eps, min_samples })
    }
}

/// One cluster id per input point; `None` marks noise. With min_samples = 1
/// every point is a core point, so there are no noise points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabeling {
    pub labels: Vec<Option<usize>>,
    pub cluster_count: usize,
}

impl ClusterLabeling {
    /// Member indices per cluster, clusters in id order.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.cluster_count];
        for (index, label) in self.labels.iter().enumerate() {
            if let Some(id) = label {
                groups[*id].push(index);
            }
        }
        groups
    }
}

#[derive(Clone, Copy, PartialEq)]
enum PointState {
    Unvisited,
    Noise,
    Cluster(usize),
}

/// Standard DBSCAN: core points have >= min_samples neighbors within eps
/// (self included); clusters are maximal density-connected sets. Cluster ids
/// are renumbered 0..k-1 in order of first member appearance so the labeling
/// is deterministic.
pub fn dbscan(
    points: &[EmbeddingVector],
    config: &ClusteringConfig,
) -> Result<ClusterLabeling, ClusteringError> {
    if points.is_empty() {
        return Ok(ClusterLabeling {
            labels: Vec::new(),
            cluster_count: 0,
        });
    }

    let n = points.len();
    let neighbors_of = |index: usize| -> Result<Vec<usize>, ClusteringError> {
        let mut out = Vec::new();
        for other in 0..n {
            if cosine_distance(&points[index], &points[other])? <= config.eps {
                out.push(other);
            }
        }
        Ok(out)
    };

    let mut state = vec![PointState::Unvisited; n];
    let mut visited = vec![false; n];
    let mut next_id = 0usize;

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        let neighbors = neighbors_of(seed)?;
        if neighbors.len() < config.min_samples {
            state[seed] = PointState::Noise;
            continue;
        }
        let id = next_id;
        next_id += 1;
        state[seed] = PointState::Cluster(id);
        let mut queue: VecDeque<usize> = neighbors.into_iter().filter(|&p| p != seed).collect();
        while let Some(point) = queue.pop_front() {
            if state[point] == PointState::Noise {
                state[point] = PointState::Cluster(id); // border point
            }
            if visited[point] {
                continue;
            }
            visited[point] = true;
            state[point] = PointState::Cluster(id);
            let reachable = neighbors_of(point)?;
            if reachable.len() >= config.min_samples {
                queue.extend(reachable);
            }
        }
    }

    // Renumber ids by first appearance in input order.
    let mut remap: Vec<Option<usize>> = vec![None; next_id];
    let mut cluster_count = 0usize;
    let mut labels = Vec::with_capacity(n);
    for s in &state {
        labels.push(match s {
            PointState::Cluster(old) => {
                let new = *remap[*old].get_or_insert_with(|| {
                    let id = cluster_count;
                    cluster_count += 1;
                    id
                });
                Some(new)
            }
            PointState::Noise => None,
            PointState::Unvisited => unreachable!("every point is visited"),
        });
    }

    Ok(ClusterLabeling {
        labels,
        cluster_count,
    })
}

/// Unify aspect wording: embed every distinct raw aspect string, cluster
/// them, and collapse each cluster into one canonical symbol. The canonical
/// label of a cluster is its most frequent raw string, ties broken by the
/// lexicographically smallest.
pub fn cluster_aspects(
    taxonomy: &AspectTaxonomy,
    provider: &dyn EmbeddingProvider,
    config: &ClusteringConfig,
) -> Result<AspectTaxonomy, ClusteringError> {
    let raws = taxonomy.raw_aspects_in_order();
    if raws.is_empty() {
        return Err(ClusteringError::EmptyInput);
    }
    let raw_count = |raw: &str| -> u64 {
        taxonomy
            .symbol_of
            .get(raw)
            .and_then(|symbol| taxonomy.counts.get(symbol))
            .copied()
            .unwrap_or(0)
    };

    let vectors = provider.embed_batch(&raws)?;
    let labeling = dbscan(&vectors, config)?;
    let groups = labeling.groups();

    let mut aspects = Vec::with_capacity(groups.len());
    let mut symbol_of = std::collections::BTreeMap::new();
    let mut counts = std::collections::BTreeMap::new();
    for (cluster_index, group) in groups.iter().enumerate() {
        let symbol = AspectTaxonomy::symbol_for_index(cluster_index);
        let mut total = 0u64;
        let mut canonical: Option<&str> = None;
        for &member in group {
            let raw = raws[member];
            let count = raw_count(raw);
            total += count;
            canonical = Some(match canonical {
                None => raw,
                Some(best) => {
                    let best_count = raw_count(best);
                    if count > best_count || (count == best_count && raw < best) {
                        raw
                    } else {
                        best
                    }
                }
            });
            symbol_of.insert(raw.to_owned(), symbol.clone());
        }
        aspects.push(canonical.expect("dbscan clusters are non-empty").to_owned());
        counts.insert(symbol, total);
    }

    Ok(AspectTaxonomy {
        aspects,
        symbol_of,
        counts,
    })
}

/// Group arguments whose evidence sentences are semantically close. Members
/// preserve input order; representatives and scores are filled later.
pub fn cluster_evidence(
    arguments: &[Argument],
    provider: &dyn EmbeddingProvider,
    config: &ClusteringConfig,
) -> Result<Vec<EvidenceCluster>, ClusteringError> {
    if arguments.is_empty() {
        return Ok(Vec::new());
    }
    for (index, argument) in arguments.iter().enumerate() {
        if argument.aspect_id.is_none() {
            return Err(ClusteringError::MissingAspectId(index));
        }
    }

    let texts: Vec<&str> = arguments.iter().map(|a| a.evidence.as_str()).collect();
    let vectors = provider.embed_batch(&texts)?;
    let labeling = dbscan(&vectors, config)?;

    let clusters = labeling
        .groups()
        .into_iter()
        .enumerate()
        .map(|(cluster_id, group)| EvidenceCluster {
            cluster_id,
            members: group.iter().map(|&i| arguments[i].clone()).collect(),
            representative: None,
            score: None,
        })
        .collect();
    Ok(clusters)
}
