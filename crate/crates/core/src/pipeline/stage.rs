//! Stage framework: content-addressed artifacts, atomic writes, and
//! hash-gated re-execution.
//!
//! Every stage writes its outputs as line-delimited JSON files under the
//! product directory and records them in the manifest together with an
//! input hash (upstream artifact hashes plus a parameter fingerprint). On
//! the next run a stage is re-executed only when that input hash changes;
//! otherwise its artifacts are reloaded and verified against their recorded
//! content hashes.

use std::io;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::DroppedReview;
use crate::extraction::SkipRecord;

/// SHA-256 hex digest of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

/// Write through a temp file and rename, so readers never see partial
/// content.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

/// Serialize items as one compact JSON record per line.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        out.extend_from_slice(
            serde_json::to_string(item)
                .expect("artifact types serialize")
                .as_bytes(),
        );
        out.push(b'\n');
    }
    out
}

/// Parse line-delimited JSON records.
pub fn from_jsonl<T: DeserializeOwned>(bytes: &[u8]) -> Result<Vec<T>, serde_json::Error> {
    let text = String::from_utf8_lossy(bytes);
    text.lines()
        .filter(|line| !line.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// One persisted stage output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageArtifact {
    pub stage: String,
    /// Path relative to the product directory.
    pub path: String,
    pub content_hash: String,
    pub upstream_hashes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Executed,
    Cached,
}

/// Manifest entry for one stage of one product run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageExecution {
    pub stage: String,
    pub status: StageStatus,
    pub input_hash: String,
    pub artifacts: Vec<StageArtifact>,
}

/// Per-product run manifest: what ran, what was reused, what was skipped
/// or flagged along the way.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ProductManifest {
    pub product_id: String,
    pub stages: Vec<StageExecution>,
    pub dropped_reviews: Vec<DroppedReview>,
    pub skipped_reviews: Vec<SkipRecord>,
    pub warnings: Vec<String>,
    /// Live backend calls the extraction stage issued during this run
    /// (cache hits and reused stages count zero).
    pub backend_calls: usize,
}

/// Output of a gated stage: the artifact payloads in declaration order and
/// their content hashes.
pub struct StageOutput {
    pub payloads: Vec<Vec<u8>>,
    pub hashes: Vec<String>,
    pub status: StageStatus,
}

/// Runs stages for one product directory, reusing artifacts recorded in the
/// previous manifest when their input hashes match.
pub struct StageRunner {
    product_dir: PathBuf,
    previous: Option<ProductManifest>,
    pub executions: Vec<StageExecution>,
}

impl StageRunner {
    pub fn new(product_dir: &Path) -> Self {
        let previous = std::fs::read(product_dir.join("manifest.json"))
            .ok()
            .and_then(|bytes| serde_json::from_slice(&bytes).ok());
        StageRunner {
            product_dir: product_dir.to_owned(),
            previous,
            executions: Vec::new(),
        }
    }

    /// Hash a stage's inputs: upstream artifact hashes plus a parameter
    /// fingerprint.
    pub fn input_hash(upstream: &[&str], params: &str) -> String {
        let mut hasher = Sha256::new();
        for hash in upstream {
            hasher.update(hash.as_bytes());
            hasher.update([0u8]);
        }
        hasher.update(params.as_bytes());
        hex::encode(hasher.finalize())
    }

    fn try_reuse(&self, stage: &str, input_hash: &str, rel_paths: &[&str]) -> Option<StageOutput> {
        let previous = self.previous.as_ref()?;
        let entry = previous.stages.iter().find(|s| s.stage == stage)?;
        if entry.input_hash != input_hash || entry.artifacts.len() != rel_paths.len() {
            return None;
        }
        let mut payloads = Vec::new();
        let mut hashes = Vec::new();
        for (artifact, rel_path) in entry.artifacts.iter().zip(rel_paths) {
            if artifact.path != *rel_path {
                return None;
            }
            let bytes = std::fs::read(self.product_dir.join(&artifact.path)).ok()?;
            if sha256_hex(&bytes) != artifact.content_hash {
                return None;
            }
            hashes.push(artifact.content_hash.clone());
            payloads.push(bytes);
        }
        Some(StageOutput {
            payloads,
            hashes,
            status: StageStatus::Cached,
        })
    }

    /// Run one stage: reuse its recorded artifacts when the input hash
    /// matches, otherwise invoke `compute` and persist what it returns
    /// (one payload per relative path, in order).
    pub fn run_stage<E>(
        &mut self,
        stage: &str,
        upstream: &[&str],
        params: &str,
        rel_paths: &[&str],
        compute: impl FnOnce() -> Result<Vec<Vec<u8>>, E>,
    ) -> Result<StageOutput, StageError<E>> {
        let input_hash = Self::input_hash(upstream, params);
        let upstream_hashes: Vec<String> = upstream.iter().map(|h| (*h).to_owned()).collect();

        let output = if let Some(reused) = self.try_reuse(stage, &input_hash, rel_paths) {
            reused
        } else {
            let payloads = compute().map_err(StageError::Compute)?;
            assert_eq!(
                payloads.len(),
                rel_paths.len(),
                "stage {stage} must produce one payload per declared path"
            );
            let mut hashes = Vec::new();
            for (rel_path, payload) in rel_paths.iter().zip(&payloads) {
                let path = self.product_dir.join(rel_path);
                atomic_write(&path, payload).map_err(|source| StageError::Io {
                    path: path.clone(),
                    source,
                })?;
                hashes.push(sha256_hex(payload));
            }
            StageOutput {
                payloads,
                hashes,
                status: StageStatus::Executed,
            }
        };

        self.executions.push(StageExecution {
            stage: stage.to_owned(),
            status: output.status,
            input_hash,
            artifacts: rel_paths
                .iter()
                .zip(&output.hashes)
                .map(|(rel_path, hash)| StageArtifact {
                    stage: stage.to_owned(),
                    path: (*rel_path).to_owned(),
                    content_hash: hash.clone(),
                    upstream_hashes: upstream_hashes.clone(),
                })
                .collect(),
        });
        Ok(output)
    }
}

/// Stage failure: either the computation itself or artifact I/O.
#[derive(Debug)]
pub enum StageError<E> {
    Compute(E),
    Io { path: PathBuf, source: io::Error },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct Row {
        value: u32,
    }

    #[test]
    fn jsonl_round_trips() {
        let rows = vec![Row { value: 1 }, Row { value: 2 }];
        let bytes = to_jsonl(&rows);
        let back: Vec<Row> = from_jsonl(&bytes).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn stage_reuses_when_input_hash_matches() {
        let dir = tempfile::tempdir().unwrap();
        let mut calls = 0;
        let run = |runner: &mut StageRunner, params: &str, calls: &mut u32| {
            runner
                .run_stage::<std::convert::Infallible>(
                    "demo",
                    &["abc"],
                    params,
                    &["stages/demo.jsonl"],
                    || {
                        *calls += 1;
                        Ok(vec![to_jsonl(&[Row { value: 7 }])])
                    },
                )
                .unwrap()
        };

        let mut runner = StageRunner::new(dir.path());
        let first = run(&mut runner, "p=1", &mut calls);
        assert_eq!(first.status, StageStatus::Executed);
        let manifest = ProductManifest {
            product_id: "p".to_owned(),
            stages: runner.executions.clone(),
            ..ProductManifest::default()
        };
        atomic_write(
            &dir.path().join("manifest.json"),
            &serde_json::to_vec(&manifest).unwrap(),
        )
        .unwrap();

        // Same params: reused, compute not called again.
        let mut runner = StageRunner::new(dir.path());
        let second = run(&mut runner, "p=1", &mut calls);
        assert_eq!(second.status, StageStatus::Cached);
        assert_eq!(calls, 1);
        assert_eq!(second.payloads, first.payloads);

        // Changed params: re-executed.
        let mut runner = StageRunner::new(dir.path());
        let third = run(&mut runner, "p=2", &mut calls);
        assert_eq!(third.status, StageStatus::Executed);
        assert_eq!(calls, 2);
    }

    #[test]
    fn corrupted_artifact_forces_re_execution() {
        let dir = tempfile::tempdir().unwrap();
        let mut calls = 0;
        let mut runner = StageRunner::new(dir.path());
        runner
            .run_stage::<std::convert::Infallible>(
                "demo",
                &[],
                "p",
                &["stages/demo.jsonl"],
                || {
                    calls += 1;
                    Ok(vec![b"{\"value\":7}\n".to_vec()])
                },
            )
            .unwrap();
        let manifest = ProductManifest {
            product_id: "p".to_owned(),
            stages: runner.executions.clone(),
            ..ProductManifest::default()
        };
        atomic_write(
            &dir.path().join("manifest.json"),
            &serde_json::to_vec(&manifest).unwrap(),
        )
        .unwrap();
        std::fs::write(dir.path().join("stages/demo.jsonl"), b"tampered").unwrap();

        let mut runner = StageRunner::new(dir.path());
        let rerun = runner
            .run_stage::<std::convert::Infallible>(
                "demo",
                &[],
                "p",
                &["stages/demo.jsonl"],
                || {
                    calls += 1;
                    Ok(vec![b"{\"value\":7}\n".to_vec()])
                },
            )
            .unwrap();
        assert_eq!(rerun.status, StageStatus::Executed);
        assert_eq!(calls, 2);
    }
}
