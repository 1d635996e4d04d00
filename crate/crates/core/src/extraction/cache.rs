//! File-backed response cache keyed by a hash of (model, prompt).
//!
//! One file per key under the cache directory; writes go through a
//! temp-then-rename so concurrent readers and writers of distinct keys
//! never observe partial content.

use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(ResponseCache { dir })
    }

    /// Cache key: SHA-256 over the model name and the full prompt.
    pub fn key(model: &str, prompt: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(model.as_bytes());
        hasher.update([0u8]);
        hasher.update(prompt.as_bytes());
        hex::encode(hasher.finalize())
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.txt"))
    }

    /// Read errors are treated as misses.
    pub fn get(&self, key: &str) -> Option<String> {
        std::fs::read_to_string(self.path_for(key)).ok()
    }

    pub fn put(&self, key: &str, value: &str) -> io::Result<()> {
        let target = self.path_for(key);
        let tmp = self.dir.join(format!(".{key}.tmp"));
        std::fs::write(&tmp, value)?;
        std::fs::rename(&tmp, &target)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_a_response() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path()).unwrap();
        let key = ResponseCache::key("m", "prompt body");
        assert!(cache.get(&key).is_none());
        cache.put(&key, "response").unwrap();
        assert_eq!(cache.get(&key).as_deref(), Some("response"));
    }

    #[test]
    fn key_depends_on_model_and_prompt() {
        let base = ResponseCache::key("m", "p");
        assert_ne!(base, ResponseCache::key("m2", "p"));
        assert_ne!(base, ResponseCache::key("m", "p2"));
        assert_eq!(base, ResponseCache::key("m", "p"));
    }
}
