//! Per-class stage snapshots so an interrupted or re-tuned run can skip
//! work whose inputs have not changed.

use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    fingerprint: String,
    stage: String,
    class: usize,
    payload: T,
}

/// Hex SHA-256 of the given parts, each length-prefixed.
pub fn fingerprint(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone)]
pub struct Checkpoints {
    dir: PathBuf,
    resume: bool,
}

impl Checkpoints {
    pub fn new(dir: impl Into<PathBuf>, resume: bool) -> Self {
        Checkpoints {
            dir: dir.into(),
            resume,
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, stage: &str, class: usize) -> PathBuf {
        self.dir.join(format!("{stage}-{class:03}.json"))
    }

    pub fn save<T: Serialize>(
        &self,
        stage: &str,
        class: usize,
        fp: &str,
        payload: &T,
    ) -> Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let env = Envelope {
            fingerprint: fp.to_string(),
            stage: stage.to_string(),
            class,
            payload,
        };
        let path = self.path(stage, class);
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec(&env)?).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    /// The saved payload when resuming and the fingerprint matches.
    pub fn load<T: DeserializeOwned>(&self, stage: &str, class: usize, fp: &str) -> Option<T> {
        if !self.resume {
            return None;
        }
        let path = self.path(stage, class);
        let bytes = std::fs::read(&path).ok()?;
        match serde_json::from_slice::<Envelope<T>>(&bytes) {
            Ok(env) if env.fingerprint == fp => {
                info!("resuming {stage} for class {class} from {}", path.display());
                Some(env.payload)
            }
            Ok(_) => {
                info!("{} is stale; recomputing", path.display());
                None
            }
            Err(e) => {
                warn!("ignoring unreadable checkpoint {}: {e}", path.display());
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_staleness() {
        let dir = tempfile::tempdir().unwrap();
        let cp = Checkpoints::new(dir.path().join("cp"), true);
        cp.save("ga", 2, "abc", &vec![1, 2, 3]).unwrap();
        assert_eq!(cp.load::<Vec<i32>>("ga", 2, "abc"), Some(vec![1, 2, 3]));
        assert_eq!(cp.load::<Vec<i32>>("ga", 2, "other"), None);
        assert_eq!(cp.load::<Vec<i32>>("ga", 1, "abc"), None);
        let fresh = Checkpoints::new(dir.path().join("cp"), false);
        assert_eq!(fresh.load::<Vec<i32>>("ga", 2, "abc"), None);
    }

    #[test]
    fn fingerprint_separates_parts() {
        assert_ne!(fingerprint(&[b"ab", b"c"]), fingerprint(&[b"a", b"bc"]));
        assert_eq!(fingerprint(&[b"x"]), fingerprint(&[b"x"]));
    }
}
