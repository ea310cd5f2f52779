//! Run metadata attached to every result.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable read for the worker-thread cap.
pub const THREADS_ENV: &str = "WEILKIT_THREADS";

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Everything that determines a run's output, plus the wall time.
///
/// The wall time is the only nondeterministic field and is left out of the
/// copy embedded in results.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            inputs: Vec::new(),
            seed,
            tolerances: BTreeMap::new(),
            version: VERSION.to_string(),
            threads: std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()),
            wall_time_ms: None,
        }
    }

    pub fn tolerance(&mut self, name: &str, value: f64) {
        self.tolerances.insert(name.to_string(), value);
    }

    /// Reads and parses a JSON input file, recording its digest.
    pub fn read_json(&mut self, role: &str, path: &Path) -> CliResult<Value> {
        let bytes = std::fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        self.inputs.push(InputDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        serde_json::from_slice(&bytes).map_err(|source| CliError::Json { path: path.display().to_string(), source })
    }

    /// The deterministic part, as embedded in result documents.
    pub fn deterministic(&self) -> Value {
        let mut m = self.clone();
        m.wall_time_ms = None;
        m.threads = None;
        serde_json::to_value(m).expect("manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        std::fs::write(&p, b"{}").unwrap();
        let mut m = RunManifest::new("algebra", 0);
        m.read_json("spec", &p).unwrap();
        assert_eq!(m.inputs[0].sha256, "44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a");
    }

    #[test]
    fn wall_time_is_not_embedded() {
        let mut m = RunManifest::new("betti", 7);
        m.wall_time_ms = Some(12);
        let v = m.deterministic();
        assert!(v.get("wall_time_ms").is_none());
        assert_eq!(v["seed"], 7);
    }
}
