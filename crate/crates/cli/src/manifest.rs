//! Run manifest: configuration echo, digests, seed, versions and
//! timings. Timings are volatile and live only here, so every other
//! artifact of a run is byte-stable for a fixed config and seed.

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub task: String,
    pub seed: u64,
    pub config_digest: String,
    pub thread_cap: Option<usize>,
    pub status: String,
    pub exit_code: i32,
    pub artifacts: Vec<String>,
    /// the parsed configuration with all defaults filled in
    pub effective_config: RunConfig,
    /// wall-clock timings; excluded from reproducibility guarantees
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(cfg: &RunConfig, seed: u64, thread_cap: Option<usize>) -> Self {
        Self {
            tool: "convopt",
            version: env!("CARGO_PKG_VERSION"),
            task: cfg.task_name().to_string(),
            seed,
            config_digest: config_digest(cfg),
            thread_cap,
            status: String::new(),
            exit_code: 0,
            artifacts: Vec::new(),
            effective_config: cfg.clone(),
            timings_ms: BTreeMap::new(),
        }
    }
}

/// SHA-256 of the canonical (compact, defaults-filled) config encoding.
pub fn config_digest(cfg: &RunConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    let hash = Sha256::digest(canonical.as_bytes());
    let mut out = String::with_capacity(64);
    for b in hash {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
