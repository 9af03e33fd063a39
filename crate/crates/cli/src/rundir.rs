use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::Command;

pub const SUBDIRS: [&str; 5] = ["suites", "mutants", "traces", "reports", "transcripts"];

/// Everything needed to replay a run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub tool: String,
    pub version: String,
    pub command: Command,
    /// SHA-256 of every file or bundled source the command reads.
    pub inputs: BTreeMap<String, String>,
    pub hash: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunConfig {
    pub fn new(command: Command, inputs: BTreeMap<String, Vec<u8>>) -> Self {
        let inputs: BTreeMap<String, String> = inputs.into_iter().map(|(k, v)| (k, sha256_hex(&v))).collect();
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&command).expect("commands serialize"));
        for (k, v) in &inputs {
            hasher.update(k.as_bytes());
            hasher.update(v.as_bytes());
        }
        let hash = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        RunConfig { tool: "bvmt".into(), version: env!("CARGO_PKG_VERSION").into(), command, inputs, hash }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = if path.is_dir() { path.join("config.json") } else { path.to_path_buf() };
        let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))
    }
}

pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// `exact` if given, else `<root>/<timestamp>-<hash prefix>`.
    pub fn create(root: &Path, exact: Option<&Path>, config: &RunConfig) -> Result<Self> {
        let path = match exact {
            Some(p) => p.to_path_buf(),
            None => {
                let stem = format!("{}-{}", chrono::Local::now().format("%Y%m%dT%H%M%S"), &config.hash[..12]);
                let mut path = root.join(&stem);
                let mut k = 2;
                while path.exists() {
                    path = root.join(format!("{stem}-{k}"));
                    k += 1;
                }
                path
            }
        };
        for sub in SUBDIRS {
            fs::create_dir_all(path.join(sub)).with_context(|| format!("creating {}", path.join(sub).display()))?;
        }
        let dir = RunDir { path };
        dir.write("config.json", &(serde_json::to_string_pretty(config)? + "\n"))?;
        Ok(dir)
    }

    pub fn write(&self, rel: &str, content: &str) -> Result<PathBuf> {
        let p = self.path.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&p, content).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }
}
