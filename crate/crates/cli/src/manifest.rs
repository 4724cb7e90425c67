use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;
use log::info;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::io::write_json;

/// Audit record written for every command.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    /// SHA-256 of every input file, by path.
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub artifacts: Vec<String>,
    pub wall_clock_secs: f64,
    pub version: String,
}

pub struct Context {
    path: Option<PathBuf>,
    started: Instant,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Context {
    pub fn new(path: Option<PathBuf>) -> Self {
        Self {
            path,
            started: Instant::now(),
        }
    }

    /// Write the manifest to `--manifest`, else `default`, else the log.
    pub fn finish(
        self,
        command: &str,
        config: serde_json::Value,
        inputs: &[&Path],
        seed: Option<u64>,
        artifacts: &[&Path],
        default: Option<PathBuf>,
    ) -> Result<()> {
        let mut digests = BTreeMap::new();
        for p in inputs {
            digests.insert(p.display().to_string(), sha256_file(p)?);
        }
        let manifest = RunManifest {
            command: command.to_string(),
            config,
            inputs: digests,
            seed,
            artifacts: artifacts.iter().map(|p| p.display().to_string()).collect(),
            wall_clock_secs: self.started.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        match self.path.or(default) {
            Some(p) => write_json(&p, &manifest),
            None => {
                info!("manifest: {}", serde_json::to_string(&manifest)?);
                Ok(())
            }
        }
    }
}

/// `<file>.manifest.json` beside a file output.
pub fn beside(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
