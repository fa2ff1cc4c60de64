use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

/// Per-directory record of what was produced, by which command, and how long it took.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub software_version: String,
    #[serde(default)]
    pub config: Option<serde_json::Value>,
    /// Keyed by path relative to the run directory.
    #[serde(default)]
    pub artifacts: BTreeMap<String, Artifact>,
    /// Wall-clock seconds per command.
    #[serde(default)]
    pub timings: BTreeMap<String, f64>,
    /// Sub-directories of a sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Artifact {
    pub sha256: String,
    pub bytes: u64,
    pub command: String,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let mut f = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        total += n as u64;
    }
    Ok((hex::encode(hasher.finalize()), total))
}

impl RunManifest {
    pub fn exists(dir: &Path) -> bool {
        dir.join(MANIFEST).is_file()
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let f = File::open(&path).with_context(|| format!("no run manifest at {}", path.display()))?;
        serde_json::from_reader(BufReader::new(f)).with_context(|| format!("malformed manifest {}", path.display()))
    }

    pub fn load_or_new(dir: &Path) -> Result<Self> {
        if Self::exists(dir) {
            Self::load(dir)
        } else {
            Ok(Self {
                software_version: env!("CARGO_PKG_VERSION").to_string(),
                ..Self::default()
            })
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join(MANIFEST), text + "\n")?;
        Ok(())
    }

    /// Hashes `files` (relative to `dir`) and records them under `command`.
    pub fn record(&mut self, dir: &Path, command: &str, files: &[String], seconds: f64) -> Result<()> {
        for f in files {
            let (sha256, bytes) = sha256_file(&dir.join(f))?;
            self.artifacts.insert(
                f.clone(),
                Artifact {
                    sha256,
                    bytes,
                    command: command.to_string(),
                },
            );
        }
        self.timings.insert(command.to_string(), seconds);
        self.software_version = env!("CARGO_PKG_VERSION").to_string();
        Ok(())
    }

    /// Re-hashes every listed artifact.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for (name, a) in &self.artifacts {
            let path = dir.join(name);
            if !path.is_file() {
                bail!("integrity error: {} is listed in the manifest but missing", path.display());
            }
            let (sha, bytes) = sha256_file(&path)?;
            if sha != a.sha256 || bytes != a.bytes {
                bail!(
                    "integrity error: {} does not match its manifest hash (expected {}, found {})",
                    path.display(),
                    a.sha256,
                    sha
                );
            }
        }
        Ok(())
    }
}

/// Fails if any of `files` already exists in `dir` and overwriting was not requested.
pub fn guard(dir: &Path, files: &[String], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    if let Some(f) = files.iter().find(|f| dir.join(f).exists()) {
        bail!("{} already exists; pass --force to overwrite", dir.join(f).display());
    }
    Ok(())
}
