//! Provenance sidecars: every artifact `X` gets an `X.meta.json` carrying the
//! config fingerprint (seed, sizes, input content hashes, tool version), so a
//! result can always be traced back to exactly what produced it.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct Fingerprint {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub k: usize,
    pub n_pairs: Option<usize>,
    pub top_k: Option<usize>,
    /// role -> sha256 of the input file bytes.
    pub inputs: BTreeMap<String, String>,
}

impl Fingerprint {
    pub fn new(command: &'static str, seed: u64, k: usize) -> Self {
        Fingerprint {
            tool: "skillmatch",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            k,
            n_pairs: None,
            top_k: None,
            inputs: BTreeMap::new(),
        }
    }

    pub fn with_input(mut self, role: &str, path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .with_context(|| format!("cannot read {} ({})", path.display(), role))?;
        self.inputs
            .insert(role.to_string(), format!("sha256:{}", sha256_hex(&bytes)));
        Ok(self)
    }

    /// Writes `<artifact>.meta.json` next to the artifact.
    pub fn write_for(&self, artifact: &Path) -> Result<()> {
        let meta_path = sidecar_path(artifact);
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&meta_path, json + "\n")
            .with_context(|| format!("cannot write {}", meta_path.display()))
    }
}

pub fn sidecar_path(artifact: &Path) -> std::path::PathBuf {
    let mut name = artifact
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(".meta.json");
    artifact.with_file_name(name)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
