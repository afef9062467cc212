//! Output manifests with SHA-256 checksums.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{DemonError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = concat!("demon-sim ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    /// `run`, a figure name, or `oracle-check`.
    pub kind: String,
    pub inputs: serde_json::Value,
    pub outputs: Vec<OutputEntry>,
    /// Headline numbers of the pipeline, for quick inspection.
    #[serde(default)]
    pub summary: serde_json::Value,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| DemonError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Manifest {
    /// Checksums `files` (inside `dir`) and writes `dir/manifest.json`.
    pub fn write(
        dir: &Path,
        kind: &str,
        inputs: serde_json::Value,
        summary: serde_json::Value,
        files: &[PathBuf],
    ) -> Result<Manifest> {
        let mut outputs = files
            .iter()
            .map(|f| {
                let rel = f.strip_prefix(dir).unwrap_or(f);
                Ok(OutputEntry {
                    path: rel.to_string_lossy().replace('\\', "/"),
                    sha256: sha256_file(f)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            kind: kind.to_string(),
            inputs,
            outputs,
            summary,
        };
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| DemonError::io(&path, e))?;
        Ok(manifest)
    }

    pub fn read(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| DemonError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| DemonError::Format {
            path,
            message: e.to_string(),
        })
    }
}

/// Re-hashes every listed output in `dir` against its manifest.
pub fn verify_manifest(dir: &Path) -> Result<Manifest> {
    let manifest = Manifest::read(dir)?;
    for entry in &manifest.outputs {
        let path = dir.join(&entry.path);
        if sha256_file(&path)? != entry.sha256 {
            return Err(DemonError::Checksum(path));
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("a.csv");
        std::fs::write(&f, "m,p\n0,1e0\n").unwrap();
        let m = Manifest::write(
            dir.path(),
            "run",
            serde_json::json!({"x": 1}),
            serde_json::Value::Null,
            std::slice::from_ref(&f),
        )
        .unwrap();
        assert_eq!(m.outputs[0].path, "a.csv");
        assert_eq!(
            m.outputs[0].sha256,
            hex::encode(Sha256::digest(b"m,p\n0,1e0\n"))
        );
        assert_eq!(verify_manifest(dir.path()).unwrap(), m);
        std::fs::write(&f, "m,p\n0,2e0\n").unwrap();
        assert!(matches!(
            verify_manifest(dir.path()),
            Err(DemonError::Checksum(_))
        ));
        std::fs::remove_file(&f).unwrap();
        assert!(matches!(
            verify_manifest(dir.path()),
            Err(DemonError::Io { .. })
        ));
    }
}
