//! Persisted artifacts with `<name>.meta.json` provenance sidecars.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub artifact: String,
    pub stage: String,
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    /// Upstream artifact name to its fingerprint.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of the artifact bytes.
    pub fingerprint: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".meta.json");
    path.with_file_name(name)
}

pub fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Failed(anyhow::anyhow!("{}: {e}", path.display()))
}

/// Writes through a temporary file so readers never see partial output.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub struct Stage<'a> {
    pub name: &'a str,
    pub seed: u64,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
}

impl Stage<'_> {
    pub fn write(&self, path: &Path, bytes: &[u8]) -> Result<Provenance, CliError> {
        let prov = Provenance {
            artifact: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            stage: self.name.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            seed: self.seed,
            config_hash: self.config_hash.clone(),
            inputs: self.inputs.clone(),
            fingerprint: sha256_hex(bytes),
        };
        write_file(path, bytes)?;
        let meta = serde_json::to_string_pretty(&prov).expect("provenance serializes") + "\n";
        write_file(&meta_path(path), meta.as_bytes())?;
        Ok(prov)
    }
}

fn mismatch(path: &Path, reason: impl Into<String>) -> CliError {
    CliError::FingerprintMismatch {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Reads an artifact and checks it against its sidecar.
pub fn read_artifact(path: &Path) -> Result<(Vec<u8>, Provenance), CliError> {
    let meta = std::fs::read_to_string(meta_path(path))
        .map_err(|_| mismatch(path, "missing provenance"))?;
    let prov: Provenance =
        serde_json::from_str(&meta).map_err(|_| mismatch(path, "unreadable provenance"))?;
    let bytes = std::fs::read(path).map_err(|_| mismatch(path, "missing artifact"))?;
    if sha256_hex(&bytes) != prov.fingerprint {
        return Err(mismatch(
            path,
            "content does not match its recorded fingerprint",
        ));
    }
    Ok((bytes, prov))
}

pub fn read_artifact_text(path: &Path) -> Result<(String, Provenance), CliError> {
    let (bytes, prov) = read_artifact(path)?;
    let text = String::from_utf8(bytes).map_err(|_| mismatch(path, "not UTF-8"))?;
    Ok((text, prov))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        let stage = Stage {
            name: "t",
            seed: 1,
            config_hash: "h".into(),
            inputs: BTreeMap::new(),
        };
        stage.write(&p, b"abc").unwrap();
        assert_eq!(read_artifact(&p).unwrap().0, b"abc");
        std::fs::write(&p, b"abd").unwrap();
        assert!(matches!(
            read_artifact(&p),
            Err(CliError::FingerprintMismatch { .. })
        ));
        assert!(matches!(
            read_artifact(&dir.path().join("none")),
            Err(CliError::FingerprintMismatch { .. })
        ));
    }
}
