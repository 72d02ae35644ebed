//! Dataset manifest: CSV with header
//! `app_id,apk,trace,pcap,api_log,callgraph,label` and an optional
//! `package` column used to pick the app's processes out of strace logs.
//! Relative paths resolve against the manifest's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use droidlens::{AppId, Label};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub app_id: AppId,
    pub apk: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub pcap: Option<PathBuf>,
    pub api_log: Option<PathBuf>,
    pub callgraph: Option<PathBuf>,
    pub package: Option<String>,
    pub label: Label,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    app_id: String,
    #[serde(default)]
    apk: String,
    #[serde(default)]
    trace: String,
    #[serde(default)]
    pcap: String,
    #[serde(default)]
    api_log: String,
    #[serde(default)]
    callgraph: String,
    #[serde(default)]
    package: String,
    label: String,
}

pub const HEADER: [&str; 8] = [
    "app_id",
    "apk",
    "trace",
    "pcap",
    "api_log",
    "callgraph",
    "label",
    "package",
];

fn bad(line: usize, reason: impl Into<String>) -> CliError {
    CliError::Manifest {
        line,
        reason: reason.into(),
    }
}

/// Reads and validates a manifest; all problems are reported before any
/// work starts.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestRow>, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| bad(0, format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base)
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestRow>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for rec in reader.deserialize::<RawRow>() {
        let raw = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            bad(line, e.to_string())
        })?;
        let line = rows.len() + 2;
        let app_id: AppId = raw
            .app_id
            .parse()
            .map_err(|_| bad(line, format!("invalid app id `{}`", raw.app_id)))?;
        if !seen.insert(app_id.clone()) {
            return Err(bad(line, format!("duplicate app id {app_id}")));
        }
        let label: Label = raw
            .label
            .parse()
            .map_err(|_| bad(line, format!("invalid label `{}`", raw.label)))?;
        let resolve = |s: &str| -> Result<Option<PathBuf>, CliError> {
            if s.is_empty() {
                return Ok(None);
            }
            let p = base.join(s);
            if !p.is_file() {
                return Err(bad(line, format!("missing file {}", p.display())));
            }
            Ok(Some(p))
        };
        let row = ManifestRow {
            app_id,
            apk: resolve(&raw.apk)?,
            trace: resolve(&raw.trace)?,
            pcap: resolve(&raw.pcap)?,
            api_log: resolve(&raw.api_log)?,
            callgraph: resolve(&raw.callgraph)?,
            package: Some(raw.package).filter(|p| !p.is_empty()),
            label,
        };
        if row.apk.is_none()
            && row.trace.is_none()
            && row.pcap.is_none()
            && row.api_log.is_none()
            && row.callgraph.is_none()
        {
            return Err(bad(line, "row names no artifact"));
        }
        rows.push(row);
    }
    Ok(rows)
}
