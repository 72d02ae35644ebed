//! Dynamic-analysis artifacts: system-call traces, packet captures and
//! runtime API-call logs.

pub mod flows;
pub mod pcap;
pub mod strace;

use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::apk::method::MethodRef;
use crate::report::{AppId, FeatureKind, FeatureRecord, FeatureReport, Source};

pub use flows::{HttpRequestFeatures, TcpFlowFeatures};
pub use strace::{SyscallTrace, TargetFilter};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("cannot read {0}")]
    Io(String),
    #[error("line {line}: not a recognized strace line")]
    MalformedTraceLine { line: usize },
    #[error("malformed pcap at offset {offset}")]
    MalformedPcap { offset: usize },
    #[error("capture contains no TCP packets")]
    EmptyCapture,
    #[error("line {line}: not a method reference")]
    MalformedLogLine { line: usize },
}

fn read(path: &Path) -> Result<Vec<u8>, TraceError> {
    std::fs::read(path).map_err(|e| TraceError::Io(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, TraceError> {
    String::from_utf8(read(path)?)
        .map_err(|_| TraceError::Io(format!("{}: not UTF-8", path.display())))
}

pub fn parse_strace(
    path: &Path,
    app_id: AppId,
    filter: &TargetFilter,
) -> Result<SyscallTrace, TraceError> {
    strace::parse_strace_text(&read_text(path)?, app_id, filter)
}

pub fn extract_tcp_features(path: &Path) -> Result<TcpFlowFeatures, TraceError> {
    flows::tcp_features(&pcap::read_pcap(&read(path)?)?, None)
}

pub fn extract_http_features(path: &Path) -> Result<Vec<HttpRequestFeatures>, TraceError> {
    Ok(flows::http_features(&pcap::read_pcap(&read(path)?)?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicApiLog {
    pub app_id: AppId,
    pub calls: Vec<MethodRef>,
}

impl DynamicApiLog {
    pub fn to_report(&self) -> FeatureReport {
        let mut r = FeatureReport::new(self.app_id.clone(), Source::Dynamic);
        for m in &self.calls {
            let s = m.to_string();
            if let Ok(rec) = FeatureRecord::new(FeatureKind::DynamicApiCall, s.clone()) {
                r.insert(rec);
            }
            *r.api_counts.entry(s).or_insert(0) += 1;
        }
        r
    }
}

/// One `class.method(params)ret` per line; blank lines are ignored.
pub fn parse_api_log_text(text: &str, app_id: AppId) -> Result<DynamicApiLog, TraceError> {
    let calls = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|_| TraceError::MalformedLogLine { line: i + 1 })
        })
        .collect::<Result<_, _>>()?;
    Ok(DynamicApiLog { app_id, calls })
}

pub fn parse_api_log(path: &Path, app_id: AppId) -> Result<DynamicApiLog, TraceError> {
    parse_api_log_text(&read_text(path)?, app_id)
}

/// Logcat dumps are kept for provenance only.
pub fn logcat_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
