//! Static extraction from APK containers.

pub mod axml;
pub mod callgraph;
pub mod dex;
pub mod method;
pub mod opcodes;
pub mod patterns;
pub mod zip;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use once_cell::sync::Lazy;
use regex::Regex;
use thiserror::Error;

use crate::report::{AppId, FeatureKind, FeatureRecord, FeatureReport, Source};
use dex::DexFile;
use method::{MethodRef, PlatformPrefixes};
use patterns::ApiPattern;
use zip::{Archive, ZipError};

pub use callgraph::{load_call_graph, CallGraph, CallGraphError};

#[derive(Debug, Error)]
pub enum ApkError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a zip container: {0}")]
    NotAZip(String),
    #[error("corrupt container entry {name:?} at offset {offset}: {reason}")]
    CorruptEntry {
        name: String,
        offset: usize,
        reason: String,
    },
    #[error("AndroidManifest.xml is missing")]
    MissingManifest,
    #[error("malformed manifest at offset {offset}")]
    MalformedManifest { offset: usize },
    #[error("malformed dex {file} at offset {offset}")]
    MalformedDex { file: String, offset: usize },
}

impl From<ZipError> for ApkError {
    fn from(e: ZipError) -> Self {
        match e {
            ZipError::NotAZip(r) => ApkError::NotAZip(r),
            ZipError::CorruptEntry {
                name,
                offset,
                reason,
            } => ApkError::CorruptEntry {
                name,
                offset,
                reason,
            },
        }
    }
}

pub const MANIFEST: &str = "AndroidManifest.xml";

/// Multidex position of an entry name: `classes.dex` is 1, `classesN.dex`
/// is N for N >= 2. Anything else is not a dex entry.
pub fn dex_index(name: &str) -> Option<u32> {
    let mid = name.strip_prefix("classes")?.strip_suffix(".dex")?;
    if mid.is_empty() {
        return Some(1);
    }
    if mid.starts_with('0') || !mid.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    mid.parse().ok().filter(|&n| n >= 2)
}

pub fn parse_apk(path: &Path) -> Result<FeatureReport, ApkError> {
    let bytes = std::fs::read(path).map_err(|source| ApkError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_apk_bytes(&bytes, &PlatformPrefixes::default())
}

pub fn parse_apk_bytes(
    bytes: &[u8],
    prefixes: &PlatformPrefixes,
) -> Result<FeatureReport, ApkError> {
    let archive = Archive::parse(bytes)?;
    let manifest_entry = archive.find(MANIFEST).ok_or(ApkError::MissingManifest)?;
    let manifest_bytes = archive.read(manifest_entry)?;
    let manifest = axml::parse_axml(&manifest_bytes)
        .map_err(|e| ApkError::MalformedManifest { offset: e.offset })?;

    let mut dex_entries: Vec<(u32, &zip::Entry)> = archive
        .entries()
        .iter()
        .filter_map(|e| dex_index(&e.name).map(|i| (i, e)))
        .collect();
    dex_entries.sort_by_key(|(i, _)| *i);
    let mut dexes = Vec::with_capacity(dex_entries.len());
    for (_, entry) in dex_entries {
        let data = archive.read(entry)?;
        let dex = DexFile::parse(&data).map_err(|e| ApkError::MalformedDex {
            file: entry.name.clone(),
            offset: e.offset,
        })?;
        dexes.push(dex);
    }

    let mut report = FeatureReport::new(AppId::of_bytes(bytes), Source::Static);
    let mut add = |kind, value: &str| {
        if let Ok(r) = FeatureRecord::new(kind, value) {
            report.insert(r);
        }
    };
    for p in &manifest.permissions {
        add(FeatureKind::RequestedPermission, p);
    }
    for c in &manifest.components {
        add(FeatureKind::AppComponent, c);
    }
    for i in &manifest.intent_filters {
        add(FeatureKind::FilteredIntent, i);
    }
    for h in &manifest.hardware_features {
        add(FeatureKind::HardwareComponent, h);
    }
    for dex in &dexes {
        for m in extract_api_calls(dex, prefixes) {
            add(FeatureKind::ApiCall, &m.to_string());
        }
        for a in extract_network_addresses(&dex.strings) {
            add(FeatureKind::NetworkAddress, &a);
        }
    }
    for dex in &dexes {
        for code in &dex.code {
            report.methods.push(code.opcodes.clone());
        }
        for (m, n) in api_call_counts(dex, prefixes) {
            *report.api_counts.entry(m.to_string()).or_insert(0) += n;
        }
    }
    Ok(report)
}

/// Platform methods targeted by any invoke instruction.
pub fn extract_api_calls(dex: &DexFile, prefixes: &PlatformPrefixes) -> BTreeSet<MethodRef> {
    api_call_counts(dex, prefixes).into_keys().collect()
}

/// Invoke-site counts per platform method.
pub fn api_call_counts(dex: &DexFile, prefixes: &PlatformPrefixes) -> BTreeMap<MethodRef, u64> {
    let mut out = BTreeMap::new();
    for code in &dex.code {
        for &idx in &code.invokes {
            let m = &dex.methods[idx as usize];
            if m.is_platform(prefixes) {
                *out.entry(m.clone()).or_insert(0) += 1;
            }
        }
    }
    out
}

static URL_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^https?://[A-Za-z0-9._~%-]+(?::\d{1,5})?(?:[/?#]\S*)?$").unwrap());
static IPV4_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^(\d{1,3})\.(\d{1,3})\.(\d{1,3})\.(\d{1,3})$").unwrap());

pub fn is_network_address(s: &str) -> bool {
    if URL_RE.is_match(s) {
        return true;
    }
    match IPV4_RE.captures(s) {
        Some(c) => (1..=4).all(|i| c[i].parse::<u16>().is_ok_and(|o| o <= 255)),
        None => false,
    }
}

pub fn extract_network_addresses<S: AsRef<str>>(strings: &[S]) -> BTreeSet<String> {
    strings
        .iter()
        .map(AsRef::as_ref)
        .filter(|s| is_network_address(s))
        .map(str::to_string)
        .collect()
}

fn api_calls_of(report: &FeatureReport) -> Vec<MethodRef> {
    report
        .values_of(FeatureKind::ApiCall)
        .filter_map(|v| v.parse().ok())
        .collect()
}

/// Adds a RestrictedApiCall / SuspiciousApiCall record for each pattern
/// matched by at least one ApiCall record. The record value is the pattern.
pub fn match_api_lists(
    report: &FeatureReport,
    restricted: &[ApiPattern],
    suspicious: &[ApiPattern],
) -> FeatureReport {
    let calls = api_calls_of(report);
    let mut out = report.clone();
    for (kind, list) in [
        (FeatureKind::RestrictedApiCall, restricted),
        (FeatureKind::SuspiciousApiCall, suspicious),
    ] {
        for p in list {
            if calls.iter().any(|m| p.matches(m)) {
                if let Ok(r) = FeatureRecord::new(kind, p.to_string()) {
                    out.insert(r);
                }
            }
        }
    }
    out
}

pub fn derive_used_permissions(
    report: &FeatureReport,
    map: &[(ApiPattern, String)],
) -> FeatureReport {
    let calls = api_calls_of(report);
    let mut out = report.clone();
    for (p, perm) in map {
        if report.contains(FeatureKind::RequestedPermission, perm)
            && calls.iter().any(|m| p.matches(m))
        {
            if let Ok(r) = FeatureRecord::new(FeatureKind::UsedPermission, perm.clone()) {
                out.insert(r);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dex_entry_order() {
        assert_eq!(dex_index("classes.dex"), Some(1));
        assert_eq!(dex_index("classes2.dex"), Some(2));
        assert_eq!(dex_index("classes10.dex"), Some(10));
        assert_eq!(dex_index("classes1.dex"), None);
        assert_eq!(dex_index("classes02.dex"), None);
        assert_eq!(dex_index("lib/classes.dex"), None);
    }

    #[test]
    fn network_addresses() {
        let pool = [
            "https://example.com/a",
            "http://10.0.0.1:8080/x?y=1",
            "999.1.1.1",
            "192.168.1.255",
            "example.com",
            "ftp://example.com",
            "https://",
            "see https://example.com",
        ];
        let got = extract_network_addresses(&pool);
        let want: BTreeSet<String> = [
            "https://example.com/a",
            "http://10.0.0.1:8080/x?y=1",
            "192.168.1.255",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        assert_eq!(got, want);
        assert!(extract_network_addresses::<&str>(&[]).is_empty());
    }

    fn report_with(records: &[(FeatureKind, &str)]) -> FeatureReport {
        let mut r = FeatureReport::new(AppId::of_bytes(b"x"), Source::Static);
        for (k, v) in records {
            r.insert(FeatureRecord::new(*k, *v).unwrap());
        }
        r
    }

    #[test]
    fn suspicious_match_and_idempotence() {
        let r = report_with(&[(
            FeatureKind::ApiCall,
            "android.telephony.SmsManager.sendTextMessage(Ljava/lang/String;Ljava/lang/String;Ljava/lang/String;Landroid/app/PendingIntent;Landroid/app/PendingIntent;)V",
        )]);
        let sus = patterns::parse_pattern_file(patterns::SAMPLE_SUSPICIOUS).unwrap();
        let once = match_api_lists(&r, &[], &sus);
        assert!(once.contains(
            FeatureKind::SuspiciousApiCall,
            "android.telephony.SmsManager.sendTextMessage"
        ));
        assert_eq!(match_api_lists(&once, &[], &sus), once);
        assert_eq!(match_api_lists(&r, &[], &[]), r);
    }

    #[test]
    fn used_permissions_need_both() {
        let map = patterns::parse_permission_map(patterns::SAMPLE_PERMISSION_MAP).unwrap();
        let api = (
            FeatureKind::ApiCall,
            "android.net.ConnectivityManager.getActiveNetworkInfo()Landroid/net/NetworkInfo;",
        );
        let perm = (
            FeatureKind::RequestedPermission,
            "android.permission.ACCESS_NETWORK_STATE",
        );
        let both = derive_used_permissions(&report_with(&[api, perm]), &map);
        assert!(both.contains(
            FeatureKind::UsedPermission,
            "android.permission.ACCESS_NETWORK_STATE"
        ));
        let only_api = derive_used_permissions(&report_with(&[api]), &map);
        assert_eq!(only_api.values_of(FeatureKind::UsedPermission).count(), 0);
        let empty = derive_used_permissions(&report_with(&[api, perm]), &[]);
        assert_eq!(empty.values_of(FeatureKind::UsedPermission).count(), 0);
    }
}
