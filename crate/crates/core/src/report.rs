//! Per-application feature records and their on-disk line format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::apk::opcodes::Opcode;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("line {line}: malformed feature record")]
    MalformedLine { line: usize },
    #[error("line {line}: unknown feature kind `{kind}`")]
    UnknownKind { line: usize, kind: String },
    #[error("line {line}: unknown opcode mnemonic `{mnemonic}`")]
    UnknownMnemonic { line: usize, mnemonic: String },
    #[error("invalid feature value {0:?}")]
    InvalidValue(String),
    #[error("invalid app id {0:?}: expected 64 lowercase hex digits")]
    InvalidAppId(String),
}

/// Kind tag of a feature record. The `Display` form is the prefix used in
/// `.features` files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    HardwareComponent,
    RequestedPermission,
    AppComponent,
    FilteredIntent,
    UsedPermission,
    NetworkAddress,
    ApiCall,
    RestrictedApiCall,
    SuspiciousApiCall,
    SyscallName,
    DynamicApiCall,
    HttpHost,
    HttpRequestUri,
    HttpMethod,
    HttpUserAgent,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 15] = [
        FeatureKind::HardwareComponent,
        FeatureKind::RequestedPermission,
        FeatureKind::AppComponent,
        FeatureKind::FilteredIntent,
        FeatureKind::UsedPermission,
        FeatureKind::NetworkAddress,
        FeatureKind::ApiCall,
        FeatureKind::RestrictedApiCall,
        FeatureKind::SuspiciousApiCall,
        FeatureKind::SyscallName,
        FeatureKind::DynamicApiCall,
        FeatureKind::HttpHost,
        FeatureKind::HttpRequestUri,
        FeatureKind::HttpMethod,
        FeatureKind::HttpUserAgent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::HardwareComponent => "HardwareComponent",
            FeatureKind::RequestedPermission => "RequestedPermission",
            FeatureKind::AppComponent => "AppComponent",
            FeatureKind::FilteredIntent => "FilteredIntent",
            FeatureKind::UsedPermission => "UsedPermission",
            FeatureKind::NetworkAddress => "NetworkAddress",
            FeatureKind::ApiCall => "ApiCall",
            FeatureKind::RestrictedApiCall => "RestrictedApiCall",
            FeatureKind::SuspiciousApiCall => "SuspiciousApiCall",
            FeatureKind::SyscallName => "SyscallName",
            FeatureKind::DynamicApiCall => "DynamicApiCall",
            FeatureKind::HttpHost => "HttpHost",
            FeatureKind::HttpRequestUri => "HttpRequestUri",
            FeatureKind::HttpMethod => "HttpMethod",
            FeatureKind::HttpUserAgent => "HttpUserAgent",
        }
    }

    pub fn is_static(self) -> bool {
        !matches!(
            self,
            FeatureKind::SyscallName
                | FeatureKind::DynamicApiCall
                | FeatureKind::HttpHost
                | FeatureKind::HttpRequestUri
                | FeatureKind::HttpMethod
                | FeatureKind::HttpUserAgent
        )
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureRecord {
    kind: FeatureKind,
    value: String,
}

impl FeatureRecord {
    pub fn new(kind: FeatureKind, value: impl Into<String>) -> Result<Self, ReportError> {
        let value = value.into();
        if value.is_empty() || value.contains('\n') || value.contains('\r') {
            return Err(ReportError::InvalidValue(value));
        }
        Ok(FeatureRecord { kind, value })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn value(&self) -> &str {
        &self.value
    }

    /// `Kind::value`, the key used for vocabularies and report files.
    pub fn line(&self) -> String {
        format!("{}::{}", self.kind, self.value)
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, ReportError> {
        let (kind, value) = line
            .split_once("::")
            .ok_or(ReportError::MalformedLine { line: line_no })?;
        let kind = kind
            .parse::<FeatureKind>()
            .map_err(|kind| ReportError::UnknownKind {
                line: line_no,
                kind,
            })?;
        FeatureRecord::new(kind, value).map_err(|_| ReportError::MalformedLine { line: line_no })
    }
}

impl fmt::Display for FeatureRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}::{}", self.kind, self.value)
    }
}

/// Lowercase hex SHA-256 digest identifying an application.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AppId(String);

impl AppId {
    pub const LEN: usize = 64;

    pub fn of_bytes(bytes: &[u8]) -> AppId {
        AppId(hex::encode(Sha256::digest(bytes)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for AppId {
    type Error = ReportError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        if s.len() == Self::LEN && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            Ok(AppId(s))
        } else {
            Err(ReportError::InvalidAppId(s))
        }
    }
}

impl FromStr for AppId {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AppId::try_from(s.to_string())
    }
}

impl From<AppId> for String {
    fn from(id: AppId) -> String {
        id.0
    }
}

impl fmt::Display for AppId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Static,
    Dynamic,
    Hybrid,
}

/// Everything extracted from one application.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureReport {
    pub app_id: AppId,
    pub source: Source,
    pub records: BTreeSet<FeatureRecord>,
    /// Opcodes of each method with code, in dex declaration order.
    pub methods: Vec<Vec<Opcode>>,
    /// Invocation counts per platform API (canonical method string).
    pub api_counts: BTreeMap<String, u64>,
}

impl FeatureReport {
    pub fn new(app_id: AppId, source: Source) -> Self {
        FeatureReport {
            app_id,
            source,
            records: BTreeSet::new(),
            methods: Vec::new(),
            api_counts: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, record: FeatureRecord) -> bool {
        self.records.insert(record)
    }

    pub fn values_of(&self, kind: FeatureKind) -> impl Iterator<Item = &str> {
        self.records
            .iter()
            .filter(move |r| r.kind == kind)
            .map(|r| r.value.as_str())
    }

    pub fn contains(&self, kind: FeatureKind, value: &str) -> bool {
        self.records
            .iter()
            .any(|r| r.kind == kind && r.value == value)
    }

    /// Flattened opcode sequence over all methods.
    pub fn opcode_sequence(&self) -> Vec<Opcode> {
        self.methods.iter().flatten().copied().collect()
    }

    /// Body of the `.features` file: one `Kind::value` line per record,
    /// sorted lexicographically.
    pub fn features_text(&self) -> String {
        let mut lines: Vec<String> = self.records.iter().map(FeatureRecord::line).collect();
        lines.sort();
        let mut out = String::new();
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }

    pub fn parse_features(text: &str) -> Result<BTreeSet<FeatureRecord>, ReportError> {
        let mut records = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            records.insert(FeatureRecord::parse_line(line, i + 1)?);
        }
        Ok(records)
    }

    /// Body of the `.opcodes` file: one line of space-separated mnemonics per
    /// method.
    pub fn opcodes_text(&self) -> String {
        let mut out = String::new();
        for m in &self.methods {
            let line: Vec<&str> = m.iter().map(|op| op.mnemonic()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse_opcodes(text: &str) -> Result<Vec<Vec<Opcode>>, ReportError> {
        text.lines()
            .enumerate()
            .map(|(i, line)| {
                line.split_whitespace()
                    .map(|m| {
                        Opcode::from_mnemonic(m).ok_or_else(|| ReportError::UnknownMnemonic {
                            line: i + 1,
                            mnemonic: m.to_string(),
                        })
                    })
                    .collect()
            })
            .collect()
    }

    /// Body of the `.apicounts` file: `count<TAB>method` lines sorted by method.
    pub fn api_counts_text(&self) -> String {
        let mut out = String::new();
        for (api, n) in &self.api_counts {
            out.push_str(&format!("{n}\t{api}\n"));
        }
        out
    }

    pub fn parse_api_counts(text: &str) -> Result<BTreeMap<String, u64>, ReportError> {
        let mut counts = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (n, api) = line
                .split_once('\t')
                .ok_or(ReportError::MalformedLine { line: i + 1 })?;
            let n: u64 = n
                .parse()
                .map_err(|_| ReportError::MalformedLine { line: i + 1 })?;
            counts.insert(api.to_string(), n);
        }
        Ok(counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id() -> AppId {
        AppId::of_bytes(b"x")
    }

    #[test]
    fn record_line_form() {
        let r = FeatureRecord::new(
            FeatureKind::RequestedPermission,
            "android.permission.ACCESS_NETWORK_STATE",
        )
        .unwrap();
        assert_eq!(
            r.line(),
            "RequestedPermission::android.permission.ACCESS_NETWORK_STATE"
        );
        assert_eq!(FeatureRecord::parse_line(&r.line(), 1).unwrap(), r);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(FeatureRecord::new(FeatureKind::ApiCall, "").is_err());
        assert!(FeatureRecord::new(FeatureKind::ApiCall, "a\nb").is_err());
        assert_eq!(
            FeatureRecord::parse_line("Bogus::x", 3),
            Err(ReportError::UnknownKind {
                line: 3,
                kind: "Bogus".into()
            })
        );
        assert_eq!(
            FeatureRecord::parse_line("no separator", 2),
            Err(ReportError::MalformedLine { line: 2 })
        );
    }

    #[test]
    fn value_may_contain_separator() {
        let r = FeatureRecord::parse_line("HttpHost::a::b", 1).unwrap();
        assert_eq!(r.value(), "a::b");
    }

    #[test]
    fn app_id_validation() {
        assert_eq!(id().as_str().len(), 64);
        assert!("ABC".parse::<AppId>().is_err());
        assert!(id().as_str().to_uppercase().parse::<AppId>().is_err());
    }

    #[test]
    fn features_file_is_sorted() {
        let mut r = FeatureReport::new(id(), Source::Static);
        r.insert(FeatureRecord::new(FeatureKind::ApiCall, "z.Z.z()V").unwrap());
        r.insert(FeatureRecord::new(FeatureKind::AppComponent, "com.a.B").unwrap());
        r.insert(FeatureRecord::new(FeatureKind::ApiCall, "a.A.a()V").unwrap());
        let text = r.features_text();
        assert_eq!(
            text,
            "ApiCall::a.A.a()V\nApiCall::z.Z.z()V\nAppComponent::com.a.B\n"
        );
        assert_eq!(FeatureReport::parse_features(&text).unwrap(), r.records);
    }

    #[test]
    fn opcodes_and_counts_round_trip() {
        let mut r = FeatureReport::new(id(), Source::Static);
        r.methods = vec![
            vec![Opcode(0x12), Opcode(0x0e)],
            vec![],
            vec![Opcode(0x71), Opcode(0x0e)],
        ];
        r.api_counts.insert("java.lang.String.length()I".into(), 3);
        let text = r.opcodes_text();
        assert_eq!(text, "const/4 return-void\n\ninvoke-static return-void\n");
        assert_eq!(FeatureReport::parse_opcodes(&text).unwrap(), r.methods);
        assert_eq!(
            FeatureReport::parse_api_counts(&r.api_counts_text()).unwrap(),
            r.api_counts
        );
    }
}
