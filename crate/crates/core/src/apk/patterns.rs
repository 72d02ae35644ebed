//! Method-reference pattern lists (restricted / suspicious APIs) and the
//! API-to-permission map.

use std::fmt;

use thiserror::Error;

use super::method::MethodRef;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error("malformed pattern file at line {line}")]
    MalformedPatternFile { line: usize },
    #[error("malformed permission map at line {line}")]
    MalformedMapFile { line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApiPattern {
    /// Full canonical form including the proto.
    Exact(String),
    /// `pkg.Class.method` or `pkg.Class`: any overload of that method or any
    /// method of that class.
    Name(String),
    /// Trailing `*`: any canonical reference starting with the prefix.
    Prefix(String),
}

impl ApiPattern {
    pub fn parse(s: &str) -> Option<ApiPattern> {
        if s.is_empty() || s.chars().any(char::is_whitespace) {
            return None;
        }
        if let Some(prefix) = s.strip_suffix('*') {
            if prefix.is_empty() || prefix.contains('*') {
                return None;
            }
            return Some(ApiPattern::Prefix(prefix.to_string()));
        }
        if s.contains('*') {
            return None;
        }
        if s.contains('(') {
            return s
                .parse::<MethodRef>()
                .ok()
                .map(|m| ApiPattern::Exact(m.to_string()));
        }
        if s.contains(')') || s.starts_with('.') || s.ends_with('.') || s.contains("..") {
            return None;
        }
        Some(ApiPattern::Name(s.to_string()))
    }

    pub fn matches(&self, m: &MethodRef) -> bool {
        match self {
            ApiPattern::Exact(s) => m.to_string() == *s,
            ApiPattern::Name(n) => m.qualified_name() == *n || m.class_name == *n,
            ApiPattern::Prefix(p) => m.to_string().starts_with(p.as_str()),
        }
    }
}

impl fmt::Display for ApiPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApiPattern::Exact(s) | ApiPattern::Name(s) => f.write_str(s),
            ApiPattern::Prefix(p) => write!(f, "{p}*"),
        }
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| {
            (
                i + 1,
                l.split('#').next().unwrap_or("").trim_end_matches('\r'),
            )
        })
        .filter(|(_, l)| !l.trim().is_empty())
}

pub fn parse_pattern_file(text: &str) -> Result<Vec<ApiPattern>, PatternError> {
    data_lines(text)
        .map(|(line, l)| {
            ApiPattern::parse(l.trim()).ok_or(PatternError::MalformedPatternFile { line })
        })
        .collect()
}

/// `pattern<TAB>permission` lines.
pub fn parse_permission_map(text: &str) -> Result<Vec<(ApiPattern, String)>, PatternError> {
    data_lines(text)
        .map(|(line, l)| {
            let err = PatternError::MalformedMapFile { line };
            let (pat, perm) = l.trim().split_once('\t').ok_or(err.clone())?;
            let perm = perm.trim();
            if perm.is_empty() || perm.chars().any(char::is_whitespace) {
                return Err(err);
            }
            Ok((ApiPattern::parse(pat.trim()).ok_or(err)?, perm.to_string()))
        })
        .collect()
}

pub const SAMPLE_RESTRICTED: &str = include_str!("../../data/restricted_apis.txt");
pub const SAMPLE_SUSPICIOUS: &str = include_str!("../../data/suspicious_apis.txt");
pub const SAMPLE_PERMISSION_MAP: &str = include_str!("../../data/api_permissions.txt");

#[cfg(test)]
mod tests {
    use super::*;

    fn m(s: &str) -> MethodRef {
        s.parse().unwrap()
    }

    #[test]
    fn pattern_forms() {
        let send = m("android.telephony.SmsManager.sendTextMessage(Ljava/lang/String;)V");
        assert!(
            ApiPattern::parse("android.telephony.SmsManager.sendTextMessage")
                .unwrap()
                .matches(&send)
        );
        assert!(ApiPattern::parse("android.telephony.SmsManager")
            .unwrap()
            .matches(&send));
        assert!(ApiPattern::parse("android.telephony.*")
            .unwrap()
            .matches(&send));
        assert!(ApiPattern::parse(
            "android.telephony.SmsManager.sendTextMessage(Ljava/lang/String;)V"
        )
        .unwrap()
        .matches(&send));
        assert!(!ApiPattern::parse("android.telephony.SmsManager.send")
            .unwrap()
            .matches(&send));
        assert!(!ApiPattern::parse("android.telephony")
            .unwrap()
            .matches(&send));
    }

    #[test]
    fn malformed_lines_are_located() {
        let text = "# header\nandroid.a.B.c\n\nbad pattern\n";
        assert_eq!(
            parse_pattern_file(text),
            Err(PatternError::MalformedPatternFile { line: 4 })
        );
        assert_eq!(
            parse_pattern_file("a.b*c\n"),
            Err(PatternError::MalformedPatternFile { line: 1 })
        );
        assert_eq!(
            parse_permission_map("a.B.c android.permission.X\n"),
            Err(PatternError::MalformedMapFile { line: 1 })
        );
        assert_eq!(
            parse_permission_map("a.B.c\t\n"),
            Err(PatternError::MalformedMapFile { line: 1 })
        );
    }

    #[test]
    fn shipped_samples_parse() {
        assert!(!parse_pattern_file(SAMPLE_RESTRICTED).unwrap().is_empty());
        assert!(!parse_pattern_file(SAMPLE_SUSPICIOUS).unwrap().is_empty());
        let map = parse_permission_map(SAMPLE_PERMISSION_MAP).unwrap();
        assert!(map.iter().any(|(p, perm)| p.to_string()
            == "android.net.ConnectivityManager.getActiveNetworkInfo"
            && perm == "android.permission.ACCESS_NETWORK_STATE"));
    }
}
