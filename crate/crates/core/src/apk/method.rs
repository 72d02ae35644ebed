//! Method references and platform-API classification.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A method reference in canonical `class.method(params)ret` form, where
/// the class is dotted and the proto uses dex type descriptors, e.g.
/// `java.lang.String.length()I`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MethodRef {
    pub class_name: String,
    pub method_name: String,
    /// Full proto, `(` params `)` return.
    pub descriptor: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadMethodRef(pub String);

impl fmt::Display for BadMethodRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "not a method reference: {:?}", self.0)
    }
}

impl std::error::Error for BadMethodRef {}

impl MethodRef {
    pub fn new(class_name: &str, method_name: &str, descriptor: &str) -> Self {
        MethodRef {
            class_name: class_name.to_string(),
            method_name: method_name.to_string(),
            descriptor: descriptor.to_string(),
        }
    }

    /// `class.method`, without the descriptor.
    pub fn qualified_name(&self) -> String {
        format!("{}.{}", self.class_name, self.method_name)
    }

    pub fn is_platform(&self, prefixes: &PlatformPrefixes) -> bool {
        prefixes.matches(&self.class_name)
    }
}

impl fmt::Display for MethodRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{}{}",
            self.class_name, self.method_name, self.descriptor
        )
    }
}

impl FromStr for MethodRef {
    type Err = BadMethodRef;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || BadMethodRef(s.to_string());
        let open = s.find('(').ok_or_else(err)?;
        let close = s[open..].find(')').ok_or_else(err)? + open;
        let (qualified, descriptor) = s.split_at(open);
        let (class, method) = qualified.rsplit_once('.').ok_or_else(err)?;
        let ok_ident = |x: &str| !x.is_empty() && !x.chars().any(char::is_whitespace);
        if !ok_ident(class) || !ok_ident(method) || descriptor[close - open..].contains('(') {
            return Err(err());
        }
        if descriptor.chars().any(char::is_whitespace) {
            return Err(err());
        }
        Ok(MethodRef::new(class, method, descriptor))
    }
}

/// Converts a dex type descriptor (`Ljava/lang/String;`, `[I`) to its
/// dotted Java name (`java.lang.String`, `int[]`).
pub fn descriptor_to_java(desc: &str) -> String {
    let dims = desc.bytes().take_while(|&b| b == b'[').count();
    let base = &desc[dims..];
    let name = match base {
        "V" => "void".to_string(),
        "Z" => "boolean".to_string(),
        "B" => "byte".to_string(),
        "S" => "short".to_string(),
        "C" => "char".to_string(),
        "I" => "int".to_string(),
        "J" => "long".to_string(),
        "F" => "float".to_string(),
        "D" => "double".to_string(),
        _ if base.starts_with('L') && base.ends_with(';') => {
            base[1..base.len() - 1].replace('/', ".")
        }
        _ => base.to_string(),
    };
    format!("{name}{}", "[]".repeat(dims))
}

/// Inverse of [`descriptor_to_java`] for class names.
pub fn java_to_descriptor(class: &str) -> String {
    format!("L{};", class.replace('.', "/"))
}

/// Class-name prefixes treated as the platform SDK.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlatformPrefixes(Vec<String>);

pub const DEFAULT_PREFIXES: &str = include_str!("../../data/platform_prefixes.txt");

impl PlatformPrefixes {
    pub fn new(prefixes: Vec<String>) -> Self {
        PlatformPrefixes(prefixes)
    }

    /// One prefix per line; `#` starts a comment.
    pub fn parse(text: &str) -> Self {
        PlatformPrefixes(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect(),
        )
    }

    pub fn matches(&self, class_name: &str) -> bool {
        let base = class_name.trim_end_matches("[]");
        self.0.iter().any(|p| base.starts_with(p.as_str()))
    }
}

impl Default for PlatformPrefixes {
    fn default() -> Self {
        PlatformPrefixes::parse(DEFAULT_PREFIXES)
    }
}
