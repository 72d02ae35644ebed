use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Ground-truth class. Malware is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Malware,
}

impl Label {
    pub fn is_malware(self) -> bool {
        self == Label::Malware
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Benign => Label::Malware,
            Label::Malware => Label::Benign,
        }
    }

    pub fn from_bool(malware: bool) -> Label {
        if malware {
            Label::Malware
        } else {
            Label::Benign
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Benign => "benign",
            Label::Malware => "malware",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "benign" | "0" => Ok(Label::Benign),
            "malware" | "malicious" | "1" => Ok(Label::Malware),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Rows per class, `[benign, malware]`.
pub fn class_counts(labels: &[Label]) -> [usize; 2] {
    let m = labels.iter().filter(|l| l.is_malware()).count();
    [labels.len() - m, m]
}
