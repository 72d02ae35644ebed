use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EncodingError;
use crate::report::{FeatureKind, FeatureReport};

/// What the cells of a matrix over this vocabulary hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValueKind {
    /// Presence; stored cells are exactly 1.
    Binary,
    /// Occurrence counts; stored cells are positive integers.
    Count,
    /// Arbitrary finite reals.
    Numeric,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueKind::Binary => "binary",
            ValueKind::Count => "count",
            ValueKind::Numeric => "numeric",
        })
    }
}

impl FromStr for ValueKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(ValueKind::Binary),
            "count" => Ok(ValueKind::Count),
            "numeric" => Ok(ValueKind::Numeric),
            _ => Err(s.to_string()),
        }
    }
}

/// Column names of a feature matrix in frozen order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<String>,
    index: HashMap<String, usize>,
    kind: ValueKind,
}

impl Vocabulary {
    pub fn new(entries: Vec<String>, kind: ValueKind) -> Result<Self, EncodingError> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.is_empty() || e.contains('\n') {
                return Err(EncodingError::BadName(e.clone()));
            }
            if index.insert(e.clone(), i).is_some() {
                return Err(EncodingError::DuplicateName(e.clone()));
            }
        }
        Ok(Vocabulary {
            entries,
            index,
            kind,
        })
    }

    pub fn empty(kind: ValueKind) -> Self {
        Vocabulary {
            entries: Vec::new(),
            index: HashMap::new(),
            kind,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn with_kind(&self, kind: ValueKind) -> Self {
        Vocabulary {
            kind,
            ..self.clone()
        }
    }

    pub fn names(&self) -> &[String] {
        &self.entries
    }

    pub fn name(&self, col: usize) -> &str {
        &self.entries[col]
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// SHA-256 over the names in column order; the kind is not included.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Sub-vocabulary of the given columns, in the given order.
    pub fn select(&self, cols: &[usize]) -> Result<Self, EncodingError> {
        Vocabulary::new(
            cols.iter().map(|&c| self.entries[c].clone()).collect(),
            self.kind,
        )
    }
}

/// Names present in at least `min_support` of the given per-row name sets,
/// in first-seen order.
pub fn vocab_from_rows<I, J, S>(
    rows: I,
    min_support: usize,
    kind: ValueKind,
) -> Result<Vocabulary, EncodingError>
where
    I: IntoIterator<Item = J>,
    J: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut order: Vec<String> = Vec::new();
    let mut support: HashMap<String, usize> = HashMap::new();
    for row in rows {
        let mut seen = HashSet::new();
        for name in row {
            let name = name.as_ref();
            if !seen.insert(name.to_string()) {
                continue;
            }
            let c = support.entry(name.to_string()).or_insert_with(|| {
                order.push(name.to_string());
                0
            });
            *c += 1;
        }
    }
    let kept: Vec<String> = order
        .into_iter()
        .filter(|n| support[n] >= min_support.max(1))
        .collect();
    if kept.is_empty() {
        return Err(EncodingError::EmptyVocabulary);
    }
    Vocabulary::new(kept, kind)
}

/// Record lines (`Kind::value`) of the selected kinds in each report.
pub fn report_names<'a>(
    report: &'a FeatureReport,
    kinds: &'a [FeatureKind],
) -> impl Iterator<Item = String> + 'a {
    report
        .records
        .iter()
        .filter(move |r| kinds.contains(&r.kind()))
        .map(|r| r.line())
}

pub fn build_vocab(
    reports: &[FeatureReport],
    kinds: &[FeatureKind],
    min_support: usize,
) -> Result<Vocabulary, EncodingError> {
    vocab_from_rows(
        reports.iter().map(|r| report_names(r, kinds)),
        min_support,
        ValueKind::Binary,
    )
}

/// Vocabulary over the keys of per-row count tables.
pub fn build_count_vocab(
    tables: &[BTreeMap<String, u64>],
    min_support: usize,
) -> Result<Vocabulary, EncodingError> {
    vocab_from_rows(
        tables
            .iter()
            .map(|t| t.iter().filter(|(_, &c)| c > 0).map(|(k, _)| k.as_str())),
        min_support,
        ValueKind::Count,
    )
}
