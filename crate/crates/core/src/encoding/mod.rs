//! Vocabularies and sparse matrices under usage, frequency, sequence and
//! n-gram representations.

pub mod matrix;
pub mod sequence;
pub mod vocab;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::num::Scalar;
use crate::report::{AppId, FeatureKind, FeatureReport, Source};

pub use matrix::{concat_matrices, FeatureMatrix};
pub use sequence::{encode_sequence, extract_api_routes, ngram_counts, ngrams, ApiSequence};
pub use vocab::{build_count_vocab, build_vocab, ValueKind, Vocabulary};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodingError {
    #[error("no feature reaches the minimum support")]
    EmptyVocabulary,
    #[error("duplicate vocabulary entry {0:?}")]
    DuplicateName(String),
    #[error("invalid vocabulary entry {0:?}")]
    BadName(String),
    #[error("duplicate row id {0}")]
    DuplicateRow(String),
    #[error("invalid cell ({row}, {col})")]
    InvalidCell { row: usize, col: usize },
    #[error("row ids differ, first at {0}")]
    RowMismatch(String),
    #[error("more than {0} call-graph routes")]
    RouteExplosion(usize),
    #[error("malformed matrix file at line {line}")]
    MalformedMatrixFile { line: usize },
}

/// Binary presence of each vocabulary entry (`Kind::value` names).
/// Out-of-vocabulary records are ignored.
pub fn encode_usage<T: Scalar>(
    reports: &[FeatureReport],
    vocab: &Vocabulary,
) -> Result<FeatureMatrix<T>, EncodingError> {
    let mut cells = Vec::new();
    for (r, rep) in reports.iter().enumerate() {
        for rec in &rep.records {
            if let Some(c) = vocab.get(&rec.line()) {
                cells.push((r, c, T::one()));
            }
        }
    }
    FeatureMatrix::new(
        vocab.with_kind(ValueKind::Binary),
        reports.iter().map(|r| r.app_id.clone()).collect(),
        cells,
    )
}

/// Occurrence counts per vocabulary entry.
pub fn encode_frequency<T: Scalar>(
    rows: &[(AppId, BTreeMap<String, u64>)],
    vocab: &Vocabulary,
) -> Result<FeatureMatrix<T>, EncodingError> {
    let mut cells = Vec::new();
    for (r, (_, table)) in rows.iter().enumerate() {
        for (name, &n) in table {
            if let (Some(c), true) = (vocab.get(name), n > 0) {
                cells.push((r, c, T::from_count(n as usize)));
            }
        }
    }
    FeatureMatrix::new(
        vocab.with_kind(ValueKind::Count),
        rows.iter().map(|(id, _)| id.clone()).collect(),
        cells,
    )
}

/// Binary matrix whose cells are 1 where `counts` is positive.
pub fn usage_from_counts<T: Scalar>(
    rows: &[(AppId, BTreeMap<String, u64>)],
    vocab: &Vocabulary,
) -> Result<FeatureMatrix<T>, EncodingError> {
    let freq: FeatureMatrix<T> = encode_frequency(rows, vocab)?;
    let cells = freq
        .cells()
        .iter()
        .map(|&(r, c, _)| (r, c, T::one()))
        .collect();
    FeatureMatrix::new(
        vocab.with_kind(ValueKind::Binary),
        freq.row_ids().to_vec(),
        cells,
    )
}

/// Invocation counts keyed like API-call records (`ApiCall::m` for static
/// reports, `DynamicApiCall::m` otherwise).
pub fn api_count_table(report: &FeatureReport) -> BTreeMap<String, u64> {
    let kind = match report.source {
        Source::Static => FeatureKind::ApiCall,
        _ => FeatureKind::DynamicApiCall,
    };
    report
        .api_counts
        .iter()
        .map(|(m, &n)| (format!("{kind}::{m}"), n))
        .collect()
}

/// n-gram counts over the opcode mnemonics of each method; windows do not
/// cross method boundaries.
pub fn opcode_ngram_table(report: &FeatureReport, n: usize) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for m in &report.methods {
        let names: Vec<&str> = m.iter().map(|o| o.mnemonic()).collect();
        for (k, c) in ngram_counts(&names, n) {
            *out.entry(k).or_insert(0) += c;
        }
    }
    out
}

/// Dense numeric rows, one name per column.
pub fn encode_numeric<T: Scalar>(
    names: &[&str],
    rows: &[(AppId, Vec<f64>)],
) -> Result<FeatureMatrix<T>, EncodingError> {
    let vocab = Vocabulary::new(
        names.iter().map(|s| s.to_string()).collect(),
        ValueKind::Numeric,
    )?;
    let dense: Vec<Vec<T>> = rows
        .iter()
        .map(|(_, v)| v.iter().map(|&x| T::lit(x)).collect())
        .collect();
    FeatureMatrix::from_dense(
        vocab,
        rows.iter().map(|(id, _)| id.clone()).collect(),
        &dense,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::FeatureRecord;

    fn id(i: u8) -> AppId {
        AppId::of_bytes(&[i])
    }

    fn report(i: u8, apis: &[&str]) -> FeatureReport {
        let mut r = FeatureReport::new(id(i), Source::Static);
        for a in apis {
            r.insert(FeatureRecord::new(FeatureKind::ApiCall, *a).unwrap());
        }
        r
    }

    #[test]
    fn min_support() {
        let reps = [
            report(1, &["x.A.x()V", "y.A.y()V"]),
            report(2, &["x.A.x()V"]),
            report(3, &[]),
        ];
        let v = build_vocab(&reps, &[FeatureKind::ApiCall], 2).unwrap();
        assert_eq!(v.names(), ["ApiCall::x.A.x()V"]);
        assert_eq!(
            build_vocab(&reps, &[FeatureKind::ApiCall], 4),
            Err(EncodingError::EmptyVocabulary)
        );
        assert_eq!(
            build_vocab(&reps, &[FeatureKind::ApiCall], 1)
                .unwrap()
                .len(),
            2
        );
        assert_eq!(
            build_vocab(&reps, &[FeatureKind::NetworkAddress], 1),
            Err(EncodingError::EmptyVocabulary)
        );
    }

    #[test]
    fn usage_rows() {
        let v = Vocabulary::new(
            vec!["ApiCall::a.B.one()V".into(), "ApiCall::a.B.two()V".into()],
            ValueKind::Binary,
        )
        .unwrap();
        let m: FeatureMatrix<f64> = encode_usage(
            &[report(1, &["a.B.one()V", "a.B.nine()V"]), report(2, &[])],
            &v,
        )
        .unwrap();
        assert_eq!(m.to_dense(), vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn frequency_example() {
        let v = Vocabulary::new(
            ["API_1", "API_2", "API_3"].map(String::from).to_vec(),
            ValueKind::Count,
        )
        .unwrap();
        let t: BTreeMap<String, u64> = [
            ("API_1".to_string(), 5),
            ("API_2".to_string(), 4),
            ("API_3".to_string(), 0),
        ]
        .into();
        let m: FeatureMatrix<f64> =
            encode_frequency(&[(id(1), t), (id(2), BTreeMap::new())], &v).unwrap();
        assert_eq!(m.dense_row(0), vec![5.0, 4.0, 0.0]);
        assert!(m.row(1).is_empty());
    }

    #[test]
    fn concat_shapes_and_mismatch() {
        let ids = vec![id(1), id(2)];
        let a = encode_numeric::<f64>(
            &["a", "b"],
            &[(id(1), vec![1.0, 2.0]), (id(2), vec![3.0, 0.0])],
        )
        .unwrap();
        let b = encode_numeric::<f64>(
            &["c", "d", "e"],
            &[(id(1), vec![1.0; 3]), (id(2), vec![0.5; 3])],
        )
        .unwrap();
        let ab = concat_matrices(&a, &b).unwrap();
        assert_eq!((ab.n_rows(), ab.n_cols()), (2, 5));
        let empty =
            FeatureMatrix::<f64>::new(Vocabulary::empty(ValueKind::Binary), ids, vec![]).unwrap();
        assert_eq!(concat_matrices(&a, &empty).unwrap(), a);
        assert_eq!(concat_matrices(&empty, &a).unwrap(), a);
        let c = encode_numeric::<f64>(&["z"], &[(id(2), vec![1.0]), (id(1), vec![1.0])]).unwrap();
        assert_eq!(
            concat_matrices(&a, &c),
            Err(EncodingError::RowMismatch(id(1).to_string()))
        );
        assert!(matches!(
            concat_matrices(&a, &a),
            Err(EncodingError::DuplicateName(_))
        ));
        assert_eq!(
            concat_matrices(&a.with_tag("s").unwrap(), &a.with_tag("d").unwrap())
                .unwrap()
                .n_cols(),
            4
        );
    }

    #[test]
    fn matrix_text_round_trip() {
        let a = encode_numeric::<f64>(
            &["a", "b b"],
            &[(id(1), vec![0.1, -2.5]), (id(2), vec![0.0, 1e-9])],
        )
        .unwrap();
        let text = a.to_text();
        assert_eq!(FeatureMatrix::<f64>::from_text(&text).unwrap(), a);
        assert!(text.starts_with("#vocab 2 numeric\na\nb b\n0 0 0.1\n"));
        assert!(matches!(
            FeatureMatrix::<f64>::from_text("#vocab 1 binary\nx\n0 0 2\n#rows\n"),
            Err(EncodingError::MalformedMatrixFile { .. })
        ));
    }

    #[test]
    fn cell_invariants() {
        let v = Vocabulary::new(vec!["x".into()], ValueKind::Count).unwrap();
        assert!(FeatureMatrix::<f64>::new(v.clone(), vec![id(1)], vec![(0, 0, 1.5)]).is_err());
        assert!(FeatureMatrix::<f64>::new(v.clone(), vec![id(1)], vec![(0, 1, 1.0)]).is_err());
        assert!(
            FeatureMatrix::<f64>::new(v.clone(), vec![id(1)], vec![(0, 0, 1.0), (0, 0, 2.0)])
                .is_err()
        );
        assert!(FeatureMatrix::<f64>::new(v, vec![id(1), id(1)], vec![]).is_err());
    }
}
