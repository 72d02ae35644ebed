//! Majority-vote ensembles over cross-validated base classifiers.
//!
//! Every odd subset of the bases (size 3 up to a maximum) is voted fold by
//! fold and ranked by mean fold accuracy. Members must have been evaluated
//! on the same folds, which is checked through the fold fingerprints.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{
    format_rows, mean_pm_std, metrics_from_confusion, summarize, ConfusionMatrix, CvResult,
    MetricSet,
};
use crate::label::Label;

pub const DEFAULT_ENUMERATION_CAP: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnsembleError {
    #[error("ensembles need an odd number of members, got {0}")]
    EvenMembership(usize),
    #[error("member {member} has {found} predictions, expected {expected}")]
    LengthMismatch {
        member: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate member {0}")]
    DuplicateMember(String),
    #[error("{count} candidate ensembles exceed the cap of {cap}")]
    TooManyBases { count: u128, cap: usize },
    #[error("{0} was evaluated on different folds")]
    FoldMismatch(String),
    #[error("empty fold in {0}")]
    EmptyFold(String),
}

/// Per-row strict majority of an odd number of prediction vectors.
pub fn vote(predictions: &[Vec<Label>]) -> Result<Vec<Label>, EnsembleError> {
    let k = predictions.len();
    if k.is_multiple_of(2) {
        return Err(EnsembleError::EvenMembership(k));
    }
    let n = predictions[0].len();
    for (member, p) in predictions.iter().enumerate() {
        if p.len() != n {
            return Err(EnsembleError::LengthMismatch {
                member,
                expected: n,
                found: p.len(),
            });
        }
    }
    Ok((0..n)
        .map(|i| {
            let m = predictions.iter().filter(|p| p[i].is_malware()).count();
            Label::from_bool(2 * m > k)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EnsembleSpec {
    /// Sorted member ids.
    pub members: Vec<String>,
}

impl EnsembleSpec {
    pub fn new(mut members: Vec<String>) -> Result<Self, EnsembleError> {
        if members.len() < 3 || members.len().is_multiple_of(2) {
            return Err(EnsembleError::EvenMembership(members.len()));
        }
        members.sort();
        if let Some(w) = members.windows(2).find(|w| w[0] == w[1]) {
            return Err(EnsembleError::DuplicateMember(w[0].clone()));
        }
        Ok(EnsembleSpec { members })
    }

    pub fn label(&self) -> String {
        self.members.join(" + ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEnsemble {
    pub spec: EnsembleSpec,
    pub folds: Vec<ConfusionMatrix>,
    pub mean: MetricSet,
    pub std: MetricSet,
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Number of odd subsets of size `3..=max_size` out of `n` bases.
pub fn ensemble_count(n: usize, max_size: usize) -> u128 {
    (3..=max_size.min(n))
        .step_by(2)
        .map(|s| binomial(n, s))
        .sum()
}

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < size - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, size, &mut Vec::new(), &mut out);
    out
}

fn check_shared_folds(bases: &[CvResult]) -> Result<(), EnsembleError> {
    let mut seen = BTreeSet::new();
    for b in bases {
        if !seen.insert(b.pipeline.as_str()) {
            return Err(EnsembleError::DuplicateMember(b.pipeline.clone()));
        }
        if b.folds.iter().any(|f| f.test_ids.is_empty()) {
            return Err(EnsembleError::EmptyFold(b.pipeline.clone()));
        }
    }
    let first = &bases[0];
    let fp = first.folds_fingerprint();
    for b in &bases[1..] {
        let same_rows = b.folds.len() == first.folds.len()
            && b.folds
                .iter()
                .zip(&first.folds)
                .all(|(x, y)| x.test_ids == y.test_ids && x.truth == y.truth);
        if b.folds_fingerprint() != fp || !same_rows {
            return Err(EnsembleError::FoldMismatch(b.pipeline.clone()));
        }
    }
    Ok(())
}

fn score_subset(bases: &[CvResult], members: &[usize]) -> Result<RankedEnsemble, EnsembleError> {
    let spec = EnsembleSpec::new(members.iter().map(|&i| bases[i].pipeline.clone()).collect())?;
    let mut folds = Vec::new();
    let mut metrics = Vec::new();
    for f in 0..bases[0].folds.len() {
        let preds: Vec<Vec<Label>> = members
            .iter()
            .map(|&i| bases[i].folds[f].predictions.clone())
            .collect();
        let voted = vote(&preds)?;
        let c = ConfusionMatrix::from_predictions(&bases[0].folds[f].truth, &voted);
        metrics
            .push(metrics_from_confusion(&c).map_err(|_| EnsembleError::EmptyFold(spec.label()))?);
        folds.push(c);
    }
    let (mean, std) = summarize(&metrics);
    Ok(RankedEnsemble {
        spec,
        folds,
        mean,
        std,
    })
}

/// Scores every odd subset of `bases` with 3 to `max_size` members and
/// sorts by mean fold accuracy, descending; ties go to the smaller member
/// list in lexicographic order.
pub fn enumerate_ensembles(
    bases: &[CvResult],
    max_size: usize,
    cap: usize,
) -> Result<Vec<RankedEnsemble>, EnsembleError> {
    if bases.len() < 3 {
        return Ok(Vec::new());
    }
    let count = ensemble_count(bases.len(), max_size);
    if count > cap as u128 {
        return Err(EnsembleError::TooManyBases { count, cap });
    }
    check_shared_folds(bases)?;
    let all: Vec<Vec<usize>> = (3..=max_size.min(bases.len()))
        .step_by(2)
        .flat_map(|s| subsets(bases.len(), s))
        .collect();
    let mut ranked = all
        .par_iter()
        .map(|m| score_subset(bases, m))
        .collect::<Result<Vec<_>, _>>()?;
    ranked.sort_by(|a, b| {
        b.mean
            .accuracy
            .total_cmp(&a.mean.accuracy)
            .then_with(|| a.spec.cmp(&b.spec))
    });
    Ok(ranked)
}

/// Table of the first `top` ensembles with `mean ± std` metrics.
pub fn render_ensembles(ranked: &[RankedEnsemble], top: usize) -> String {
    let mut rows = vec![[
        "ID",
        "Classifiers",
        "Accuracy",
        "F1",
        "Precision",
        "TPR",
        "TNR",
    ]
    .map(String::from)
    .to_vec()];
    for (i, e) in ranked.iter().take(top).enumerate() {
        let mut row = vec![format!("E{}", i + 1), e.spec.label()];
        for (m, s) in e.mean.to_array().into_iter().zip(e.std.to_array()) {
            row.push(mean_pm_std(m, s));
        }
        rows.push(row);
    }
    format_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Benign as B, Malware as M};

    #[test]
    fn majority() {
        assert_eq!(vote(&[vec![M], vec![M], vec![B]]).unwrap(), vec![M]);
        assert_eq!(
            vote(&[vec![B], vec![B], vec![B], vec![M], vec![M]]).unwrap(),
            vec![B]
        );
        assert_eq!(
            vote(&[vec![M], vec![B]]),
            Err(EnsembleError::EvenMembership(2))
        );
        assert!(matches!(
            vote(&[vec![M], vec![B, B], vec![M]]),
            Err(EnsembleError::LengthMismatch { member: 1, .. })
        ));
    }

    #[test]
    fn counts() {
        assert_eq!(ensemble_count(3, 3), 1);
        assert_eq!(ensemble_count(5, 5), 11);
        assert_eq!(ensemble_count(12, 12), 2036);
        assert_eq!(subsets(5, 3).len(), 10);
    }

    #[test]
    fn spec_validation() {
        assert!(EnsembleSpec::new(vec!["a".into(), "b".into()]).is_err());
        assert_eq!(
            EnsembleSpec::new(vec!["a".into(), "b".into(), "a".into()]),
            Err(EnsembleError::DuplicateMember("a".into()))
        );
        assert_eq!(
            EnsembleSpec::new(vec!["c".into(), "a".into(), "b".into()])
                .unwrap()
                .label(),
            "a + b + c"
        );
    }
}
