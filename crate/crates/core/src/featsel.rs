//! Column scoring and selection.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{FeatureMatrix, ValueKind};
use crate::label::{class_counts, Label};
use crate::num::{total_cmp, Scalar};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatselError {
    #[error("labels contain a single class")]
    DegenerateLabels,
    #[error("each class needs at least 2 rows")]
    ClassTooSmall,
    #[error("{labels} labels for {rows} rows")]
    LabelLengthMismatch { rows: usize, labels: usize },
    #[error("k = {k} outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("threshold must be a non-negative number")]
    InvalidThreshold,
    #[error("selector does not accept {0} matrices")]
    UnsupportedKind(ValueKind),
    #[error("malformed scores file at line {line}")]
    MalformedScoresFile { line: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    MutualInformation,
    ChiSquare,
    Pcc,
    VarianceThreshold,
    TTest,
    Sails,
    Wfs,
}

impl Selector {
    pub fn name(self) -> &'static str {
        match self {
            Selector::MutualInformation => "mutual_information",
            Selector::ChiSquare => "chi_square",
            Selector::Pcc => "pcc",
            Selector::VarianceThreshold => "variance_threshold",
            Selector::TTest => "t_test",
            Selector::Sails => "sails",
            Selector::Wfs => "wfs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreOrdering {
    HigherBetter,
    AbsoluteHigherBetter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionScores<T> {
    pub selector: Selector,
    pub scores: Vec<T>,
    pub ordering: ScoreOrdering,
}

impl<T: Scalar> SelectionScores<T> {
    fn key(&self, i: usize) -> T {
        match self.ordering {
            ScoreOrdering::HigherBetter => self.scores[i],
            ScoreOrdering::AbsoluteHigherBetter => self.scores[i].abs(),
        }
    }

    /// All columns, best first; ties go to the lower index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| total_cmp(self.key(b), self.key(a)).then(a.cmp(&b)));
        idx
    }
}

pub const DISCRETIZE_BINS: usize = 10;

fn check_labels<T>(m: &FeatureMatrix<T>, labels: &[Label]) -> Result<[usize; 2], FeatselError>
where
    T: Scalar,
{
    if labels.len() != m.n_rows() {
        return Err(FeatselError::LabelLengthMismatch {
            rows: m.n_rows(),
            labels: labels.len(),
        });
    }
    let counts = class_counts(labels);
    if counts[0] == 0 || counts[1] == 0 {
        return Err(FeatselError::DegenerateLabels);
    }
    Ok(counts)
}

/// Column-major copy of the non-zero cells: `cols[c] = [(row, value)]`.
fn sparse_columns<T: Scalar>(m: &FeatureMatrix<T>) -> Vec<Vec<(usize, T)>> {
    let mut cols = vec![Vec::new(); m.n_cols()];
    for &(r, c, v) in m.cells() {
        cols[c].push((r, v));
    }
    cols
}

fn densify<T: Scalar>(col: &[(usize, T)], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    for &(r, v) in col {
        out[r] = v;
    }
    out
}

/// Equal-frequency bin index per row. Cut points are the values at the
/// `i/bins` quantiles of the column; repeated cut points collapse.
pub fn discretize<T: Scalar>(values: &[T], bins: usize) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| total_cmp(*a, *b));
    let n = sorted.len();
    let mut cuts: Vec<T> = (1..bins)
        .map(|i| sorted[(i * n / bins).min(n.saturating_sub(1))])
        .collect();
    cuts.dedup();
    values
        .iter()
        .map(|v| cuts.partition_point(|c| total_cmp(*c, *v) != std::cmp::Ordering::Greater))
        .collect()
}

/// Class-by-bin counts of one column, `table[bin][class]`.
fn contingency<T: Scalar>(
    col: &[(usize, T)],
    n: usize,
    labels: &[Label],
    kind: ValueKind,
) -> Vec<[usize; 2]> {
    if kind == ValueKind::Binary {
        let counts = class_counts(labels);
        let mut ones = [0usize; 2];
        for &(r, _) in col {
            ones[labels[r].index()] += 1;
        }
        return vec![[counts[0] - ones[0], counts[1] - ones[1]], ones];
    }
    let bins = discretize(&densify(col, n), DISCRETIZE_BINS);
    let mut table = vec![[0usize; 2]; bins.iter().max().map_or(1, |b| b + 1)];
    for (r, &b) in bins.iter().enumerate() {
        table[b][labels[r].index()] += 1;
    }
    table
}

fn mi_of_table<T: Scalar>(table: &[[usize; 2]]) -> T {
    let n: usize = table.iter().map(|r| r[0] + r[1]).sum();
    let nf = T::from_count(n);
    let class: [usize; 2] = [
        table.iter().map(|r| r[0]).sum(),
        table.iter().map(|r| r[1]).sum(),
    ];
    let mut mi = T::zero();
    for row in table {
        let rb = row[0] + row[1];
        for y in 0..2 {
            let o = row[y];
            if o == 0 {
                continue;
            }
            let o = T::from_count(o);
            mi += o / nf * (o * nf / (T::from_count(rb) * T::from_count(class[y]))).ln();
        }
    }
    mi.max(T::zero())
}

fn chi2_of_table<T: Scalar>(table: &[[usize; 2]]) -> T {
    let n: usize = table.iter().map(|r| r[0] + r[1]).sum();
    let class: [usize; 2] = [
        table.iter().map(|r| r[0]).sum(),
        table.iter().map(|r| r[1]).sum(),
    ];
    let mut chi = T::zero();
    for row in table {
        let rb = row[0] + row[1];
        for y in 0..2 {
            let e = T::from_count(rb) * T::from_count(class[y]) / T::from_count(n);
            if e > T::zero() {
                let d = T::from_count(row[y]) - e;
                chi += d * d / e;
            }
        }
    }
    chi
}

fn table_scores<T: Scalar>(
    m: &FeatureMatrix<T>,
    labels: &[Label],
    score: fn(&[[usize; 2]]) -> T,
) -> Result<Vec<T>, FeatselError> {
    check_labels(m, labels)?;
    let n = m.n_rows();
    let kind = m.kind();
    Ok(sparse_columns(m)
        .par_iter()
        .map(|col| score(&contingency(col, n, labels, kind)))
        .collect())
}

/// Mutual information in nats between each (discretized) column and the label.
pub fn mutual_information<T: Scalar>(
    m: &FeatureMatrix<T>,
    labels: &[Label],
) -> Result<SelectionScores<T>, FeatselError> {
    Ok(SelectionScores {
        selector: Selector::MutualInformation,
        scores: table_scores(m, labels, mi_of_table::<T>)?,
        ordering: ScoreOrdering::HigherBetter,
    })
}

pub fn chi_square<T: Scalar>(
    m: &FeatureMatrix<T>,
    labels: &[Label],
) -> Result<SelectionScores<T>, FeatselError> {
    Ok(SelectionScores {
        selector: Selector::ChiSquare,
        scores: table_scores(m, labels, chi2_of_table::<T>)?,
        ordering: ScoreOrdering::HigherBetter,
    })
}

/// Per-class first and second moments of a sparse column:
/// `(count, sum, sum of squares)` per class.
fn class_moments<T: Scalar>(col: &[(usize, T)], labels: &[Label]) -> [(T, T); 2] {
    let mut acc = [(T::zero(), T::zero()); 2];
    for &(r, v) in col {
        let a = &mut acc[labels[r].index()];
        a.0 += v;
        a.1 += v * v;
    }
    acc
}

/// Sum of squared deviations from `mean` over a column of length `n` with
/// the given non-zero entries.
fn sq_dev<T: Scalar>(vals: impl Iterator<Item = T>, nnz: usize, n: usize, mean: T) -> T {
    let s: T = vals.fold(T::zero(), |acc, v| acc + (v - mean) * (v - mean));
    s + T::from_count(n - nnz) * mean * mean
}

/// Pearson correlation with the 0/1 label; constant columns score 0.
pub fn pearson<T: Scalar>(
    m: &FeatureMatrix<T>,
    labels: &[Label],
) -> Result<SelectionScores<T>, FeatselError> {
    let counts = check_labels(m, labels)?;
    let n = m.n_rows();
    let nf = T::from_count(n);
    let ym = T::from_count(counts[1]) / nf;
    let syy = T::from_count(counts[0]) * ym * ym
        + T::from_count(counts[1]) * (T::one() - ym) * (T::one() - ym);
    let scores = sparse_columns(m)
        .par_iter()
        .map(|col| {
            let mean = col.iter().fold(T::zero(), |a, &(_, v)| a + v) / nf;
            let sxx = sq_dev(col.iter().map(|&(_, v)| v), col.len(), n, mean);
            if sxx <= T::zero() {
                return T::zero();
            }
            // Σ (x - mx)(y - my) = Σ x·y - n·mx·my
            let sxy = col
                .iter()
                .filter(|(r, _)| labels[*r].is_malware())
                .fold(T::zero(), |a, &(_, v)| a + v)
                - nf * mean * ym;
            (sxy / (sxx * syy).sqrt()).max(-T::one()).min(T::one())
        })
        .collect();
    Ok(SelectionScores {
        selector: Selector::Pcc,
        scores,
        ordering: ScoreOrdering::AbsoluteHigherBetter,
    })
}

/// Population variance (divisor n) of every column.
pub fn column_variances<T: Scalar>(m: &FeatureMatrix<T>) -> Vec<T> {
    let n = m.n_rows();
    if n == 0 {
        return vec![T::zero(); m.n_cols()];
    }
    let nf = T::from_count(n);
    sparse_columns(m)
        .iter()
        .map(|col| {
            let mean = col.iter().fold(T::zero(), |a, &(_, v)| a + v) / nf;
            sq_dev(col.iter().map(|&(_, v)| v), col.len(), n, mean) / nf
        })
        .collect()
}

/// Columns whose variance exceeds `threshold`, ascending.
pub fn variance_threshold<T: Scalar>(
    m: &FeatureMatrix<T>,
    threshold: T,
) -> Result<Vec<usize>, FeatselError> {
    if !threshold.is_finite() || threshold < T::zero() {
        return Err(FeatselError::InvalidThreshold);
    }
    Ok(column_variances(m)
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > threshold)
        .map(|(i, _)| i)
        .collect())
}

/// Welch t statistic magnitude (sample variances, divisor n - 1). Columns
/// with zero variance in both classes score 0 if the class means agree and
/// `T::max_value()` if they differ.
pub fn t_test<T: Scalar>(
    m: &FeatureMatrix<T>,
    labels: &[Label],
) -> Result<SelectionScores<T>, FeatselError> {
    let counts = check_labels(m, labels)?;
    if counts[0] < 2 || counts[1] < 2 {
        return Err(FeatselError::ClassTooSmall);
    }
    let nc = [T::from_count(counts[0]), T::from_count(counts[1])];
    let scores = sparse_columns(m)
        .par_iter()
        .map(|col| {
            let mom = class_moments(col, labels);
            let mean = [mom[0].0 / nc[0], mom[1].0 / nc[1]];
            let mut var = [T::zero(); 2];
            for y in 0..2 {
                let nnz = col.iter().filter(|(r, _)| labels[*r].index() == y).count();
                let vals = col
                    .iter()
                    .filter(|(r, _)| labels[*r].index() == y)
                    .map(|&(_, v)| v);
                var[y] = sq_dev(vals, nnz, counts[y], mean[y]) / (nc[y] - T::one());
            }
            let se = (var[0] / nc[0] + var[1] / nc[1]).sqrt();
            let diff = (mean[1] - mean[0]).abs();
            if se > T::zero() {
                diff / se
            } else if diff > T::zero() {
                T::max_value()
            } else {
                T::zero()
            }
        })
        .collect();
    Ok(SelectionScores {
        selector: Selector::TTest,
        scores,
        ordering: ScoreOrdering::HigherBetter,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WfsMode {
    /// Sum of cell values per class.
    #[default]
    CountSum,
    /// Number of rows with a non-zero cell per class.
    AppCount,
}

/// `occ_malware / (occ_malware + occ_benign)`; unused columns score 0.
pub fn wfs<T: Scalar>(
    m: &FeatureMatrix<T>,
    labels: &[Label],
    mode: WfsMode,
) -> Result<SelectionScores<T>, FeatselError> {
    check_labels(m, labels)?;
    if m.kind() == ValueKind::Numeric {
        return Err(FeatselError::UnsupportedKind(ValueKind::Numeric));
    }
    let mut occ = vec![[T::zero(); 2]; m.n_cols()];
    for &(r, c, v) in m.cells() {
        occ[c][labels[r].index()] += match mode {
            WfsMode::CountSum => v,
            WfsMode::AppCount => T::one(),
        };
    }
    let scores = occ
        .iter()
        .map(|o| {
            let total = o[0] + o[1];
            if total > T::zero() {
                o[1] / total
            } else {
                T::zero()
            }
        })
        .collect();
    Ok(SelectionScores {
        selector: Selector::Wfs,
        scores,
        ordering: ScoreOrdering::HigherBetter,
    })
}

/// The `k` best columns, ascending.
pub fn select_top_k<T: Scalar>(
    scores: &SelectionScores<T>,
    k: usize,
) -> Result<Vec<usize>, FeatselError> {
    let n = scores.scores.len();
    if k == 0 || k > n {
        return Err(FeatselError::KOutOfRange { k, n });
    }
    let mut top = scores.ranking()[..k].to_vec();
    top.sort_unstable();
    Ok(top)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SailsBase {
    MutualInformation,
    ChiSquare,
}

/// Per-class ranked lists for SAILS. A column enters the list of class `c`
/// with its base score when its mean in `c` exceeds its mean in the other
/// class, and with score 0 otherwise. Returns `[benign, malware]`.
pub fn sails_scores<T: Scalar>(
    m: &FeatureMatrix<T>,
    labels: &[Label],
    base: SailsBase,
) -> Result<[SelectionScores<T>; 2], FeatselError> {
    let counts = check_labels(m, labels)?;
    let base_scores = match base {
        SailsBase::MutualInformation => mutual_information(m, labels)?,
        SailsBase::ChiSquare => chi_square(m, labels)?,
    };
    let cols = sparse_columns(m);
    let mut lists = [vec![T::zero(); m.n_cols()], vec![T::zero(); m.n_cols()]];
    for (j, col) in cols.iter().enumerate() {
        let mom = class_moments(col, labels);
        let mean = [
            mom[0].0 / T::from_count(counts[0]),
            mom[1].0 / T::from_count(counts[1]),
        ];
        for c in 0..2 {
            if mean[c] > mean[1 - c] {
                lists[c][j] = base_scores.scores[j];
            }
        }
    }
    let [b, mw] = lists;
    let wrap = |scores| SelectionScores {
        selector: Selector::Sails,
        scores,
        ordering: ScoreOrdering::HigherBetter,
    };
    Ok([wrap(b), wrap(mw)])
}

/// Union of the top-`k` columns of the benign and malware lists, ascending.
pub fn sails<T: Scalar>(
    m: &FeatureMatrix<T>,
    labels: &[Label],
    base: SailsBase,
    k: usize,
) -> Result<Vec<usize>, FeatselError> {
    let [b, mw] = sails_scores(m, labels, base)?;
    let mut out = select_top_k(&b, k)?;
    out.extend(select_top_k(&mw, k)?);
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scorer {
    MutualInformation,
    ChiSquare,
    Pcc,
    TTest,
    Wfs,
}

/// A selection step that can be fitted on training rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SelectionSpec {
    All,
    TopK { scorer: Scorer, k: usize },
    VarianceThreshold { threshold: f64 },
    Sails { base: SailsBase, k: usize },
}

impl SelectionSpec {
    pub fn describe(&self) -> String {
        match self {
            SelectionSpec::All => "all".to_string(),
            SelectionSpec::TopK { scorer, k } => format!("{scorer:?}/top{k}"),
            SelectionSpec::VarianceThreshold { threshold } => format!("variance>{threshold}"),
            SelectionSpec::Sails { base, k } => format!("sails-{base:?}/top{k}"),
        }
    }
}

pub fn score<T: Scalar>(
    m: &FeatureMatrix<T>,
    labels: &[Label],
    scorer: Scorer,
) -> Result<SelectionScores<T>, FeatselError> {
    match scorer {
        Scorer::MutualInformation => mutual_information(m, labels),
        Scorer::ChiSquare => chi_square(m, labels),
        Scorer::Pcc => pearson(m, labels),
        Scorer::TTest => t_test(m, labels),
        Scorer::Wfs => wfs(m, labels, WfsMode::default()),
    }
}

/// Selected columns, ascending.
pub fn fit_selection<T: Scalar>(
    spec: &SelectionSpec,
    m: &FeatureMatrix<T>,
    labels: &[Label],
) -> Result<Vec<usize>, FeatselError> {
    match *spec {
        SelectionSpec::All => Ok((0..m.n_cols()).collect()),
        SelectionSpec::TopK { scorer, k } => select_top_k(&score(m, labels, scorer)?, k),
        SelectionSpec::VarianceThreshold { threshold } => variance_threshold(m, T::lit(threshold)),
        SelectionSpec::Sails { base, k } => sails(m, labels, base, k),
    }
}

/// Header line, then `name<TAB>score` in ranking order.
pub fn scores_to_text<T: Scalar>(
    scores: &SelectionScores<T>,
    names: &[String],
    params: &str,
) -> String {
    let mut s = format!(
        "# selector={} ordering={:?} {params}\n",
        scores.selector.name(),
        scores.ordering
    );
    for i in scores.ranking() {
        let _ = writeln!(s, "{}\t{}", names[i], scores.scores[i]);
    }
    s
}

/// `(name, score)` pairs of a scores file, in file order.
pub fn parse_scores_text<T: Scalar>(text: &str) -> Result<Vec<(String, T)>, FeatselError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.starts_with("# selector=") => {}
        _ => return Err(FeatselError::MalformedScoresFile { line: 1 }),
    }
    lines
        .map(|(i, l)| {
            let bad = FeatselError::MalformedScoresFile { line: i + 1 };
            let (name, v) = l.rsplit_once('\t').ok_or(bad.clone())?;
            Ok((name.to_string(), v.parse().map_err(|_| bad)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::Vocabulary;
    use crate::report::AppId;

    fn binary(cols: &[&[u8]]) -> FeatureMatrix<f64> {
        let n = cols[0].len();
        let vocab = Vocabulary::new(
            (0..cols.len()).map(|i| format!("f{i}")).collect(),
            ValueKind::Binary,
        )
        .unwrap();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|r| cols.iter().map(|c| c[r] as f64).collect())
            .collect();
        FeatureMatrix::from_dense(
            vocab,
            (0..n).map(|i| AppId::of_bytes(&[i as u8])).collect(),
            &rows,
        )
        .unwrap()
    }

    fn labels(v: &[u8]) -> Vec<Label> {
        v.iter().map(|&x| Label::from_bool(x == 1)).collect()
    }

    const Y: [u8; 4] = [0, 0, 1, 1];

    #[test]
    fn mi_examples() {
        let m = binary(&[&[0, 0, 1, 1], &[1, 1, 1, 1], &[1, 0, 1, 0]]);
        let s = mutual_information(&m, &labels(&Y)).unwrap().scores;
        assert!((s[0] - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(s[1], 0.0);
        assert!(s[2].abs() < 1e-12);
    }

    #[test]
    fn chi_examples() {
        let m = binary(&[&[1, 1, 1, 1], &[0, 0, 1, 1], &[1, 1, 0, 0]]);
        let s = chi_square(&m, &labels(&Y)).unwrap().scores;
        assert_eq!(s, vec![0.0, 4.0, 4.0]);
    }

    #[test]
    fn pcc_examples() {
        let m = binary(&[&[0, 0, 1, 1], &[1, 1, 0, 0], &[1, 1, 1, 1]]);
        let s = pearson(&m, &labels(&Y)).unwrap();
        assert!((s.scores[0] - 1.0).abs() < 1e-12);
        assert!((s.scores[1] + 1.0).abs() < 1e-12);
        assert_eq!(s.scores[2], 0.0);
        assert_eq!(select_top_k(&s, 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn degenerate_labels() {
        let m = binary(&[&[0, 1, 0, 1]]);
        assert_eq!(
            mutual_information(&m, &labels(&[1, 1, 1, 1])),
            Err(FeatselError::DegenerateLabels)
        );
        assert_eq!(
            t_test(&binary(&[&[0, 1, 0]]), &labels(&[0, 0, 1])),
            Err(FeatselError::ClassTooSmall)
        );
    }

    #[test]
    fn variance_examples() {
        let m = binary(&[&[0, 1, 0, 1], &[1, 1, 1, 1], &[0, 0, 0, 1]]);
        assert_eq!(column_variances(&m)[0], 0.25);
        assert_eq!(variance_threshold(&m, 0.2).unwrap(), vec![0]);
        assert_eq!(variance_threshold(&m, 0.0).unwrap(), vec![0, 2]);
        assert_eq!(
            variance_threshold(&m, -1.0),
            Err(FeatselError::InvalidThreshold)
        );
    }

    #[test]
    fn t_examples() {
        let m = binary(&[&[1, 1, 1, 1], &[0, 0, 1, 1], &[0, 1, 1, 1], &[1, 0, 1, 0]]);
        let s = t_test(&m, &labels(&Y)).unwrap().scores;
        assert_eq!(s[0], 0.0);
        assert!(s[1] > s[2] && s[1] > s[3]);
        let flipped: Vec<Label> = labels(&Y).iter().map(|l| l.flip()).collect();
        assert_eq!(t_test(&m, &flipped).unwrap().scores, s);
        // (1 - 0.5) / sqrt(0.5/2 + 0/2)
        assert!((s[2] - 0.5 / 0.25f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn wfs_examples() {
        let vocab =
            Vocabulary::new(vec!["a".into(), "b".into(), "c".into()], ValueKind::Count).unwrap();
        let ids: Vec<AppId> = (0..4u8).map(|i| AppId::of_bytes(&[i])).collect();
        let rows = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![2.0, 2.0, 0.0],
            vec![1.0, 1.0, 0.0],
        ];
        let m = FeatureMatrix::from_dense(vocab, ids, &rows).unwrap();
        let s = wfs(&m, &labels(&Y), WfsMode::CountSum).unwrap().scores;
        assert_eq!(s, vec![0.75, 1.0, 0.0]);
        let a = wfs(&m, &labels(&Y), WfsMode::AppCount).unwrap().scores;
        assert_eq!(a, vec![2.0 / 3.0, 1.0, 0.0]);
    }

    #[test]
    fn top_k_ties_and_range() {
        let s = SelectionScores {
            selector: Selector::Wfs,
            scores: vec![0.5, 0.9, 0.5, 0.1],
            ordering: ScoreOrdering::HigherBetter,
        };
        assert_eq!(select_top_k(&s, 2).unwrap(), vec![0, 1]);
        assert_eq!(select_top_k(&s, 4).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(
            select_top_k(&s, 5),
            Err(FeatselError::KOutOfRange { k: 5, n: 4 })
        );
        assert_eq!(
            select_top_k(&s, 0),
            Err(FeatselError::KOutOfRange { k: 0, n: 4 })
        );
        let s2 = SelectionScores {
            scores: vec![0.1, 0.9],
            ..s
        };
        assert_eq!(select_top_k(&s2, 1).unwrap(), vec![1]);
    }

    #[test]
    fn sails_union() {
        // f0 malware-only, f1 benign-only, f2 weakly malware, f3 weakly benign.
        let y = [0, 0, 0, 1, 1, 1];
        let m = binary(&[
            &[0, 0, 0, 1, 1, 1],
            &[1, 1, 1, 0, 0, 0],
            &[0, 0, 1, 1, 1, 0],
            &[1, 1, 0, 1, 0, 0],
        ]);
        let l = labels(&y);
        let sel = sails(&m, &l, SailsBase::ChiSquare, 1).unwrap();
        assert_eq!(sel, vec![0, 1]);
        assert_eq!(
            sails(&m, &l, SailsBase::MutualInformation, 4).unwrap(),
            vec![0, 1, 2, 3]
        );
        let [b, mw] = sails_scores(&m, &l, SailsBase::ChiSquare).unwrap();
        assert_eq!(b.scores[0], 0.0);
        assert_eq!(mw.scores[1], 0.0);
    }

    #[test]
    fn discretization() {
        assert_eq!(
            discretize(&[0.0, 0.0, 0.0, 5.0, 5.0], 10),
            vec![1, 1, 1, 2, 2]
        );
        let v: Vec<f64> = (0..20).map(f64::from).collect();
        let b = discretize(&v, 10);
        assert_eq!(b.iter().max(), Some(&9));
        assert!(b.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(b.iter().filter(|&&x| x == 0).count(), 2);
    }

    #[test]
    fn scores_file_round_trip() {
        let s = SelectionScores {
            selector: Selector::ChiSquare,
            scores: vec![0.5, 2.0],
            ordering: ScoreOrdering::HigherBetter,
        };
        let text = scores_to_text(&s, &["a".into(), "b".into()], "k=2");
        assert!(text.starts_with("# selector=chi_square"));
        let parsed: Vec<(String, f64)> = parse_scores_text(&text).unwrap();
        assert_eq!(parsed, vec![("b".into(), 2.0), ("a".into(), 0.5)]);
    }
}
