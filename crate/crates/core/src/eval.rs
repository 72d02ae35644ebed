//! Stratified cross-validation, the binary metric set and the
//! Kruskal-Wallis / Dunn comparison protocol.
//!
//! Metrics and test statistics are `f64` regardless of the matrix scalar.
//! Metric averages are unweighted over folds and standard deviations use
//! the population form. The comparison protocol treats per-fold scores of
//! different pipelines as independent samples even though they share
//! folds; a paired test would be stricter.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

use crate::encoding::{EncodingError, FeatureMatrix};
use crate::featsel::{fit_selection, FeatselError, SelectionSpec};
use crate::label::Label;
use crate::models::{grid_search, train, Hyperparams, ModelError};
use crate::num::Scalar;
use crate::report::AppId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("confusion matrix is empty")]
    EmptyConfusion,
    #[error("k = {0}: need at least 2 folds")]
    InvalidFolds(usize),
    #[error("class {label} has {size} rows, fewer than k = {k}")]
    ClassTooSmall { label: Label, size: usize, k: usize },
    #[error("{ids} row ids for {labels} labels")]
    LengthMismatch { ids: usize, labels: usize },
    #[error("selection for fold {fold} was fitted on test row {app_id}")]
    Leakage { fold: usize, app_id: String },
    #[error("need at least two groups")]
    TooFewGroups,
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error(transparent)]
    Featsel(#[from] FeatselError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    /// Malware is the positive class.
    pub fn from_predictions(truth: &[Label], pred: &[Label]) -> Self {
        let mut c = ConfusionMatrix::default();
        for (t, p) in truth.iter().zip(pred) {
            match (t.is_malware(), p.is_malware()) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub f1: f64,
    pub tpr: f64,
    pub tnr: f64,
}

impl MetricSet {
    pub const NAMES: [&'static str; 5] = ["accuracy", "f1", "precision", "tpr", "tnr"];

    /// Values in [`MetricSet::NAMES`] order.
    pub fn to_array(&self) -> [f64; 5] {
        [self.accuracy, self.f1, self.precision, self.tpr, self.tnr]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        MetricSet {
            accuracy: a[0],
            f1: a[1],
            precision: a[2],
            tpr: a[3],
            tnr: a[4],
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Self::NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.to_array()[i])
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// A zero denominator gives 0 for that metric.
pub fn metrics_from_confusion(c: &ConfusionMatrix) -> Result<MetricSet, EvalError> {
    if c.total() == 0 {
        return Err(EvalError::EmptyConfusion);
    }
    Ok(MetricSet {
        accuracy: ratio(c.tp + c.tn, c.total()),
        precision: ratio(c.tp, c.tp + c.fp),
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        tpr: ratio(c.tp, c.tp + c.fn_),
        tnr: ratio(c.tn, c.tn + c.fp),
    })
}

/// Accuracy, or 0 for an empty matrix.
pub fn accuracy(c: &ConfusionMatrix) -> f64 {
    ratio(c.tp + c.tn, c.total())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Each class is put in app-id order, shuffled with `seed` and dealt
/// round-robin over the folds. The deal position carries over from one
/// class to the next so fold sizes differ by at most one.
pub fn stratified_kfold(
    ids: &[AppId],
    labels: &[Label],
    k: usize,
    seed: u64,
) -> Result<Vec<Fold>, EvalError> {
    if ids.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            ids: ids.len(),
            labels: labels.len(),
        });
    }
    if k < 2 {
        return Err(EvalError::InvalidFolds(k));
    }
    let mut tests = vec![Vec::new(); k];
    let mut pos = 0usize;
    for (stream, label) in [Label::Benign, Label::Malware].into_iter().enumerate() {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if rows.len() < k {
            return Err(EvalError::ClassTooSmall {
                label,
                size: rows.len(),
                k,
            });
        }
        rows.sort_by(|&a, &b| ids[a].cmp(&ids[b]).then(a.cmp(&b)));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream as u64);
        rows.shuffle(&mut rng);
        for r in rows {
            tests[pos % k].push(r);
            pos += 1;
        }
    }
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let held: BTreeSet<usize> = test.iter().copied().collect();
            let train = (0..labels.len()).filter(|i| !held.contains(i)).collect();
            Fold { train, test }
        })
        .collect())
}

/// SHA-256 over the sorted, newline-joined app ids.
pub fn row_set_fingerprint(ids: &[AppId]) -> String {
    let mut sorted: Vec<&str> = ids.iter().map(AppId::as_str).collect();
    sorted.sort_unstable();
    let mut h = Sha256::new();
    for id in sorted {
        h.update(id.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Fails if any test row took part in fitting.
pub fn check_no_leakage(fold: usize, fitted: &[AppId], test: &[AppId]) -> Result<(), EvalError> {
    let fitted: BTreeSet<&AppId> = fitted.iter().collect();
    match test.iter().find(|id| fitted.contains(id)) {
        Some(id) => Err(EvalError::Leakage {
            fold,
            app_id: id.as_str().to_string(),
        }),
        None => Ok(()),
    }
}

fn default_inner_folds() -> usize {
    3
}

/// Feature selection followed by a classifier. A non-empty `grid` is
/// searched inside each training fold and replaces `hyperparams`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub name: String,
    pub selection: SelectionSpec,
    pub hyperparams: Hyperparams,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<Hyperparams>,
    #[serde(default = "default_inner_folds")]
    pub inner_folds: usize,
}

impl Pipeline {
    pub fn new(name: &str, selection: SelectionSpec, hyperparams: Hyperparams) -> Self {
        Pipeline {
            name: name.to_string(),
            selection,
            hyperparams,
            grid: Vec::new(),
            inner_folds: default_inner_folds(),
        }
    }

    pub fn describe(&self) -> String {
        let model = if self.grid.is_empty() {
            self.hyperparams.kind().name().to_string()
        } else {
            format!(
                "{} (grid of {})",
                self.hyperparams.kind().name(),
                self.grid.len()
            )
        };
        format!("{} + {}", self.selection.describe(), model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
    pub n_features: usize,
    pub hyperparams: Hyperparams,
    /// Fingerprint of the rows the selector and model were fitted on.
    pub train_fingerprint: String,
    pub test_ids: Vec<AppId>,
    pub truth: Vec<Label>,
    pub predictions: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub pipeline: String,
    pub description: String,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    pub mean: MetricSet,
    pub std: MetricSet,
}

impl CvResult {
    /// Identifies the fold partition; equal for results computed on the
    /// same rows with the same `k` and seed.
    pub fn folds_fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for f in &self.folds {
            h.update(row_set_fingerprint(&f.test_ids).as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn per_fold(&self, metric: &str) -> Vec<f64> {
        self.folds
            .iter()
            .filter_map(|f| f.metrics.get(metric))
            .collect()
    }
}

/// Per-metric mean and population standard deviation.
pub fn summarize(metrics: &[MetricSet]) -> (MetricSet, MetricSet) {
    let n = metrics.len().max(1) as f64;
    let mut mean = [0.0; 5];
    for m in metrics {
        for (a, v) in mean.iter_mut().zip(m.to_array()) {
            *a += v / n;
        }
    }
    let mut var = [0.0; 5];
    for m in metrics {
        for ((a, v), mu) in var.iter_mut().zip(m.to_array()).zip(mean) {
            *a += (v - mu) * (v - mu) / n;
        }
    }
    (
        MetricSet::from_array(mean),
        MetricSet::from_array(var.map(f64::sqrt)),
    )
}

fn run_fold<T: Scalar>(
    pipeline: &Pipeline,
    m: &FeatureMatrix<T>,
    labels: &[Label],
    index: usize,
    fold: &Fold,
    seed: u64,
) -> Result<FoldResult, EvalError> {
    let train_m = m.select_rows(&fold.train)?;
    let train_y: Vec<Label> = fold.train.iter().map(|&i| labels[i]).collect();
    let test_ids: Vec<AppId> = fold.test.iter().map(|&i| m.row_ids()[i].clone()).collect();
    let truth: Vec<Label> = fold.test.iter().map(|&i| labels[i]).collect();

    let cols = fit_selection(&pipeline.selection, &train_m, &train_y)?;
    check_no_leakage(index, train_m.row_ids(), &test_ids)?;

    let train_r = train_m.select_columns(&cols)?;
    let test_r = m.select_rows(&fold.test)?.select_columns(&cols)?;
    let hp = if pipeline.grid.is_empty() {
        pipeline.hyperparams
    } else {
        grid_search(
            &pipeline.grid,
            &train_r,
            &train_y,
            pipeline.inner_folds,
            seed,
        )?
    };
    let model = train(&hp, &train_r, &train_y, seed)?;
    let predictions = model.predict(&test_r)?;
    let confusion = ConfusionMatrix::from_predictions(&truth, &predictions);
    Ok(FoldResult {
        fold: index,
        confusion,
        metrics: metrics_from_confusion(&confusion)?,
        n_features: cols.len(),
        hyperparams: hp,
        train_fingerprint: row_set_fingerprint(train_m.row_ids()),
        test_ids,
        truth,
        predictions,
    })
}

/// Folds run in parallel; results are in fold order.
pub fn cross_validate<T: Scalar>(
    pipeline: &Pipeline,
    m: &FeatureMatrix<T>,
    labels: &[Label],
    k: usize,
    seed: u64,
) -> Result<CvResult, EvalError> {
    let folds = stratified_kfold(m.row_ids(), labels, k, seed)?;
    let results = folds
        .par_iter()
        .enumerate()
        .map(|(i, f)| run_fold(pipeline, m, labels, i, f, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let per: Vec<MetricSet> = results.iter().map(|r| r.metrics).collect();
    let (mean, std) = summarize(&per);
    Ok(CvResult {
        pipeline: pipeline.name.clone(),
        description: pipeline.describe(),
        k,
        seed,
        folds: results,
        mean,
        std,
    })
}

/// Average ranks (1-based) of `values`; ties share the mean rank.
fn average_ranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut tie_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        let t = (j - i + 1) as f64;
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    (ranks, tie_sum)
}

struct Pooled {
    mean_ranks: Vec<f64>,
    sizes: Vec<usize>,
    n: f64,
    tie_sum: f64,
}

fn pool(groups: &[Vec<f64>]) -> Result<Pooled, EvalError> {
    if groups.len() < 2 {
        return Err(EvalError::TooFewGroups);
    }
    if let Some(i) = groups.iter().position(Vec::is_empty) {
        return Err(EvalError::EmptyGroup(i));
    }
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let (ranks, tie_sum) = average_ranks(&all);
    let mut mean_ranks = Vec::with_capacity(groups.len());
    let mut at = 0;
    for g in groups {
        let s: f64 = ranks[at..at + g.len()].iter().sum();
        mean_ranks.push(s / g.len() as f64);
        at += g.len();
    }
    Ok(Pooled {
        mean_ranks,
        sizes: groups.iter().map(Vec::len).collect(),
        n: all.len() as f64,
        tie_sum,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KruskalWallis {
    pub h: f64,
    pub p: f64,
    pub df: usize,
}

/// Tie-corrected H with a chi-square p-value on `groups - 1` degrees of
/// freedom. When every value is identical H is 0 and p is 1.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KruskalWallis, EvalError> {
    let pl = pool(groups)?;
    let df = groups.len() - 1;
    let n = pl.n;
    let correction = 1.0 - pl.tie_sum / (n * n * n - n);
    if correction <= 0.0 {
        return Ok(KruskalWallis { h: 0.0, p: 1.0, df });
    }
    let s: f64 = pl
        .mean_ranks
        .iter()
        .zip(&pl.sizes)
        .map(|(r, &ni)| ni as f64 * r * r)
        .sum();
    let h = ((12.0 / (n * (n + 1.0)) * s - 3.0 * (n + 1.0)) / correction).max(0.0);
    let p = ChiSquared::new(df as f64)
        .expect("df >= 1")
        .sf(h)
        .clamp(0.0, 1.0);
    Ok(KruskalWallis { h, p, df })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseResult {
    pub a: String,
    pub b: String,
    pub z: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

/// Dunn's pairwise z tests on pooled mean ranks, Bonferroni-adjusted over
/// all `g(g-1)/2` pairs. Pairs are in `(i, j)`, `i < j` order.
pub fn dunns_test(
    names: &[String],
    groups: &[Vec<f64>],
    alpha: f64,
) -> Result<Vec<PairwiseResult>, EvalError> {
    let pl = pool(groups)?;
    let g = groups.len();
    let m = (g * (g - 1) / 2) as f64;
    let n = pl.n;
    let base = n * (n + 1.0) / 12.0 - pl.tie_sum / (12.0 * (n - 1.0).max(1.0));
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::new();
    for i in 0..g {
        for j in i + 1..g {
            let var = base * (1.0 / pl.sizes[i] as f64 + 1.0 / pl.sizes[j] as f64);
            let z = if var > 0.0 {
                (pl.mean_ranks[i] - pl.mean_ranks[j]) / var.sqrt()
            } else {
                0.0
            };
            let p_raw = (2.0 * normal.sf(z.abs())).min(1.0);
            let p_adjusted = (p_raw * m).min(1.0);
            out.push(PairwiseResult {
                a: names.get(i).cloned().unwrap_or_else(|| i.to_string()),
                b: names.get(j).cloned().unwrap_or_else(|| j.to_string()),
                z,
                p_raw,
                p_adjusted,
                significant: p_adjusted < alpha,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    pub metric: String,
    pub groups: Vec<String>,
    pub h: f64,
    pub p: f64,
    pub alpha: f64,
    /// Empty unless `p < alpha`.
    pub pairwise: Vec<PairwiseResult>,
}

/// Omnibus test, then pairwise tests only if it rejects at `alpha`.
pub fn compare_groups(
    metric: &str,
    names: &[String],
    groups: &[Vec<f64>],
    alpha: f64,
) -> Result<StatTestResult, EvalError> {
    let kw = kruskal_wallis(groups)?;
    let pairwise = if kw.p < alpha {
        dunns_test(names, groups, alpha)?
    } else {
        Vec::new()
    };
    Ok(StatTestResult {
        metric: metric.to_string(),
        groups: names.to_vec(),
        h: kw.h,
        p: kw.p,
        alpha,
        pairwise,
    })
}

/// Compares pipelines on one metric using their per-fold values.
pub fn compare_pipelines(
    results: &[CvResult],
    metric: &str,
    alpha: f64,
) -> Result<StatTestResult, EvalError> {
    let names: Vec<String> = results.iter().map(|r| r.pipeline.clone()).collect();
    let groups: Vec<Vec<f64>> = results.iter().map(|r| r.per_fold(metric)).collect();
    compare_groups(metric, &names, &groups, alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub seed: u64,
    pub results: Vec<CvResult>,
    pub stat_tests: Vec<StatTestResult>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are finite")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub fn mean_pm_std(mean: f64, std: f64) -> String {
    format!("{mean:.3} ± {std:.3}")
}

/// Plain-text table of `mean ± std` per metric, one row per pipeline.
pub fn render_table(results: &[CvResult]) -> String {
    let header = ["Pipeline", "Accuracy", "F1", "Precision", "TPR", "TNR"];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in results {
        let mut row = vec![r.pipeline.clone()];
        for (m, s) in r.mean.to_array().into_iter().zip(r.std.to_array()) {
            row.push(mean_pm_std(m, s));
        }
        rows.push(row);
    }
    format_rows(&rows)
}

pub(crate) fn format_rows(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(s, &w)| format!("{s:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            let _ = writeln!(out, "{}", rule.join("-+-"));
        }
    }
    out
}
