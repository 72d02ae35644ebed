//! Classical classifiers behind one train / predict contract.
//!
//! Training rows are put in app-id order before fitting, so results depend
//! only on the set of rows, the hyperparameters and the seed.

pub mod bayes;
pub mod linear;
pub mod neighbors;
pub mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{FeatureMatrix, ValueKind};
use crate::eval::{accuracy, stratified_kfold, ConfusionMatrix};
use crate::label::{class_counts, Label};
use crate::num::Scalar;

use bayes::NaiveBayes;
use linear::LinearModel;
use neighbors::KnnModel;
use tree::{Tree, TreeConfig};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("training labels contain a single class")]
    DegenerateLabels,
    #[error("{labels} labels for {rows} rows")]
    DimensionMismatch { rows: usize, labels: usize },
    #[error("matrix vocabulary {found} does not match the training vocabulary {expected}")]
    VocabMismatch { expected: String, found: String },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("grid is empty")]
    EmptyGrid,
    #[error("cross-validation: {0}")]
    Folds(String),
    #[error("model artifact: {0}")]
    Artifact(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DecisionTree,
    RandomForest,
    Knn,
    NaiveBayes,
    Logistic,
    LinearSvm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
        ModelKind::Knn,
        ModelKind::NaiveBayes,
        ModelKind::Logistic,
        ModelKind::LinearSvm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::DecisionTree => "DT",
            ModelKind::RandomForest => "RF",
            ModelKind::Knn => "kNN",
            ModelKind::NaiveBayes => "NB",
            ModelKind::Logistic => "LR",
            ModelKind::LinearSvm => "SVM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    Gini,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FractionRule {
    Sqrt,
    Log2,
}

/// Features examined per split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureFraction {
    Rule(FractionRule),
    Fraction(f64),
}

impl FeatureFraction {
    pub fn count(self, p: usize) -> usize {
        let m = match self {
            FeatureFraction::Rule(FractionRule::Sqrt) => (p as f64).sqrt().round() as usize,
            FeatureFraction::Rule(FractionRule::Log2) => (p as f64).log2().round() as usize,
            FeatureFraction::Fraction(f) => (f * p as f64).round() as usize,
        };
        m.clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub criterion: Criterion,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_leaf: 1,
            criterion: Criterion::Gini,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub criterion: Criterion,
    pub feature_fraction: FeatureFraction,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            criterion: Criterion::Gini,
            feature_fraction: FeatureFraction::Rule(FractionRule::Sqrt),
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
    pub metric: Metric,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k: 5,
            metric: Metric::Euclidean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NbVariant {
    /// Bernoulli for binary matrices, Gaussian otherwise.
    #[default]
    Auto,
    Bernoulli,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NbParams {
    pub variant: NbVariant,
    pub alpha: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams {
            variant: NbVariant::Auto,
            alpha: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            learning_rate: 0.5,
            epochs: 300,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, epochs: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hyperparams {
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    Knn(KnnParams),
    NaiveBayes(NbParams),
    Logistic(LogisticParams),
    LinearSvm(SvmParams),
}

impl Hyperparams {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::DecisionTree => Hyperparams::DecisionTree(TreeParams::default()),
            ModelKind::RandomForest => Hyperparams::RandomForest(ForestParams::default()),
            ModelKind::Knn => Hyperparams::Knn(KnnParams::default()),
            ModelKind::NaiveBayes => Hyperparams::NaiveBayes(NbParams::default()),
            ModelKind::Logistic => Hyperparams::Logistic(LogisticParams::default()),
            ModelKind::LinearSvm => Hyperparams::LinearSvm(SvmParams::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Hyperparams::DecisionTree(_) => ModelKind::DecisionTree,
            Hyperparams::RandomForest(_) => ModelKind::RandomForest,
            Hyperparams::Knn(_) => ModelKind::Knn,
            Hyperparams::NaiveBayes(_) => ModelKind::NaiveBayes,
            Hyperparams::Logistic(_) => ModelKind::Logistic,
            Hyperparams::LinearSvm(_) => ModelKind::LinearSvm,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidHyperparams(m.to_string()));
        let pos = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            Hyperparams::DecisionTree(t) if t.min_leaf == 0 || t.max_depth == Some(0) => {
                bad("tree counts must be >= 1")
            }
            Hyperparams::RandomForest(f)
                if f.n_trees == 0 || f.min_leaf == 0 || f.max_depth == Some(0) =>
            {
                bad("forest counts must be >= 1")
            }
            Hyperparams::RandomForest(ForestParams {
                feature_fraction: FeatureFraction::Fraction(x),
                ..
            }) if !(x > 0.0 && x <= 1.0) => bad("feature_fraction must be in (0, 1]"),
            Hyperparams::Knn(k) if k.k == 0 => bad("k must be >= 1"),
            Hyperparams::NaiveBayes(nb) if !pos(nb.alpha) => bad("alpha must be > 0"),
            Hyperparams::Logistic(l)
                if !pos(l.learning_rate) || l.epochs == 0 || !l.l2.is_finite() || l.l2 < 0.0 =>
            {
                bad("logistic needs learning_rate > 0, epochs >= 1, l2 >= 0")
            }
            Hyperparams::LinearSvm(s) if !pos(s.c) || s.epochs == 0 => {
                bad("svm needs C > 0 and epochs >= 1")
            }
            _ => Ok(()),
        }
    }
}

/// Default search grids. These are toolkit choices.
pub fn default_grid(kind: ModelKind) -> Vec<Hyperparams> {
    match kind {
        ModelKind::DecisionTree => [None, Some(10), Some(20)]
            .into_iter()
            .map(|d| {
                Hyperparams::DecisionTree(TreeParams {
                    max_depth: d,
                    ..Default::default()
                })
            })
            .collect(),
        ModelKind::RandomForest => vec![Hyperparams::RandomForest(ForestParams::default())],
        ModelKind::Knn => [1, 3, 5, 10]
            .into_iter()
            .map(|k| {
                Hyperparams::Knn(KnnParams {
                    k,
                    ..Default::default()
                })
            })
            .collect(),
        ModelKind::NaiveBayes => vec![Hyperparams::NaiveBayes(NbParams::default())],
        ModelKind::Logistic => [1e-4, 1e-2]
            .into_iter()
            .map(|l2| {
                Hyperparams::Logistic(LogisticParams {
                    l2,
                    ..Default::default()
                })
            })
            .collect(),
        ModelKind::LinearSvm => [0.1, 1.0, 10.0]
            .into_iter()
            .map(|c| {
                Hyperparams::LinearSvm(SvmParams {
                    c,
                    ..Default::default()
                })
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams<T> {
    Tree(Tree<T>),
    Forest(Vec<Tree<T>>),
    Knn(KnnModel<T>),
    Bayes(NaiveBayes<T>),
    Logistic(LinearModel<T>),
    Svm(LinearModel<T>),
}

/// Fitted classifier with everything needed to check its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel<T> {
    pub version: u32,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub vocab_fingerprint: String,
    pub n_features: usize,
    pub params: ModelParams<T>,
}

fn check_shape<T: Scalar>(m: &FeatureMatrix<T>, labels: &[Label]) -> Result<(), ModelError> {
    if m.n_rows() != labels.len() {
        return Err(ModelError::DimensionMismatch {
            rows: m.n_rows(),
            labels: labels.len(),
        });
    }
    let c = class_counts(labels);
    if c[0] == 0 || c[1] == 0 {
        return Err(ModelError::DegenerateLabels);
    }
    Ok(())
}

pub fn train<T: Scalar>(
    hp: &Hyperparams,
    m: &FeatureMatrix<T>,
    labels: &[Label],
    seed: u64,
) -> Result<TrainedModel<T>, ModelError> {
    hp.validate()?;
    check_shape(m, labels)?;
    let order = m.canonical_order();
    let x: Vec<Vec<T>> = order.iter().map(|&r| m.dense_row(r)).collect();
    let y: Vec<Label> = order.iter().map(|&r| labels[r]).collect();
    let p = m.n_cols();
    let params = match *hp {
        Hyperparams::DecisionTree(t) => {
            let cfg = TreeConfig {
                max_depth: t.max_depth,
                min_leaf: t.min_leaf,
                criterion: t.criterion,
                features_per_split: None,
            };
            let rows: Vec<usize> = (0..x.len()).collect();
            ModelParams::Tree(tree::fit_tree(&x, &y, &rows, &cfg, tree::tree_rng(seed, 0)))
        }
        Hyperparams::RandomForest(f) => {
            let cfg = TreeConfig {
                max_depth: f.max_depth,
                min_leaf: f.min_leaf,
                criterion: f.criterion,
                features_per_split: Some(f.feature_fraction.count(p)),
            };
            ModelParams::Forest(tree::fit_forest(&x, &y, &cfg, f.n_trees, f.bootstrap, seed))
        }
        Hyperparams::Knn(k) => ModelParams::Knn(KnnModel {
            k: k.k,
            metric: k.metric,
            rows: x,
            labels: y,
        }),
        Hyperparams::NaiveBayes(nb) => {
            let bernoulli = match nb.variant {
                NbVariant::Auto => m.kind() == ValueKind::Binary,
                NbVariant::Bernoulli => true,
                NbVariant::Gaussian => false,
            };
            ModelParams::Bayes(if bernoulli {
                NaiveBayes::fit_bernoulli(&x, &y, T::lit(nb.alpha))
            } else {
                NaiveBayes::fit_gaussian(&x, &y)
            })
        }
        Hyperparams::Logistic(l) => ModelParams::Logistic(linear::fit_logistic(
            &x,
            &y,
            T::lit(l.learning_rate),
            l.epochs,
            T::lit(l.l2),
        )),
        Hyperparams::LinearSvm(s) => {
            ModelParams::Svm(linear::fit_svm(&x, &y, T::lit(s.c), s.epochs, seed))
        }
    };
    Ok(TrainedModel {
        version: MODEL_FORMAT_VERSION,
        hyperparams: *hp,
        seed,
        vocab_fingerprint: m.vocab().fingerprint(),
        n_features: p,
        params,
    })
}

impl<T: Scalar> TrainedModel<T> {
    /// Scores above this value predict malware.
    pub fn threshold(&self) -> T {
        match self.params {
            ModelParams::Svm(_) => T::zero(),
            _ => T::lit(0.5),
        }
    }

    fn check_vocab(&self, m: &FeatureMatrix<T>) -> Result<(), ModelError> {
        let found = m.vocab().fingerprint();
        if found != self.vocab_fingerprint || m.n_cols() != self.n_features {
            return Err(ModelError::VocabMismatch {
                expected: self.vocab_fingerprint.clone(),
                found,
            });
        }
        Ok(())
    }

    pub fn score_row(&self, x: &[T]) -> T {
        match &self.params {
            ModelParams::Tree(t) => t.score(x),
            ModelParams::Forest(ts) => {
                let votes = ts.iter().filter(|t| t.score(x) > T::lit(0.5)).count();
                T::from_count(votes) / T::from_count(ts.len().max(1))
            }
            ModelParams::Knn(k) => k.score(x),
            ModelParams::Bayes(nb) => nb.posterior(x)[1],
            ModelParams::Logistic(l) => linear::sigmoid(l.margin(x)),
            ModelParams::Svm(l) => l.margin(x),
        }
    }

    /// Malware score per row; see [`TrainedModel::threshold`].
    pub fn predict_scores(&self, m: &FeatureMatrix<T>) -> Result<Vec<T>, ModelError> {
        self.check_vocab(m)?;
        Ok((0..m.n_rows())
            .map(|r| self.score_row(&m.dense_row(r)))
            .collect())
    }

    pub fn predict(&self, m: &FeatureMatrix<T>) -> Result<Vec<Label>, ModelError> {
        let t = self.threshold();
        Ok(self
            .predict_scores(m)?
            .into_iter()
            .map(|s| Label::from_bool(s > t))
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model parameters are finite")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let m: TrainedModel<T> =
            serde_json::from_str(text).map_err(|e| ModelError::Artifact(e.to_string()))?;
        if m.version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Artifact(format!(
                "unsupported version {}",
                m.version
            )));
        }
        Ok(m)
    }
}

/// Mean inner-CV accuracy of each grid point and the index of the best
/// one; ties keep the earlier point.
pub fn grid_search_scores<T: Scalar>(
    grid: &[Hyperparams],
    m: &FeatureMatrix<T>,
    labels: &[Label],
    folds: usize,
    seed: u64,
) -> Result<(usize, Vec<f64>), ModelError> {
    if grid.is_empty() {
        return Err(ModelError::EmptyGrid);
    }
    check_shape(m, labels)?;
    let splits = stratified_kfold(m.row_ids(), labels, folds, seed)
        .map_err(|e| ModelError::Folds(e.to_string()))?;
    let mut means = Vec::with_capacity(grid.len());
    for hp in grid {
        let mut total = 0.0;
        for f in &splits {
            let train_m = m
                .select_rows(&f.train)
                .map_err(|e| ModelError::Folds(e.to_string()))?;
            let test_m = m
                .select_rows(&f.test)
                .map_err(|e| ModelError::Folds(e.to_string()))?;
            let train_y: Vec<Label> = f.train.iter().map(|&i| labels[i]).collect();
            let test_y: Vec<Label> = f.test.iter().map(|&i| labels[i]).collect();
            let model = train(hp, &train_m, &train_y, seed)?;
            let pred = model.predict(&test_m)?;
            total += accuracy(&ConfusionMatrix::from_predictions(&test_y, &pred));
        }
        means.push(total / splits.len() as f64);
    }
    let mut best = 0;
    for (i, &s) in means.iter().enumerate() {
        if s > means[best] {
            best = i;
        }
    }
    Ok((best, means))
}

pub fn grid_search<T: Scalar>(
    grid: &[Hyperparams],
    m: &FeatureMatrix<T>,
    labels: &[Label],
    folds: usize,
    seed: u64,
) -> Result<Hyperparams, ModelError> {
    let (best, _) = grid_search_scores(grid, m, labels, folds, seed)?;
    Ok(grid[best])
}
