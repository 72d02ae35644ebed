//! Pipeline configuration file (TOML).
//!
//! ```toml
//! seed = 7
//!
//! [extract]
//! api_lists = true            # add restricted / suspicious / used-permission records
//! # restricted = "lists/restricted.txt"
//! # suspicious = "lists/suspicious.txt"
//! # permission_map = "lists/permissions.tsv"
//! # platform_prefixes = "lists/prefixes.txt"
//! route_cap = 10000
//!
//! [encode]
//! representation = "usage"    # usage | frequency | opcode_ngram | syscall_ngram | sequence | tcp
//! source = "static"           # static | dynamic | both (usage only)
//! # kinds = ["ApiCall", "RequestedPermission"]
//! min_support = 1
//! n = 2
//! max_len = 2048
//!
//! [select]
//! method = "top_k"
//! scorer = "mutual_information"
//! k = 50
//!
//! [train]
//! grid = false
//! inner_folds = 3
//! [train.model]
//! kind = "random_forest"
//! n_trees = 100
//!
//! [eval]
//! k = 10
//! alpha = 0.05
//! [[eval.pipelines]]
//! name = "rf"
//! selection = { method = "top_k", scorer = "mutual_information", k = 50 }
//! hyperparams = { kind = "random_forest" }
//!
//! [ensemble]
//! max_size = 5
//! cap = 4096
//! top_pipelines = 3
//! show = 10
//! ```
//!
//! Every key is optional. Without `[[eval.pipelines]]` the eval stage runs
//! one pipeline per model kind, all using the `[select]` step.

use std::path::{Path, PathBuf};

use droidlens::ensemble::DEFAULT_ENUMERATION_CAP;
use droidlens::eval::Pipeline;
use droidlens::featsel::SelectionSpec;
use droidlens::models::{ForestParams, Hyperparams, ModelKind};
use droidlens::FeatureKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub extract: ExtractConfig,
    pub encode: EncodeConfig,
    pub select: Option<SelectionSpec>,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub ensemble: EnsembleConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub api_lists: bool,
    pub restricted: Option<PathBuf>,
    pub suspicious: Option<PathBuf>,
    pub permission_map: Option<PathBuf>,
    pub platform_prefixes: Option<PathBuf>,
    pub route_cap: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            api_lists: true,
            restricted: None,
            suspicious: None,
            permission_map: None,
            platform_prefixes: None,
            route_cap: droidlens::encoding::sequence::DEFAULT_ROUTE_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    #[default]
    Usage,
    Frequency,
    OpcodeNgram,
    SyscallNgram,
    Sequence,
    Tcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceSel {
    #[default]
    Static,
    Dynamic,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodeConfig {
    pub representation: Representation,
    pub source: SourceSel,
    pub kinds: Option<Vec<FeatureKind>>,
    pub min_support: usize,
    pub n: usize,
    pub max_len: usize,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            representation: Representation::Usage,
            source: SourceSel::Static,
            kinds: None,
            min_support: 1,
            n: 2,
            max_len: droidlens::encoding::sequence::DEFAULT_MAX_LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: Hyperparams,
    pub grid: bool,
    pub inner_folds: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: Hyperparams::RandomForest(ForestParams::default()),
            grid: false,
            inner_folds: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k: usize,
    pub alpha: f64,
    pub metric: String,
    pub pipelines: Vec<Pipeline>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 10,
            alpha: 0.05,
            metric: "accuracy".into(),
            pipelines: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub max_size: usize,
    pub cap: usize,
    /// Only the best `n` pipelines by mean accuracy take part.
    pub top_pipelines: Option<usize>,
    pub members: Option<Vec<String>>,
    pub show: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            max_size: 5,
            cap: DEFAULT_ENUMERATION_CAP,
            top_pipelines: None,
            members: None,
            show: 10,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config, CliError> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: Config = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.eval.k < 2 {
            return Err(CliError::Config("eval.k must be at least 2".into()));
        }
        if !(self.eval.alpha > 0.0 && self.eval.alpha < 1.0) {
            return Err(CliError::Config("eval.alpha must be in (0, 1)".into()));
        }
        if droidlens::eval::MetricSet::NAMES
            .iter()
            .all(|m| *m != self.eval.metric)
        {
            return Err(CliError::Config(format!(
                "unknown metric `{}`",
                self.eval.metric
            )));
        }
        let e = &self.encode;
        let ngram = matches!(
            e.representation,
            Representation::OpcodeNgram | Representation::SyscallNgram
        );
        if ngram && e.n == 0 {
            return Err(CliError::Config("encode.n must be at least 1".into()));
        }
        if e.source == SourceSel::Both && e.representation != Representation::Usage {
            return Err(CliError::Config(
                "source = \"both\" needs the usage representation".into(),
            ));
        }
        if e.representation == Representation::Sequence && e.max_len == 0 {
            return Err(CliError::Config("encode.max_len must be at least 1".into()));
        }
        self.train
            .model
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        for p in &self.eval.pipelines {
            p.hyperparams
                .validate()
                .map_err(|e| CliError::Config(format!("pipeline {}: {e}", p.name)))?;
        }
        if self.ensemble.max_size < 3 {
            return Err(CliError::Config(
                "ensemble.max_size must be at least 3".into(),
            ));
        }
        Ok(())
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(DEFAULT_SEED)
    }

    pub fn selection(&self) -> SelectionSpec {
        self.select.unwrap_or(SelectionSpec::All)
    }

    /// Configured pipelines, or one per model kind with the `[select]` step.
    pub fn pipelines(&self) -> Vec<Pipeline> {
        if !self.eval.pipelines.is_empty() {
            return self.eval.pipelines.clone();
        }
        ModelKind::ALL
            .iter()
            .map(|&k| Pipeline::new(k.name(), self.selection(), Hyperparams::default_for(k)))
            .collect()
    }
}

/// SHA-256 of the JSON form of a config section.
pub fn section_hash<S: Serialize>(section: &S) -> String {
    let json = serde_json::to_string(section).expect("config sections serialize");
    hex::encode(Sha256::digest(json.as_bytes()))
}
