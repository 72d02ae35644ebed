use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use droidlens::apk::method::PlatformPrefixes;
use droidlens::apk::patterns::{self, ApiPattern};
use droidlens::apk::{self, CallGraph};
use droidlens::encoding::sequence::{encode_sequence, extract_api_routes, ngram_counts};
use droidlens::encoding::vocab::vocab_from_rows;
use droidlens::encoding::{
    api_count_table, build_count_vocab, build_vocab, encode_frequency, encode_numeric,
    encode_usage, opcode_ngram_table, ValueKind,
};
use droidlens::ensemble::{enumerate_ensembles, render_ensembles};
use droidlens::eval::{compare_pipelines, cross_validate, render_table, CvResult, EvalReport};
use droidlens::featsel::{fit_selection, score, scores_to_text, SelectionSpec};
use droidlens::fixtures::{parse_fixture_spec, SpecError};
use droidlens::models::{default_grid, grid_search, train};
use droidlens::report::Source;
use droidlens::trace::flows::{http_features, http_report, tcp_features};
use droidlens::trace::pcap::read_pcap;
use droidlens::trace::strace::parse_strace_text;
use droidlens::trace::{parse_api_log_text, TargetFilter, TcpFlowFeatures, TraceError};
use droidlens::{AppId, FeatureKind, FeatureMatrix, FeatureReport, Label};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{
    io_err, read_artifact, read_artifact_text, sha256_hex, write_file, Stage, TOOL_VERSION,
};
use crate::config::{section_hash, Config, ExtractConfig, Representation, SourceSel};
use crate::manifest::{load_manifest, ManifestRow, HEADER};
use crate::{CliError, Command, Common};

pub const REPORTS_DIR: &str = "reports";
pub const INDEX: &str = "index.json";
pub const MATRIX: &str = "matrix.txt";
pub const LABELS: &str = "matrix.labels.csv";
pub const SELECTED: &str = "selected.txt";
pub const SCORES: &str = "scores.txt";
pub const MODEL: &str = "model.json";
pub const EVAL_JSON: &str = "eval.json";
pub const EVAL_TXT: &str = "eval.txt";
pub const ENSEMBLES_JSON: &str = "ensembles.json";
pub const ENSEMBLES_TXT: &str = "ensembles.txt";

pub fn dispatch(cmd: &Command) -> Result<(), CliError> {
    let common = match cmd {
        Command::Extract(c)
        | Command::Encode(c)
        | Command::Select(c)
        | Command::Train(c)
        | Command::Eval(c)
        | Command::Ensemble(c) => c,
        Command::GenFixtures { common, .. } => common,
    };
    let cfg = Config::load(common.config.as_deref())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cmd {
        Command::Extract(c) => {
            let s = extract(c, &cfg)?;
            println!(
                "extracted {}, cached {}, failed {}",
                s.parsed,
                s.cached,
                s.failed.len()
            );
            if s.failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::PartialFailure(s.failed.len(), s.total))
            }
        }
        Command::Encode(c) => encode(c, &cfg),
        Command::Select(c) => select(c, &cfg),
        Command::Train(c) => train_model(c, &cfg),
        Command::Eval(c) => {
            let report = evaluate(c, &cfg)?;
            print!("{}", eval_text(&report));
            Ok(())
        }
        Command::Ensemble(c) => {
            print!("{}", ensemble(c, &cfg)?);
            Ok(())
        }
        Command::GenFixtures { common, spec } => gen_fixtures(common, spec).map(|n| {
            println!("generated {n} apps");
        }),
    })
}

// ---------------------------------------------------------------- extract

/// One manifest row's report files and the hash of the inputs they came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub label: Label,
    pub key: String,
    /// File name to SHA-256.
    pub outputs: BTreeMap<String, String>,
}

/// `reports/index.json`, keyed by app id.
pub type ReportIndex = BTreeMap<String, IndexEntry>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractSummary {
    pub total: usize,
    pub parsed: usize,
    pub cached: usize,
    pub failed: Vec<(AppId, String)>,
}

struct Tables {
    prefixes: PlatformPrefixes,
    restricted: Vec<ApiPattern>,
    suspicious: Vec<ApiPattern>,
    permissions: Vec<(ApiPattern, String)>,
    api_lists: bool,
    route_cap: usize,
}

fn read_config_file(p: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
}

impl Tables {
    fn load(cfg: &ExtractConfig) -> Result<Self, CliError> {
        let text = |p: &Option<PathBuf>, default: &str| -> Result<String, CliError> {
            p.as_deref()
                .map_or_else(|| Ok(default.to_string()), read_config_file)
        };
        let bad = |e: patterns::PatternError| CliError::Config(e.to_string());
        Ok(Tables {
            prefixes: match &cfg.platform_prefixes {
                Some(p) => PlatformPrefixes::parse(&read_config_file(p)?),
                None => PlatformPrefixes::default(),
            },
            restricted: patterns::parse_pattern_file(&text(
                &cfg.restricted,
                patterns::SAMPLE_RESTRICTED,
            )?)
            .map_err(bad)?,
            suspicious: patterns::parse_pattern_file(&text(
                &cfg.suspicious,
                patterns::SAMPLE_SUSPICIOUS,
            )?)
            .map_err(bad)?,
            permissions: patterns::parse_permission_map(&text(
                &cfg.permission_map,
                patterns::SAMPLE_PERMISSION_MAP,
            )?)
            .map_err(bad)?,
            api_lists: cfg.api_lists,
            route_cap: cfg.route_cap,
        })
    }
}

fn read_input(p: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()))
}

fn row_inputs(row: &ManifestRow) -> [(&'static str, Option<&PathBuf>); 5] {
    [
        ("apk", row.apk.as_ref()),
        ("trace", row.trace.as_ref()),
        ("pcap", row.pcap.as_ref()),
        ("api_log", row.api_log.as_ref()),
        ("callgraph", row.callgraph.as_ref()),
    ]
}

fn cache_key(row: &ManifestRow, config_hash: &str) -> Result<String, String> {
    let mut s = format!(
        "{TOOL_VERSION}\n{config_hash}\n{}\n",
        row.package.as_deref().unwrap_or("")
    );
    for (field, p) in row_inputs(row) {
        if let Some(p) = p {
            s.push_str(&format!("{field}={}\n", sha256_hex(&read_input(p)?)));
        }
    }
    Ok(sha256_hex(s.as_bytes()))
}

fn lines_text<S: AsRef<str>>(items: &[S]) -> String {
    items.iter().map(|s| format!("{}\n", s.as_ref())).collect()
}

/// Report files for one row, as `(file name, bytes)`.
fn extract_row(row: &ManifestRow, t: &Tables) -> Result<Vec<(String, Vec<u8>)>, String> {
    let id = &row.app_id;
    let mut out = Vec::new();
    let mut file =
        |suffix: &str, body: String| out.push((format!("{id}{suffix}"), body.into_bytes()));

    if let Some(p) = &row.apk {
        let mut r =
            apk::parse_apk_bytes(&read_input(p)?, &t.prefixes).map_err(|e| e.to_string())?;
        r.app_id = id.clone();
        if t.api_lists {
            r = apk::match_api_lists(&r, &t.restricted, &t.suspicious);
            r = apk::derive_used_permissions(&r, &t.permissions);
        }
        file(".features", r.features_text());
        file(".opcodes", r.opcodes_text());
        file(".apicounts", r.api_counts_text());
    }

    let mut dynamic = FeatureReport::new(id.clone(), Source::Dynamic);
    if let Some(p) = &row.trace {
        let text =
            String::from_utf8(read_input(p)?).map_err(|_| format!("{}: not UTF-8", p.display()))?;
        let filter = row
            .package
            .clone()
            .map_or(TargetFilter::All, TargetFilter::Package);
        let trace = parse_strace_text(&text, id.clone(), &filter).map_err(|e| e.to_string())?;
        file(".syscalls", lines_text(&trace.names()));
        dynamic.records.extend(trace.to_report().records);
    }
    if let Some(p) = &row.pcap {
        let cap = read_pcap(&read_input(p)?).map_err(|e| e.to_string())?;
        match tcp_features(&cap, None) {
            Ok(f) => {
                let body = TcpFlowFeatures::NAMES
                    .iter()
                    .zip(f.to_array())
                    .map(|(n, v)| format!("{n}\t{v}\n"))
                    .collect();
                file(".tcp", body);
            }
            Err(TraceError::EmptyCapture) => warn!("{id}: capture has no TCP traffic"),
            Err(e) => return Err(e.to_string()),
        }
        dynamic
            .records
            .extend(http_report(id.clone(), &http_features(&cap)).records);
    }
    if let Some(p) = &row.api_log {
        let text =
            String::from_utf8(read_input(p)?).map_err(|_| format!("{}: not UTF-8", p.display()))?;
        let log = parse_api_log_text(&text, id.clone())
            .map_err(|e| e.to_string())?
            .to_report();
        dynamic.records.extend(log.records);
        dynamic.api_counts = log.api_counts;
    }
    if let Some(p) = &row.callgraph {
        let text =
            String::from_utf8(read_input(p)?).map_err(|_| format!("{}: not UTF-8", p.display()))?;
        let g = CallGraph::from_json(&text).map_err(|e| e.to_string())?;
        let routes = extract_api_routes(&g, &t.prefixes, t.route_cap).map_err(|e| e.to_string())?;
        file(".routes", lines_text(&routes));
    }
    if !dynamic.records.is_empty() {
        file(".dynamic.features", dynamic.features_text());
    }
    if !dynamic.api_counts.is_empty() {
        file(".dynamic.apicounts", dynamic.api_counts_text());
    }
    Ok(out)
}

enum Outcome {
    Cached(IndexEntry),
    Parsed(IndexEntry),
    Failed(String),
}

fn cache_valid(dir: &Path, entry: &IndexEntry) -> bool {
    entry
        .outputs
        .iter()
        .all(|(name, h)| std::fs::read(dir.join(name)).is_ok_and(|b| sha256_hex(&b) == *h))
}

fn process_row(
    row: &ManifestRow,
    t: &Tables,
    dir: &Path,
    config_hash: &str,
    prev: &ReportIndex,
) -> Outcome {
    let key = match cache_key(row, config_hash) {
        Ok(k) => k,
        Err(e) => return Outcome::Failed(e),
    };
    if let Some(old) = prev.get(row.app_id.as_str()) {
        if old.key == key && cache_valid(dir, old) {
            return Outcome::Cached(IndexEntry {
                label: row.label,
                ..old.clone()
            });
        }
    }
    let files = match extract_row(row, t) {
        Ok(f) => f,
        Err(e) => return Outcome::Failed(e),
    };
    let mut outputs = BTreeMap::new();
    for (name, bytes) in files {
        if let Err(e) = write_file(&dir.join(&name), &bytes) {
            return Outcome::Failed(e.to_string());
        }
        outputs.insert(name, sha256_hex(&bytes));
    }
    Outcome::Parsed(IndexEntry {
        label: row.label,
        key,
        outputs,
    })
}

fn require_manifest(c: &Common) -> Result<&Path, CliError> {
    c.manifest
        .as_deref()
        .ok_or_else(|| CliError::Config("this command needs --manifest".into()))
}

/// Extracts every manifest row; rows whose inputs and settings are
/// unchanged since the last run are not parsed again.
pub fn extract(c: &Common, cfg: &Config) -> Result<ExtractSummary, CliError> {
    let manifest_path = require_manifest(c)?;
    let rows = load_manifest(manifest_path)?;
    let tables = Tables::load(&cfg.extract)?;
    let dir = c.out.join(REPORTS_DIR);
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let index_path = dir.join(INDEX);
    let prev: ReportIndex = read_artifact(&index_path)
        .ok()
        .and_then(|(b, _)| serde_json::from_slice(&b).ok())
        .unwrap_or_default();
    let config_hash = section_hash(&cfg.extract);

    let outcomes: Vec<Outcome> = rows
        .par_iter()
        .map(|row| process_row(row, &tables, &dir, &config_hash, &prev))
        .collect();

    let mut summary = ExtractSummary {
        total: rows.len(),
        ..Default::default()
    };
    let mut index = ReportIndex::new();
    for (row, outcome) in rows.iter().zip(outcomes) {
        let entry = match outcome {
            Outcome::Cached(e) => {
                summary.cached += 1;
                e
            }
            Outcome::Parsed(e) => {
                summary.parsed += 1;
                e
            }
            Outcome::Failed(reason) => {
                warn!("{}: {reason}", row.app_id);
                summary.failed.push((row.app_id.clone(), reason));
                continue;
            }
        };
        index.insert(row.app_id.as_str().to_string(), entry);
    }
    for (id, reason) in &summary.failed {
        eprintln!("failed {id}: {reason}");
    }
    let manifest_bytes = std::fs::read(manifest_path).map_err(|e| io_err(manifest_path, e))?;
    let stage = Stage {
        name: "extract",
        seed: cfg.seed(c.seed),
        config_hash,
        inputs: BTreeMap::from([("manifest".to_string(), sha256_hex(&manifest_bytes))]),
    };
    let body = serde_json::to_string_pretty(&index).expect("index serializes") + "\n";
    stage.write(&index_path, body.as_bytes())?;
    info!(
        "extract: {} parsed, {} cached, {} failed",
        summary.parsed,
        summary.cached,
        summary.failed.len()
    );
    Ok(summary)
}

// ----------------------------------------------------------------- encode

struct Reports {
    dir: PathBuf,
    index: ReportIndex,
    fingerprint: String,
}

impl Reports {
    fn open(out: &Path) -> Result<Self, CliError> {
        let dir = out.join(REPORTS_DIR);
        let path = dir.join(INDEX);
        let (bytes, prov) = read_artifact(&path)?;
        let index = serde_json::from_slice(&bytes).map_err(|e| CliError::FingerprintMismatch {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Ok(Reports {
            dir,
            index,
            fingerprint: prov.fingerprint,
        })
    }

    /// Contents of `<id><suffix>` if extraction produced it.
    fn file(&self, id: &str, suffix: &str) -> Result<Option<String>, CliError> {
        let name = format!("{id}{suffix}");
        let Some(expected) = self.index[id].outputs.get(&name) else {
            return Ok(None);
        };
        let path = self.dir.join(&name);
        let stale = |reason: &str| CliError::FingerprintMismatch {
            path: path.display().to_string(),
            reason: reason.into(),
        };
        let bytes = std::fs::read(&path).map_err(|_| stale("missing report file"))?;
        if sha256_hex(&bytes) != *expected {
            return Err(stale("report file changed since extraction"));
        }
        String::from_utf8(bytes)
            .map(Some)
            .map_err(|_| stale("not UTF-8"))
    }

    fn ids(&self) -> Vec<AppId> {
        self.index
            .keys()
            .map(|k| k.parse().expect("index keys are app ids"))
            .collect()
    }

    fn report(&self, id: &AppId, suffix: &str, source: Source) -> Result<FeatureReport, CliError> {
        let mut r = FeatureReport::new(id.clone(), source);
        if let Some(text) = self.file(id.as_str(), suffix)? {
            r.records =
                FeatureReport::parse_features(&text).map_err(|e| anyhow!("{id}{suffix}: {e}"))?;
        }
        Ok(r)
    }

    fn counts(
        &self,
        id: &AppId,
        suffix: &str,
        source: Source,
    ) -> Result<BTreeMap<String, u64>, CliError> {
        let mut r = FeatureReport::new(id.clone(), source);
        if let Some(text) = self.file(id.as_str(), suffix)? {
            r.api_counts =
                FeatureReport::parse_api_counts(&text).map_err(|e| anyhow!("{id}{suffix}: {e}"))?;
        }
        Ok(api_count_table(&r))
    }
}

fn encode_err(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(anyhow!("encode: {e}"))
}

fn build_matrix(reports: &Reports, cfg: &Config) -> Result<(FeatureMatrix, Vec<String>), CliError> {
    let e = &cfg.encode;
    let ids = reports.ids();
    let count_matrix =
        |tables: Vec<(AppId, BTreeMap<String, u64>)>| -> Result<FeatureMatrix, CliError> {
            let only: Vec<BTreeMap<String, u64>> = tables.iter().map(|(_, t)| t.clone()).collect();
            let vocab = build_count_vocab(&only, e.min_support).map_err(encode_err)?;
            encode_frequency(&tables, &vocab).map_err(encode_err)
        };
    let mut extra = Vec::new();
    let m = match e.representation {
        Representation::Usage => {
            let default_kinds: Vec<FeatureKind> = FeatureKind::ALL
                .into_iter()
                .filter(|k| match e.source {
                    SourceSel::Static => k.is_static(),
                    SourceSel::Dynamic => !k.is_static(),
                    SourceSel::Both => true,
                })
                .collect();
            let kinds = e.kinds.clone().unwrap_or(default_kinds);
            let mut all = Vec::with_capacity(ids.len());
            for id in &ids {
                let mut r = FeatureReport::new(id.clone(), Source::Hybrid);
                if e.source != SourceSel::Dynamic {
                    r.records
                        .extend(reports.report(id, ".features", Source::Static)?.records);
                }
                if e.source != SourceSel::Static {
                    r.records.extend(
                        reports
                            .report(id, ".dynamic.features", Source::Dynamic)?
                            .records,
                    );
                }
                all.push(r);
            }
            let vocab = build_vocab(&all, &kinds, e.min_support).map_err(encode_err)?;
            encode_usage(&all, &vocab).map_err(encode_err)?
        }
        Representation::Frequency => {
            let (suffix, source) = match e.source {
                SourceSel::Dynamic => (".dynamic.apicounts", Source::Dynamic),
                _ => (".apicounts", Source::Static),
            };
            let tables = ids
                .iter()
                .map(|id| Ok((id.clone(), reports.counts(id, suffix, source)?)))
                .collect::<Result<Vec<_>, CliError>>()?;
            count_matrix(tables)?
        }
        Representation::OpcodeNgram => {
            let mut tables = Vec::new();
            for id in &ids {
                let mut r = FeatureReport::new(id.clone(), Source::Static);
                if let Some(text) = reports.file(id.as_str(), ".opcodes")? {
                    r.methods = FeatureReport::parse_opcodes(&text)
                        .map_err(|err| anyhow!("{id}.opcodes: {err}"))?;
                }
                tables.push((id.clone(), opcode_ngram_table(&r, e.n)));
            }
            count_matrix(tables)?
        }
        Representation::SyscallNgram => {
            let mut tables = Vec::new();
            for id in &ids {
                let text = reports.file(id.as_str(), ".syscalls")?.unwrap_or_default();
                let names: Vec<&str> = text.lines().collect();
                tables.push((id.clone(), ngram_counts(&names, e.n)));
            }
            count_matrix(tables)?
        }
        Representation::Sequence => {
            let mut tokens = Vec::new();
            for id in &ids {
                let text = reports.file(id.as_str(), ".routes")?.unwrap_or_default();
                tokens.push(text.lines().map(str::to_string).collect::<Vec<_>>());
            }
            let vocab =
                vocab_from_rows(&tokens, e.min_support, ValueKind::Numeric).map_err(encode_err)?;
            extra = vocab.names().to_vec();
            let names: Vec<String> = (0..e.max_len).map(|i| format!("pos{i:05}")).collect();
            let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let rows: Vec<(AppId, Vec<f64>)> = ids
                .iter()
                .zip(&tokens)
                .map(|(id, t)| {
                    (
                        id.clone(),
                        encode_sequence(t, &vocab, e.max_len)
                            .into_iter()
                            .map(|x| x as f64)
                            .collect(),
                    )
                })
                .collect();
            encode_numeric(&name_refs, &rows).map_err(encode_err)?
        }
        Representation::Tcp => {
            let mut rows = Vec::new();
            for id in &ids {
                let Some(text) = reports.file(id.as_str(), ".tcp")? else {
                    warn!("{id}: no TCP features, row skipped");
                    continue;
                };
                let vals = text
                    .lines()
                    .map(|l| l.split_once('\t').and_then(|(_, v)| v.parse::<f64>().ok()))
                    .collect::<Option<Vec<f64>>>()
                    .filter(|v| v.len() == TcpFlowFeatures::NAMES.len())
                    .ok_or_else(|| anyhow!("{id}.tcp: malformed"))?;
                rows.push((id.clone(), vals));
            }
            encode_numeric(&TcpFlowFeatures::NAMES, &rows).map_err(encode_err)?
        }
    };
    Ok((m, extra))
}

fn labels_csv(ids: &[AppId], labels: &[Label]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["app_id", "label"])
        .expect("in-memory write");
    for (id, l) in ids.iter().zip(labels) {
        w.write_record([id.as_str(), &l.to_string()])
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

pub fn encode(c: &Common, cfg: &Config) -> Result<(), CliError> {
    let reports = Reports::open(&c.out)?;
    let (m, tokens) = build_matrix(&reports, cfg)?;
    let labels: Vec<Label> = m
        .row_ids()
        .iter()
        .map(|id| reports.index[id.as_str()].label)
        .collect();
    let stage = Stage {
        name: "encode",
        seed: cfg.seed(c.seed),
        config_hash: section_hash(&cfg.encode),
        inputs: BTreeMap::from([(
            format!("{REPORTS_DIR}/{INDEX}"),
            reports.fingerprint.clone(),
        )]),
    };
    stage.write(&c.out.join(MATRIX), m.to_text().as_bytes())?;
    stage.write(&c.out.join(LABELS), &labels_csv(m.row_ids(), &labels))?;
    if !tokens.is_empty() {
        stage.write(
            &c.out.join("sequence.vocab.txt"),
            lines_text(&tokens).as_bytes(),
        )?;
    }
    info!("encode: {} rows x {} columns", m.n_rows(), m.n_cols());
    Ok(())
}

// ------------------------------------------------- select / train / eval

struct Dataset {
    matrix: FeatureMatrix,
    labels: Vec<Label>,
    inputs: BTreeMap<String, String>,
}

fn parse_labels(path: &Path, text: &str) -> Result<BTreeMap<String, Label>, CliError> {
    let stale = |r: String| CliError::FingerprintMismatch {
        path: path.display().to_string(),
        reason: r,
    };
    let mut out = BTreeMap::new();
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    for rec in rd.records() {
        let rec = rec.map_err(|e| stale(e.to_string()))?;
        let label: Label = rec
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|_| stale("bad label".into()))?;
        out.insert(rec.get(0).unwrap_or("").to_string(), label);
    }
    Ok(out)
}

fn load_dataset(out: &Path, matrix_name: &str) -> Result<Dataset, CliError> {
    let mpath = out.join(matrix_name);
    let (text, mprov) = read_artifact_text(&mpath)?;
    let matrix = FeatureMatrix::from_text(&text).map_err(|e| CliError::FingerprintMismatch {
        path: mpath.display().to_string(),
        reason: e.to_string(),
    })?;
    let lpath = out.join(LABELS);
    let (ltext, lprov) = read_artifact_text(&lpath)?;
    let by_id = parse_labels(&lpath, &ltext)?;
    let labels = matrix
        .row_ids()
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| CliError::FingerprintMismatch {
                    path: lpath.display().to_string(),
                    reason: format!("no label for {id}"),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let inputs = BTreeMap::from([
        (matrix_name.to_string(), mprov.fingerprint),
        (LABELS.to_string(), lprov.fingerprint),
    ]);
    Ok(Dataset {
        matrix,
        labels,
        inputs,
    })
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(anyhow!("{e}"))
}

pub fn select(c: &Common, cfg: &Config) -> Result<(), CliError> {
    let d = load_dataset(&c.out, MATRIX)?;
    let spec = cfg.selection();
    let cols = fit_selection(&spec, &d.matrix, &d.labels).map_err(failed)?;
    let selected = d.matrix.select_columns(&cols).map_err(failed)?;
    let stage = Stage {
        name: "select",
        seed: cfg.seed(c.seed),
        config_hash: section_hash(&spec),
        inputs: d.inputs,
    };
    stage.write(&c.out.join(SELECTED), selected.to_text().as_bytes())?;
    if let SelectionSpec::TopK { scorer, .. } = spec {
        let s = score(&d.matrix, &d.labels, scorer).map_err(failed)?;
        stage.write(
            &c.out.join(SCORES),
            scores_to_text(&s, d.matrix.vocab().names(), &spec.describe()).as_bytes(),
        )?;
    }
    info!(
        "select: kept {} of {} columns",
        cols.len(),
        d.matrix.n_cols()
    );
    Ok(())
}

pub fn train_model(c: &Common, cfg: &Config) -> Result<(), CliError> {
    let input = if crate::artifacts::meta_path(&c.out.join(SELECTED)).exists() {
        SELECTED
    } else {
        MATRIX
    };
    let d = load_dataset(&c.out, input)?;
    let seed = cfg.seed(c.seed);
    let hp = if cfg.train.grid {
        grid_search(
            &default_grid(cfg.train.model.kind()),
            &d.matrix,
            &d.labels,
            cfg.train.inner_folds,
            seed,
        )
        .map_err(failed)?
    } else {
        cfg.train.model
    };
    let model = train(&hp, &d.matrix, &d.labels, seed).map_err(failed)?;
    let stage = Stage {
        name: "train",
        seed,
        config_hash: section_hash(&cfg.train),
        inputs: d.inputs,
    };
    stage.write(&c.out.join(MODEL), (model.to_json() + "\n").as_bytes())?;
    Ok(())
}

pub fn evaluate(c: &Common, cfg: &Config) -> Result<EvalReport, CliError> {
    let d = load_dataset(&c.out, MATRIX)?;
    let seed = cfg.seed(c.seed);
    let pipelines = cfg.pipelines();
    let mut results = Vec::with_capacity(pipelines.len());
    for p in &pipelines {
        let r = cross_validate(p, &d.matrix, &d.labels, cfg.eval.k, seed)
            .map_err(|e| anyhow!("{}: {e}", p.name))?;
        info!("eval {}: accuracy {:.3}", p.name, r.mean.accuracy);
        results.push(r);
    }
    let stat_tests = if results.len() >= 2 {
        vec![compare_pipelines(&results, &cfg.eval.metric, cfg.eval.alpha).map_err(failed)?]
    } else {
        Vec::new()
    };
    let report = EvalReport {
        k: cfg.eval.k,
        seed,
        results,
        stat_tests,
    };
    let hash = section_hash(&(&cfg.eval.k, &cfg.eval.alpha, &cfg.eval.metric, &pipelines));
    let stage = Stage {
        name: "eval",
        seed,
        config_hash: hash,
        inputs: d.inputs,
    };
    stage.write(&c.out.join(EVAL_JSON), (report.to_json() + "\n").as_bytes())?;
    stage.write(&c.out.join(EVAL_TXT), eval_text(&report).as_bytes())?;
    Ok(report)
}

pub fn eval_text(report: &EvalReport) -> String {
    let mut s = render_table(&report.results);
    for t in &report.stat_tests {
        s.push_str(&format!(
            "\nKruskal-Wallis on {}: H = {:.3}, p = {:.4}\n",
            t.metric, t.h, t.p
        ));
        if t.pairwise.is_empty() {
            s.push_str(&format!("no pairwise tests (p >= {})\n", t.alpha));
        }
        for pw in &t.pairwise {
            let mark = if pw.significant { " *" } else { "" };
            s.push_str(&format!(
                "  {} vs {}: z = {:.3}, adjusted p = {:.4}{mark}\n",
                pw.a, pw.b, pw.z, pw.p_adjusted
            ));
        }
    }
    s
}

// --------------------------------------------------------------- ensemble

fn pick_bases(results: &[CvResult], cfg: &Config) -> Result<Vec<CvResult>, CliError> {
    let mut bases: Vec<CvResult> = match &cfg.ensemble.members {
        Some(names) => names
            .iter()
            .map(|n| {
                results
                    .iter()
                    .find(|r| &r.pipeline == n)
                    .cloned()
                    .ok_or_else(|| CliError::Config(format!("no evaluated pipeline named {n}")))
            })
            .collect::<Result<_, _>>()?,
        None => results.to_vec(),
    };
    if let Some(top) = cfg.ensemble.top_pipelines {
        bases.sort_by(|a, b| {
            b.mean
                .accuracy
                .total_cmp(&a.mean.accuracy)
                .then_with(|| a.pipeline.cmp(&b.pipeline))
        });
        bases.truncate(top);
    }
    if bases.len() < 3 {
        return Err(CliError::Config(format!(
            "ensembles need at least 3 pipelines, have {}",
            bases.len()
        )));
    }
    Ok(bases)
}

/// Ranks ensembles and returns the rendered table.
pub fn ensemble(c: &Common, cfg: &Config) -> Result<String, CliError> {
    let path = c.out.join(EVAL_JSON);
    let (text, prov) = read_artifact_text(&path)?;
    let report = EvalReport::from_json(&text).map_err(|e| CliError::FingerprintMismatch {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let bases = pick_bases(&report.results, cfg)?;
    let ranked =
        enumerate_ensembles(&bases, cfg.ensemble.max_size, cfg.ensemble.cap).map_err(failed)?;
    let table = render_ensembles(&ranked, cfg.ensemble.show);
    let stage = Stage {
        name: "ensemble",
        seed: report.seed,
        config_hash: section_hash(&cfg.ensemble),
        inputs: BTreeMap::from([(EVAL_JSON.to_string(), prov.fingerprint)]),
    };
    let json = serde_json::to_string_pretty(&ranked).expect("ensembles serialize") + "\n";
    stage.write(&c.out.join(ENSEMBLES_JSON), json.as_bytes())?;
    stage.write(&c.out.join(ENSEMBLES_TXT), table.as_bytes())?;
    Ok(table)
}

// ----------------------------------------------------------- gen-fixtures

/// Writes the corpus described by `spec` and returns the number of apps.
pub fn gen_fixtures(c: &Common, spec: &Path) -> Result<usize, CliError> {
    let mut text = read_config_file(spec)?;
    if let Some(s) = c.seed {
        text.push_str(&format!("\nseed {s}\n"));
    }
    let corpus = parse_fixture_spec(&text)?;
    std::fs::create_dir_all(&c.out).map_err(|e| io_err(&c.out, e))?;
    if corpus.apps.is_empty() {
        return Ok(0);
    }
    let built: Vec<(Vec<u8>, AppId)> = corpus
        .apps
        .par_iter()
        .map(|a| {
            let bytes = a.apk_bytes();
            let id = AppId::of_bytes(&bytes);
            (bytes, id)
        })
        .collect();
    let mut seen = std::collections::BTreeSet::new();
    for ((_, id), app) in built.iter().zip(&corpus.apps) {
        if !seen.insert(id.clone()) {
            return Err(SpecError {
                line: 0,
                reason: format!("app {} duplicates the APK of another app", app.name),
            }
            .into());
        }
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for (app, (apk, id)) in corpus.apps.iter().zip(&built) {
        let apk_rel = format!("apks/{}.apk", app.name);
        write_file(&c.out.join(&apk_rel), apk)?;
        let mut truth: Vec<String> = app.expected_records().iter().map(|r| r.line()).collect();
        truth.sort();
        write_file(
            &c.out.join(format!("truth/{id}.features")),
            lines_text(&truth).as_bytes(),
        )?;
        let trace_rel = if app.syscalls.is_empty() {
            String::new()
        } else {
            let rel = format!("traces/{}.strace", app.name);
            write_file(&c.out.join(&rel), app.strace_text().as_bytes())?;
            write_file(
                &c.out.join(format!("truth/{id}.syscalls")),
                lines_text(&app.expected_syscalls()).as_bytes(),
            )?;
            rel
        };
        let pcap_rel = if app.hosts.is_empty() {
            String::new()
        } else {
            let rel = format!("pcaps/{}.pcap", app.name);
            write_file(&c.out.join(&rel), &app.pcap_bytes())?;
            rel
        };
        let label = app.label.to_string();
        w.write_record([
            id.as_str(),
            &apk_rel,
            &trace_rel,
            &pcap_rel,
            "",
            "",
            &label,
            &app.package,
        ])
        .expect("in-memory write");
    }
    write_file(
        &c.out.join("manifest.csv"),
        &w.into_inner().expect("in-memory write"),
    )?;
    Ok(corpus.apps.len())
}
