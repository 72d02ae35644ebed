use std::path::{Path, PathBuf};

use droidlens::fixtures::marker_apis;
use droidlens_cli::commands::{self, INDEX, MATRIX, REPORTS_DIR};
use droidlens_cli::config::Config;
use droidlens_cli::{run, CliError, Common};

const SMALL_SPEC: &str = "\
seed 11
noise api count=4 rate=0.5
group ben count=6 label=benign
permission android.permission.INTERNET
api java.lang.String.length()I rate=0.8
syscall read
group mal count=6 label=malware
permission android.permission.INTERNET
permission android.permission.SEND_SMS
api android.telephony.SmsManager.sendTextMessage(Ljava/lang/String;Ljava/lang/String;Ljava/lang/String;Landroid/app/PendingIntent;Landroid/app/PendingIntent;)V
syscall write
host c2.example.net
";

fn droidlens(args: &[&str]) -> i32 {
    run(std::iter::once("droidlens").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus(dir: &Path, spec: &str) -> PathBuf {
    let spec_path = dir.join("corpus.spec");
    std::fs::write(&spec_path, spec).unwrap();
    let out = dir.join("corpus");
    assert_eq!(
        droidlens(&["gen-fixtures", "--spec", s(&spec_path), "--out", s(&out)]),
        0
    );
    out
}

fn common(out: &Path, manifest: Option<&Path>) -> Common {
    Common {
        config: None,
        manifest: manifest.map(Path::to_path_buf),
        out: out.to_path_buf(),
        jobs: 1,
        seed: None,
    }
}

#[test]
fn extract_writes_one_report_per_row_and_caches() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), SMALL_SPEC);
    let work = dir.path().join("work");
    let manifest = c.join("manifest.csv");
    let cfg = Config::default();
    let first = commands::extract(&common(&work, Some(&manifest)), &cfg).unwrap();
    assert_eq!(
        (first.total, first.parsed, first.cached, first.failed.len()),
        (12, 12, 0, 0)
    );
    let features = std::fs::read_dir(work.join(REPORTS_DIR))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".features") && !n.ends_with(".dynamic.features"))
        .count();
    assert_eq!(features, 12);
    let again = commands::extract(&common(&work, Some(&manifest)), &cfg).unwrap();
    assert_eq!((again.parsed, again.cached), (0, 12));
    assert_eq!(
        droidlens(&["extract", "--manifest", s(&manifest), "--out", s(&work)]),
        0
    );
}

#[test]
fn corrupt_apk_is_a_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), SMALL_SPEC);
    let victim = c.join("apks/mal-003.apk");
    let mut bytes = std::fs::read(&victim).unwrap();
    bytes.truncate(bytes.len() / 2);
    std::fs::write(&victim, bytes).unwrap();
    let work = dir.path().join("work");
    let manifest = c.join("manifest.csv");
    assert_eq!(
        droidlens(&["extract", "--manifest", s(&manifest), "--out", s(&work)]),
        1
    );
    let index: serde_json::Value =
        serde_json::from_slice(&std::fs::read(work.join(REPORTS_DIR).join(INDEX)).unwrap())
            .unwrap();
    assert_eq!(index.as_object().unwrap().len(), 11);
    let err = commands::extract(&common(&work, Some(&manifest)), &Config::default()).unwrap();
    assert_eq!((err.cached, err.failed.len()), (11, 1));
}

#[test]
fn stages_refuse_missing_or_tampered_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let work = dir.path().join("work");
    let cfg = Config::default();
    assert!(matches!(
        commands::evaluate(&common(&work, None), &cfg),
        Err(CliError::FingerprintMismatch { .. })
    ));
    assert_eq!(droidlens(&["train", "--out", s(&work)]), 2);

    let c = corpus(dir.path(), SMALL_SPEC);
    let manifest = c.join("manifest.csv");
    assert_eq!(
        droidlens(&["extract", "--manifest", s(&manifest), "--out", s(&work)]),
        0
    );
    assert_eq!(droidlens(&["encode", "--out", s(&work)]), 0);
    let m = work.join(MATRIX);
    let mut text = std::fs::read_to_string(&m).unwrap();
    text.push('\n');
    std::fs::write(&m, text).unwrap();
    assert!(matches!(
        commands::train_model(&common(&work, None), &cfg),
        Err(CliError::FingerprintMismatch { .. })
    ));
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), SMALL_SPEC);
    let manifest = c.join("manifest.csv");
    let cfg_path = dir.path().join("cfg.toml");
    std::fs::write(&cfg_path, "[eval]\nk = 3\n[ensemble]\nmax_size = 3\n").unwrap();
    let mut outputs = Vec::new();
    for (name, jobs) in [("a", "1"), ("b", "4")] {
        let work = dir.path().join(name);
        for stage in ["extract", "encode", "train", "eval", "ensemble"] {
            let mut args = vec![
                stage,
                "--out",
                s(&work),
                "--config",
                s(&cfg_path),
                "--jobs",
                jobs,
                "--seed",
                "5",
            ];
            if stage == "extract" {
                args.extend(["--manifest", s(&manifest)]);
            }
            assert_eq!(droidlens(&args), 0, "{stage}");
        }
        let files: Vec<Vec<u8>> = [
            "matrix.txt",
            "model.json",
            "eval.json",
            "ensembles.json",
            "reports/index.json",
        ]
        .iter()
        .map(|f| std::fs::read(work.join(f)).unwrap())
        .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn generated_markers_only_reach_malware() {
    let dir = tempfile::tempdir().unwrap();
    let spec = droidlens::fixtures::marker_corpus_spec(15, 0.9, 3);
    let c = corpus(dir.path(), &spec);
    let manifest = std::fs::read_to_string(c.join("manifest.csv")).unwrap();
    let markers = marker_apis();
    let mut malware_hits = 0;
    for line in manifest.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let truth = std::fs::read_to_string(c.join(format!("truth/{}.features", cols[0]))).unwrap();
        let hits = markers
            .iter()
            .filter(|m| truth.contains(&format!("ApiCall::{m}\n")))
            .count();
        match cols[6] {
            "benign" => assert_eq!(hits, 0),
            _ => malware_hits += hits,
        }
    }
    assert!(malware_hits > 15 * markers.len() / 2);
}

#[test]
fn empty_and_invalid_specs() {
    let dir = tempfile::tempdir().unwrap();
    let out = corpus(dir.path(), "# nothing\n");
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 0);

    let bad = dir.path().join("dup.spec");
    std::fs::write(&bad, "app a label=benign\nperm\napp a label=malware\n").unwrap();
    assert_eq!(
        droidlens(&[
            "gen-fixtures",
            "--spec",
            s(&bad),
            "--out",
            s(&dir.path().join("x"))
        ]),
        2
    );
    std::fs::write(&bad, "app a label=benign\napp a label=malware\n").unwrap();
    let c = common(&dir.path().join("y"), None);
    match commands::gen_fixtures(&c, &bad) {
        Err(CliError::Spec(e)) => assert_eq!(e.line, 2),
        other => panic!("expected a spec error, got {other:?}"),
    }
}

#[test]
fn bad_manifest_and_config_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.csv");
    std::fs::write(
        &manifest,
        "app_id,apk,trace,pcap,api_log,callgraph,label\nnot-an-id,x.apk,,,,,benign\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    assert_eq!(
        droidlens(&["extract", "--manifest", s(&manifest), "--out", s(&out)]),
        2
    );
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[eval]\nk = 1\n").unwrap();
    assert_eq!(
        droidlens(&["eval", "--config", s(&cfg), "--out", s(&out)]),
        2
    );
    std::fs::write(
        &cfg,
        "[encode]\nrepresentation = \"tcp\"\nsource = \"both\"\n",
    )
    .unwrap();
    assert_eq!(
        droidlens(&["encode", "--config", s(&cfg), "--out", s(&out)]),
        2
    );
    assert_eq!(droidlens(&["--help"]), 0);
    assert_eq!(droidlens(&["frobnicate"]), 2);
}

#[test]
fn dynamic_and_tcp_representations() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), SMALL_SPEC);
    let manifest = c.join("manifest.csv");
    for (name, body) in [
        (
            "syscall",
            "[encode]\nrepresentation = \"syscall_ngram\"\nn = 1\n",
        ),
        ("both", "[encode]\nsource = \"both\"\n"),
        ("tcp", "[encode]\nrepresentation = \"tcp\"\n"),
        (
            "opcodes",
            "[encode]\nrepresentation = \"opcode_ngram\"\nn = 2\n",
        ),
    ] {
        let cfg = dir.path().join(format!("{name}.toml"));
        std::fs::write(&cfg, body).unwrap();
        let work = dir.path().join(name);
        assert_eq!(
            droidlens(&[
                "extract",
                "--manifest",
                s(&manifest),
                "--out",
                s(&work),
                "--config",
                s(&cfg)
            ]),
            0
        );
        assert_eq!(
            droidlens(&["encode", "--out", s(&work), "--config", s(&cfg)]),
            0,
            "{name}"
        );
        let text = std::fs::read_to_string(work.join(MATRIX)).unwrap();
        let rows = text.split("#rows\n").nth(1).unwrap().lines().count();
        let expect = if name == "tcp" { 6 } else { 12 };
        assert_eq!(rows, expect, "{name}");
        if name == "syscall" {
            assert!(text.lines().any(|l| l == "read") && text.lines().any(|l| l == "write"));
        }
    }
}
