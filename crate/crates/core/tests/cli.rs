//! End-to-end checks of the command-line interface and its exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn emonli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emonli"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_toy_config(dir: &Path) -> PathBuf {
    let corpora = fixtures().join("corpora");
    let catalog = fixtures().join("catalogs/toy_multilingual.json");
    let config = serde_json::json!({
        "datasets": [{
            "name": "universal-joy",
            "languages": {
                "de": corpora.join("toy_de.csv"),
                "en": corpora.join("toy_en.csv"),
                "es": corpora.join("toy_es.csv"),
            }
        }],
        "models": [{
            "id": "mock",
            "source": "builtin:mock",
            "label_order": ["entail", "neutral", "contradict"],
            "backend": "mock"
        }],
        "prompt_types": ["expr-emo", "emo-s"],
        "prompt_language_policy": "both",
        "catalogs": [catalog],
        "output_dir": dir.join("store"),
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

#[test]
fn validate_then_run_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_toy_config(tmp.path());

    let out = emonli(&["validate", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("grid: 10 combinations"), "{stdout}");
    assert!(stdout.contains("catalog: complete"), "{stdout}");

    let out = emonli(&["run", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let store = tmp.path().join("store");
    assert!(store.join("records.csv").exists());
    assert!(store.join("manifest.json").exists());
    assert!(store.join("cache.log").exists());

    // rerun over the complete store: everything skipped, same exit code
    let out = emonli(&["run", "--config", config.to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("(10 skipped as already complete)"), "{stdout}");

    let spec = fixtures().join("configs/toy_report.json");
    let reports = tmp.path().join("reports");
    let out = emonli(&[
        "report",
        "--store",
        store.to_str().unwrap(),
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        reports.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(reports.join("prompt-language-comparison__universal-joy.csv").exists());
    assert!(reports.join("prompt-type-by-language__universal-joy.ranks.csv").exists());
    assert!(reports
        .join("prediction-dump__universal-joy__de__mock__expr-emo.csv")
        .exists());
}

#[test]
fn run_stop_after_exits_with_partial_code() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_toy_config(tmp.path());
    let out = emonli(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--stop-after",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    // resuming completes the grid cleanly
    let out = emonli(&["run", "--config", config.to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("(3 skipped as already complete)"), "{stdout}");
}

#[test]
fn validate_reports_catalog_gaps_with_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let corpora = fixtures().join("corpora");
    // the English-only catalog cannot cover German prompts
    let config = serde_json::json!({
        "datasets": [{
            "name": "universal-joy",
            "languages": { "de": corpora.join("toy_de.csv") }
        }],
        "models": [{
            "id": "mock",
            "source": "builtin:mock",
            "label_order": ["entail", "neutral", "contradict"],
            "backend": "mock"
        }],
        "prompt_types": ["expr-emo"],
        "prompt_language_policy": "both",
        "catalogs": [fixtures().join("catalogs/en.json")],
        "output_dir": tmp.path().join("store"),
    });
    let path = tmp.path().join("config.json");
    std::fs::write(&path, serde_json::to_string(&config).unwrap()).unwrap();

    let out = emonli(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("missing template (de, expr-emo)"), "{stderr}");
}

#[test]
fn corpus_convert_produces_loadable_normal_form() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = fixtures().join("corpora/raw/emoevent_raw_en.tsv");
    let out_path = tmp.path().join("emoevent_en.csv");
    let out = emonli(&[
        "corpus-convert",
        "--corpus",
        "emoevent",
        "--in",
        raw.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
        "--language",
        "en",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let contents = std::fs::read_to_string(&out_path).unwrap();
    assert!(contents.starts_with("id,text,label\n"));
    assert!(contents.contains("emoevent-en-000001"));

    let load = emonli::corpora::load_corpus(
        emonli::corpora::CorpusName::EmoEvent,
        "en",
        &out_path,
    )
    .unwrap();
    assert_eq!(load.corpus.instances.len(), 5);
}

#[test]
fn missing_config_file_is_a_config_error() {
    let out = emonli(&["run", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn grid_failures_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let corpora = fixtures().join("corpora");
    // the external scorer dies immediately, so every combination fails
    let config = serde_json::json!({
        "datasets": [{
            "name": "universal-joy",
            "languages": { "en": corpora.join("toy_en.csv") }
        }],
        "models": [{
            "id": "dud",
            "source": "none",
            "label_order": ["entail", "neutral", "contradict"],
            "backend": "external",
            "command": ["sh", "-c", "exit 0"]
        }],
        "prompt_types": ["expr-emo"],
        "prompt_language_policy": "both",
        "catalogs": [fixtures().join("catalogs/toy_multilingual.json")],
        "output_dir": tmp.path().join("store"),
    });
    let path = tmp.path().join("config.json");
    std::fs::write(&path, serde_json::to_string(&config).unwrap()).unwrap();

    let out = emonli(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("failed:"), "{stderr}");
    // the failure marker is durable
    let manifest = std::fs::read_to_string(tmp.path().join("store/manifest.json")).unwrap();
    assert!(manifest.contains("universal-joy__en__dud__expr-emo__en"), "{manifest}");
}
