mod support;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn satprobe(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_satprobe"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env("SATPROBE_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const WORDS_RANDOM: &str = "[dataset]\nbuilder = \"words\"\nalphabet = \"ab\"\n[model]\nspec = \"random:3:8x2x2\"\n";

const PLANTED: &str = "[dataset]\nbuilder = \"planted\"\nn_records = 400\nn_layers = 4\nn_heads = 4\nseed = 2\n\
                       [eval]\npredictors = [\"satprobe_weights\", \"constant\"]\nn_seeds = 4\n";

#[test]
fn two_letter_words_trace_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "w.toml", WORDS_RANDOM);
    assert!(satprobe(&cfg, &["trace"]).status.success());
    let first = fs::read(dir.path().join("out/traces.jsonl")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    // header line plus one line per record
    assert_eq!(text.lines().count(), 1 + 8);
    assert!(satprobe(&cfg, &["trace"]).status.success());
    assert_eq!(fs::read(dir.path().join("out/traces.jsonl")).unwrap(), first);
}

#[test]
fn missing_weights_exit_code_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "w.toml", "[dataset]\nbuilder = \"words\"\nalphabet = \"ab\"\n[model]\nspec = \"nowhere/model.bin\"\n");
    let out = satprobe(&cfg, &["trace"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere/model.bin"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[dataset]\nbuilder = \"words\"\n[eval]\npenalty_C = -1\n");
    assert_eq!(satprobe(&cfg, &["eval"]).status.code(), Some(2));
    assert_eq!(satprobe(&dir.path().join("absent.toml"), &["eval"]).status.code(), Some(2));
    // eval without a trace file
    let cfg = write(dir.path(), "w.toml", WORDS_RANDOM);
    let out = satprobe(&cfg, &["eval"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("traces.jsonl"));
}

#[test]
fn planted_report_has_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.toml", PLANTED);
    assert!(satprobe(&cfg, &["eval"]).status.success());
    let report = fs::read_to_string(dir.path().join("out/report.tsv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    let header: Vec<&str> = lines[0].split('\t').collect();
    let row: Vec<&str> = lines[1].split('\t').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("constant_auroc"), "0.5000 ± 0.0000");
    let probe: f64 = col("satprobe_weights_auroc").split(' ').next().unwrap().parse().unwrap();
    assert!(probe >= 0.9, "{probe}");
    let per_seed = fs::read_to_string(dir.path().join("out/per_seed.tsv")).unwrap();
    assert_eq!(per_seed.lines().count(), 1 + 2 * 4);
    assert!(fs::read_to_string(dir.path().join("out/attention_accuracy.svg")).unwrap().starts_with("<svg"));

    // thread count and a second run do not change a byte
    let again = dir.path().join("again");
    assert!(satprobe(&cfg, &["eval", "--threads", "1", "--out", again.to_str().unwrap()]).status.success());
    assert_eq!(fs::read(again.join("report.tsv")).unwrap(), report.as_bytes());
    assert_eq!(fs::read_to_string(again.join("per_seed.tsv")).unwrap(), per_seed);

    // a different split seed gives different per-seed numbers
    let other = dir.path().join("other");
    assert!(satprobe(&cfg, &["eval", "--seed", "9", "--out", other.to_str().unwrap()]).status.success());
    assert_ne!(fs::read_to_string(other.join("per_seed.tsv")).unwrap(), per_seed);
}

#[test]
fn failed_eval_leaves_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "w.toml", &format!("{WORDS_RANDOM}[eval]\npredictors = [\"satprobe_weights\"]\n"));
    assert!(satprobe(&cfg, &["trace"]).status.success());
    // a random model never completes a matching word: one class only
    let out = satprobe(&cfg, &["eval"]);
    assert_eq!(out.status.code(), Some(1));
    for f in ["report.tsv", "per_seed.tsv", "attention_accuracy.svg"] {
        assert!(!dir.path().join("out").join(f).exists(), "{f} left behind");
    }
}

#[test]
fn label_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = support::write_copy_fixture(dir.path(), "");
    assert!(satprobe(&cfg, &["trace"]).status.success());
    let traced = fs::read(dir.path().join("out/traces.jsonl")).unwrap();
    assert!(satprobe(&cfg, &["label"]).status.success());
    assert_eq!(fs::read(dir.path().join("out/traces.jsonl")).unwrap(), traced);
}

#[test]
fn sweep_bin_and_grid_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.toml", &format!("{PLANTED}sweep_layers = [1, 2, 4]\nbin_key = \"popularity\"\nbins = 4\n"));
    assert!(satprobe(&cfg, &["trace"]).status.success());
    assert!(satprobe(&cfg, &["sweep-layers"]).status.success());
    let sweep = fs::read_to_string(dir.path().join("out/sweep_layers.tsv")).unwrap();
    assert_eq!(sweep.lines().count(), 4);
    assert!(satprobe(&cfg, &["bin"]).status.success());
    let bins = fs::read_to_string(dir.path().join("out/bins_popularity.tsv")).unwrap();
    assert_eq!(bins.lines().count(), 5);

    let grid_cfg = write(
        dir.path(),
        "g.toml",
        "[dataset]\nbuilder = \"traces\"\npath = \"out/traces.jsonl\"\n[grid]\nsmall = \"out/traces.jsonl\"\nlarge = \"out/traces.jsonl\"\ncells = 3\n",
    );
    assert!(satprobe(&grid_cfg, &["grid"]).status.success());
    let grid = fs::read_to_string(dir.path().join("out/grid.tsv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 9);
    // identical traces for both models: only diagonal outcomes
    for line in grid.lines().skip(1) {
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!((cols[4], cols[5]), ("0", "0"), "{line}");
    }
}
