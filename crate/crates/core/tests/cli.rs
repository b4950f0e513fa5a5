use std::fs;
use std::path::Path;
use std::process::Command;

use layoutforge::dataio::Corpus;
use layoutforge::denoiser::{LoadedModel, WeightsSidecar};
use layoutforge::diffusion::ScheduleConfig;
use layoutforge::metrics::{EvalReport, LABEL_FULL, LABEL_NO_CONDITION, LABEL_NO_DESIGN_OPT, LABEL_NO_FEEDBACK};
use layoutforge::Layout;
use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let mut argv = vec!["layoutforge"];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = layoutforge::cli::run(argv, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn train_small(dir: &Path) -> String {
    let weights = s(&dir.join("w.bin"));
    let r = run(&["train", "--synth-n", "200", "--epochs", "1", "--out", &weights]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    weights
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_layoutforge");
    let help = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("Usage"));

    let unknown = Command::new(bin).args(["sample", "--frobnicate"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Usage"));

    let dir = tempfile::tempdir().unwrap();
    let missing = Command::new(bin)
        .args(["train", "--corpus", &s(&dir.path().join("none.jsonl")), "--out", &s(&dir.path().join("w.bin"))])
        .env_remove("LAYOUTFORGE_CONFIG")
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn config_errors_exit_one_and_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let missing = s(&dir.path().join("absent.json"));
    let r = run(&["--config", &missing, "synth", "--out", &s(&dir.path().join("c.jsonl"))]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("absent.json"), "{}", r.stderr);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"train": {"epochz": 3}}"#).unwrap();
    let r = run(&["--config", &s(&bad), "synth", "--out", &s(&dir.path().join("c.jsonl"))]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("train.epochz"), "{}", r.stderr);
}

#[test]
fn config_file_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"data": {"synth_n": 37}}"#).unwrap();
    let out = dir.path().join("c.jsonl");
    let status = Command::new(env!("CARGO_BIN_EXE_layoutforge"))
        .args(["synth", "--out", &s(&out)])
        .env("LAYOUTFORGE_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert_eq!(Corpus::load(&out).unwrap().len(), 37);
}

#[test]
fn train_writes_loadable_weights_and_loss_lines() {
    let dir = tempfile::tempdir().unwrap();
    let weights = dir.path().join("w.bin");
    let r = run(&["train", "--synth-n", "200", "--epochs", "2", "--out", &s(&weights)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines.len(), 2);
    for (i, line) in lines.iter().enumerate() {
        let parts: Vec<&str> = line.split(' ').collect();
        assert_eq!(parts[..3], ["epoch", &(i + 1).to_string(), "loss"]);
        assert!(parts[3].parse::<f64>().unwrap().is_finite());
    }
    let model = LoadedModel::load(&weights, &ScheduleConfig::default()).unwrap();
    assert_eq!(model.sidecar.unwrap().epoch_losses.len(), 2);
    assert!(WeightsSidecar::path_for(&weights).exists());
}

#[test]
fn sample_is_deterministic_and_rasterizes() {
    let dir = tempfile::tempdir().unwrap();
    let weights = train_small(dir.path());
    let (a, b, png) = (dir.path().join("a.json"), dir.path().join("b.json"), dir.path().join("a.png"));
    for (out, extra) in [(&a, Some(&png)), (&b, None)] {
        let mut args = vec!["sample", "--weights", &weights, "--prompt", "login dark", "--seed", "42"];
        let (o, p) = (s(out), extra.map(|p| s(p)));
        args.extend(["--out", &o]);
        if let Some(p) = &p {
            args.extend(["--png", p]);
        }
        let r = run(&args);
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    let (ta, tb) = (fs::read_to_string(&a).unwrap(), fs::read_to_string(&b).unwrap());
    assert_eq!(ta, tb);
    Layout::from_json(&ta).unwrap();
    assert_eq!(&fs::read(&png).unwrap()[..8], b"\x89PNG\r\n\x1a\n");

    let r = run(&["sample", "--weights", &weights, "--sketch", "0.5,0.5"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("sketch"));
}

#[test]
fn eval_identity_reaches_the_upper_bound() {
    let dir = tempfile::tempdir().unwrap();
    let (report, table, csv) = (dir.path().join("r.json"), dir.path().join("r.txt"), dir.path().join("r.csv"));
    let r = run(&[
        "eval", "--model", "identity", "--synth-n", "300", "--out", &s(&report), "--table", &s(&table), "--csv", &s(&csv),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report: EvalReport = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report.psnr_db.mean, 100.0);
    assert_eq!(report.ssim.mean, 1.0);
    assert!(report.layout_fd < 1e-6);
    assert_eq!(fs::read_to_string(&table).unwrap(), r.stdout);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), report.samples + 1);
}

#[test]
fn ablate_rows_carry_the_four_labels() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let r = run(&["ablate", "--synth-n", "300", "--epochs", "1", "--max-items", "30", "--out", &s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let doc: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let labels: Vec<&str> = doc["runs"][0]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|row| row["model"].as_str().unwrap())
        .collect();
    assert_eq!(labels, [LABEL_NO_CONDITION, LABEL_NO_DESIGN_OPT, LABEL_NO_FEEDBACK, LABEL_FULL]);
    for label in labels {
        assert!(r.stdout.contains(label));
    }
    assert_eq!(doc["summary"]["runs"], 1);
}

#[test]
fn synth_and_ingest_write_corpora() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.jsonl");
    let r = run(&["synth", "--n", "25", "--seed", "3", "--out", &s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(Corpus::load(&out).unwrap().len(), 25);

    let rico = dir.path().join("rico");
    fs::create_dir(&rico).unwrap();
    let doc = r#"{"bounds": [0, 0, 720, 1280], "children": [
        {"bounds": [72, 128, 648, 256], "componentLabel": "Text Button"}]}"#;
    fs::write(rico.join("1.json"), doc).unwrap();
    let out = dir.path().join("r.jsonl");
    let r = run(&["ingest", "--dir", &s(&rico), "--out", &s(&out), "--screen", "720x1280"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let corpus = Corpus::load(&out).unwrap();
    let b = corpus.items[0].layout.components[0];
    assert!((b.left() - 0.1).abs() < 1e-12 && (b.top() - 0.1).abs() < 1e-12);

    let r = run(&["ingest", "--dir", &s(&rico), "--out", &s(&out), "--screen", "wide"]);
    assert_eq!(r.code, 1);
}
