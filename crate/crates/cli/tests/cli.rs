//! End-to-end tests of the `edagcn` binary: every subcommand against a
//! small on-disk dataset, plus exit-code and determinism contracts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_edagcn"))
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

/// Lay down a 4-node dataset: two cliques {0,1} and {2,3} with matching
/// labels, one node per split role.
fn toy_dataset(dir: &Path) -> PathBuf {
    write(&dir.join("edges.tsv"), "0\t1\n2\t3\n");
    write(&dir.join("labels.csv"), "0,0\n1,0\n2,1\n3,1\n");
    write(
        &dir.join("splits.csv"),
        "0,train\n2,train\n1,val\n3,test\n",
    );
    let config = serde_json::json!({
        "data": {
            "n_nodes": 4,
            "edges": "edges.tsv",
            "labels": "labels.csv",
            "splits": "splits.csv"
        },
        "dither": { "enabled": true, "q1": 1.0, "q2": 1.0, "i_count": 2, "seed": 5 },
        "model": { "hidden_widths": [4], "k_hop": 1 },
        "train": {
            "learning_rate": 0.05,
            "max_epochs": 40,
            "patience": 40,
            "seed": 7
        },
        "out_dir": "out",
        "run_seed": 7
    });
    let path = dir.join("config.json");
    write(&path, &serde_json::to_string_pretty(&config).unwrap());
    path
}

fn run_ok(cmd: &mut Command) -> Output {
    let output = cmd.output().unwrap();
    assert!(
        output.status.success(),
        "command failed ({:?}):\n{}\n{}",
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

#[test]
fn dither_identity_reproduces_input_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_dataset(dir.path());
    run_ok(binary().args(["dither", "--config"]).arg(&config));

    let out = dir.path().join("out");
    let original = std::fs::read(dir.path().join("edges.tsv")).unwrap();
    for index in 0..2 {
        let sampled = std::fs::read(out.join(format!("graph_{index:03}.tsv"))).unwrap();
        assert_eq!(sampled, original, "keep-all dithering must copy the input");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["q1"], 1.0);
    assert_eq!(manifest["q2"], 1.0);
    assert_eq!(manifest["i_count"], 2);
    assert_eq!(manifest["seed"], 5);
    assert!(manifest["source_hash"].as_str().unwrap().len() == 64);
    assert!(manifest["config_hash"].as_str().unwrap().len() == 64);

    // Byte-identical on rerun.
    let first = std::fs::read(out.join("manifest.json")).unwrap();
    run_ok(binary().args(["dither", "--config"]).arg(&config));
    assert_eq!(std::fs::read(out.join("manifest.json")).unwrap(), first);
}

#[test]
fn probe_prints_the_closed_form() {
    let output = run_ok(binary().args([
        "probe", "--q1", "0.9", "--q2", "1.0", "--i-count", "10",
    ]));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(
        stdout.contains("0.651322"),
        "expected the spurious-edge closed form in:\n{stdout}"
    );
}

#[test]
fn probe_reports_both_semantics_with_standard_errors() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("clean.tsv"), "0\t1\n");
    write(&dir.path().join("observed.tsv"), "0\t1\n1\t2\n");
    let output = run_ok(
        binary()
            .args(["probe", "--q1", "0.9", "--q2", "1.0", "--i-count", "10"])
            .arg("--original")
            .arg(dir.path().join("clean.tsv"))
            .arg("--perturbed")
            .arg(dir.path().join("observed.tsv"))
            .args(["--n-nodes", "3", "--node", "1", "--trials", "20000"])
            .arg("--out")
            .arg(dir.path().join("probe_out")),
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("per-pair-union estimate"));
    assert!(stdout.contains("single-draw-full estimate"));
    assert!(stdout.contains("+/-"));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("probe_out/probe.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["instance"]["kappa"], 1);
    assert_eq!(report["instance"]["lambda"], 1);
    let closed: f64 = report["instance"]["closed_form"].as_f64().unwrap();
    assert!(closed > 0.0 && closed < 1.0);
}

#[test]
fn train_emits_history_checkpoint_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_dataset(dir.path());
    let output = run_ok(binary().args(["train", "--config"]).arg(&config));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("\"accuracy\""));

    let out = dir.path().join("out");
    assert!(out.join("resolved_config.json").is_file());
    assert!(out.join("checkpoint.json").is_file());

    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap())
            .unwrap();
    assert_eq!(metrics["split"], "test");
    assert!(metrics["macro_f1"].is_number());
    let epochs_run = metrics["epochs_run"].as_u64().unwrap() as usize;

    let history = std::fs::read_to_string(out.join("history.jsonl")).unwrap();
    let lines: Vec<&str> = history.lines().collect();
    assert_eq!(lines.len(), epochs_run, "one history line per epoch");
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    for key in [
        "epoch",
        "total",
        "cross_entropy",
        "smoothness",
        "weight_decay",
        "sparsity",
        "val_accuracy",
        "val_loss",
        "config_hash",
    ] {
        assert!(first.get(key).is_some(), "history line missing {key}");
    }

    // Same config and seeds: bit-identical metrics.
    let before = std::fs::read(out.join("metrics.json")).unwrap();
    run_ok(binary().args(["train", "--config"]).arg(&config));
    assert_eq!(std::fs::read(out.join("metrics.json")).unwrap(), before);
}

#[test]
fn evaluate_reads_back_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_dataset(dir.path());
    run_ok(binary().args(["train", "--config"]).arg(&config));
    let output = run_ok(
        binary()
            .args(["evaluate", "--config"])
            .arg(&config)
            .arg("--checkpoint")
            .arg(dir.path().join("out/checkpoint.json"))
            .args(["--split", "val"]),
    );
    let metrics: serde_json::Value =
        serde_json::from_str(&String::from_utf8(output.stdout).unwrap()).unwrap();
    assert_eq!(metrics["split"], "val");
    assert!(metrics["accuracy"].is_number());
}

#[test]
fn attack_inserts_the_requested_count() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_dataset(dir.path());
    let output = run_ok(
        binary()
            .args(["attack", "--config"])
            .arg(&config)
            .args(["--count", "3"]),
    );
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8(output.stdout).unwrap()).unwrap();
    assert_eq!(report["insertion_count"], 3);
    assert_eq!(report["deletion_count"], 0);

    // count = 0 leaves the graph unchanged.
    run_ok(
        binary()
            .args(["attack", "--config"])
            .arg(&config)
            .args(["--count", "0"]),
    );
    let attacked = std::fs::read(dir.path().join("out/attacked.tsv")).unwrap();
    let original = std::fs::read(dir.path().join("edges.tsv")).unwrap();
    assert_eq!(attacked, original);

    // Deterministic under a fixed seed.
    run_ok(
        binary()
            .args(["attack", "--config"])
            .arg(&config)
            .args(["--count", "3"]),
    );
    let first = std::fs::read(dir.path().join("out/attacked.tsv")).unwrap();
    run_ok(
        binary()
            .args(["attack", "--config"])
            .arg(&config)
            .args(["--count", "3"]),
    );
    assert_eq!(std::fs::read(dir.path().join("out/attacked.tsv")).unwrap(), first);
}

#[test]
fn attacked_graph_round_trips_through_training() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_dataset(dir.path());
    run_ok(
        binary()
            .args(["attack", "--config"])
            .arg(&config)
            .args(["--targets", "0", "--budget", "1"]),
    );
    // Point the config at the manifest and train on the attacked graph.
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&config).unwrap()).unwrap();
    cfg["data"]["attack_manifest"] = serde_json::json!("out/attack.json");
    cfg["out_dir"] = serde_json::json!("out_attacked");
    write(&dir.path().join("config2.json"), &cfg.to_string());
    run_ok(
        binary()
            .args(["train", "--config"])
            .arg(dir.path().join("config2.json")),
    );
    assert!(dir.path().join("out_attacked/metrics.json").is_file());
}

#[test]
fn gradcheck_passes_by_default_and_fails_when_corrupted() {
    let output = run_ok(binary().arg("gradcheck"));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("PASSED"));
    assert!(stdout.contains("max relative error"));

    let output = binary().args(["gradcheck", "--corrupt"]).output().unwrap();
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("FAILED"), "stderr: {stderr}");
}

#[test]
fn sweep_echoes_values_in_order_with_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_dataset(dir.path());
    run_ok(
        binary()
            .args(["sweep", "--config"])
            .arg(&config)
            .args(["--axis", "i-count", "--values", "1,3", "--epochs", "10", "--patience", "10"]),
    );
    let csv = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "axis,value,seed,accuracy,macro_f1,config_hash");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("i_count,1,"));
    assert!(lines[2].starts_with("i_count,3,"));
    for row in &lines[1..] {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 6);
        assert!(fields[2].parse::<u64>().is_ok(), "seed column: {row}");
        assert_eq!(fields[5].len(), 64, "config hash column: {row}");
    }

    // A single value produces a single row.
    run_ok(
        binary()
            .args(["sweep", "--config"])
            .arg(&config)
            .args(["--axis", "q1", "--values", "0.9", "--epochs", "5", "--patience", "5"])
            .args(["--out"])
            .arg(dir.path().join("out_single")),
    );
    let csv = std::fs::read_to_string(dir.path().join("out_single/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn validation_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_dataset(dir.path());
    // Out-of-range endpoint in the edge list.
    write(&dir.path().join("edges.tsv"), "0\t9\n");
    let output = binary()
        .args(["train", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));

    // Missing config file.
    let output = binary()
        .args(["train", "--config"])
        .arg(dir.path().join("nope.json"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}
