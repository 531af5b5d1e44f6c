//! `edagcn train`: full training run. Emits one JSON line per epoch to
//! history.jsonl, the best-epoch checkpoint, and test metrics.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args as ClapArgs;
use edagcn_core::checkpoint::save_params;
use edagcn_core::train::train;
use serde::Serialize;

use crate::config::{ExperimentConfig, Overrides};
use crate::pipeline::{prepare, Prepared};
use crate::CliError;

#[derive(ClapArgs)]
pub struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Serialize)]
struct HistoryLine<'a> {
    epoch: usize,
    total: f64,
    cross_entropy: f64,
    smoothness: f64,
    weight_decay: f64,
    sparsity: f64,
    val_accuracy: f64,
    val_loss: f64,
    config_hash: &'a str,
}

#[derive(Serialize)]
pub struct Metrics<'a> {
    pub split: &'a str,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs_run: Option<usize>,
    pub config_hash: &'a str,
}

/// Run the full pipeline for an already-resolved config; reused by the
/// sweep command. Returns the test metrics JSON.
pub fn run_resolved(cfg: &ExperimentConfig, out_dir: &Path) -> Result<String, CliError> {
    let hash = cfg.hash();
    let prepared: Prepared = prepare(cfg)?;
    let result = train(
        &prepared.x,
        &prepared.powers,
        &prepared.labels,
        &cfg.train,
        &prepared.model_cfg,
    )?;

    std::fs::create_dir_all(out_dir).map_err(edagcn_core::Error::from)?;
    let mut history = std::io::BufWriter::new(
        std::fs::File::create(out_dir.join("history.jsonl")).map_err(edagcn_core::Error::from)?,
    );
    for record in &result.history {
        let line = HistoryLine {
            epoch: record.epoch,
            total: record.loss.total,
            cross_entropy: record.loss.cross_entropy,
            smoothness: record.loss.smoothness,
            weight_decay: record.loss.weight_decay,
            sparsity: record.loss.sparsity,
            val_accuracy: record.val_accuracy,
            val_loss: record.val_loss,
            config_hash: &hash,
        };
        writeln!(history, "{}", serde_json::to_string(&line).expect("serializable"))
            .map_err(edagcn_core::Error::from)?;
    }
    drop(history);

    save_params(
        out_dir.join("checkpoint.json"),
        &prepared.model_cfg,
        &result.best_params,
        &hash,
    )?;

    let report = edagcn_core::train::evaluate(
        &result.best_params,
        &prepared.x,
        &prepared.powers,
        &prepared.labels,
        prepared.labels.test_mask(),
        &prepared.model_cfg,
    )?;
    let metrics = Metrics {
        split: "test",
        accuracy: report.accuracy,
        macro_f1: report.macro_f1,
        per_class_f1: report.per_class_f1,
        best_epoch: Some(result.best_epoch),
        epochs_run: Some(result.history.len()),
        config_hash: &hash,
    };
    let json = serde_json::to_string_pretty(&metrics).expect("serializable");
    std::fs::write(out_dir.join("metrics.json"), &json).map_err(edagcn_core::Error::from)?;
    Ok(json)
}

pub fn run(args: Args) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    args.overrides.apply(&mut cfg)?;
    cfg.write_resolved(&cfg.out_dir)?;
    let metrics = run_resolved(&cfg, &cfg.out_dir.clone())?;
    println!("{metrics}");
    Ok(())
}
