//! `edagcn evaluate`: load a checkpoint and report metrics on one split.

use std::path::PathBuf;

use clap::Args as ClapArgs;
use edagcn_core::checkpoint::load_params_for;
use edagcn_core::Split;

use crate::commands::train::Metrics;
use crate::config::{ExperimentConfig, Overrides};
use crate::pipeline::prepare;
use crate::CliError;

#[derive(ClapArgs)]
pub struct Args {
    /// Experiment config (JSON); must describe the same dataset and model
    /// the checkpoint was trained with.
    #[arg(long)]
    config: PathBuf,
    /// Parameter checkpoint to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Data split: train | val | test.
    #[arg(long, default_value = "test")]
    split: String,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    Overrides::default().apply(&mut cfg)?;
    let split = match args.split.as_str() {
        "train" => Split::Train,
        "val" => Split::Val,
        "test" => Split::Test,
        other => return Err(CliError::usage(format!("unknown split {other:?}"))),
    };

    let prepared = prepare(&cfg)?;
    let (params, stored_hash) = load_params_for(&args.checkpoint, &prepared.model_cfg)?;
    let hash = cfg.hash();
    if stored_hash != hash {
        eprintln!(
            "warning: checkpoint was trained under config {stored_hash}, evaluating under {hash}"
        );
    }
    let report = edagcn_core::train::evaluate(
        &params,
        &prepared.x,
        &prepared.powers,
        &prepared.labels,
        prepared.labels.mask(split),
        &prepared.model_cfg,
    )?;
    let metrics = Metrics {
        split: &args.split,
        accuracy: report.accuracy,
        macro_f1: report.macro_f1,
        per_class_f1: report.per_class_f1,
        best_epoch: None,
        epochs_run: None,
        config_hash: &hash,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&metrics).expect("serializable")
    );
    Ok(())
}
