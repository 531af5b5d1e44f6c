//! `edagcn gradcheck`: finite-difference verification of the analytic
//! gradients, either on a built-in small instance or on the configured
//! dataset. Exits nonzero when the check fails.

use std::path::PathBuf;

use clap::Args as ClapArgs;
use edagcn_core::dither::{dither, DitherConfig};
use edagcn_core::model::{init_params, MixMode, ModelConfig, OutputMode};
use edagcn_core::sparse::AdjacencyPowerSet;
use edagcn_core::train::TrainConfig;
use edagcn_core::{grad_check, FeatureMatrix, GradCheckOptions, Graph, LabelData};
use ndarray::Array2;
use rand::Rng;

use crate::config::{ExperimentConfig, Overrides};
use crate::pipeline::prepare;
use crate::CliError;

#[derive(ClapArgs)]
pub struct Args {
    /// Optional experiment config; the built-in instance is used when
    /// absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    /// Maximum allowed relative error.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    /// Deliberately corrupt one gradient entry; the check must then fail.
    #[arg(long)]
    corrupt: bool,
    #[command(flatten)]
    overrides: Overrides,
}

/// Small seeded instance: 12 nodes, 3 dithered graphs, 2 layers,
/// every loss term active.
fn builtin_instance() -> Result<
    (
        ModelConfig,
        TrainConfig,
        FeatureMatrix,
        AdjacencyPowerSet,
        LabelData,
    ),
    CliError,
> {
    let n = 12;
    let mut rng = edagcn_core::rng::seeded(2020);
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
        .filter(|_| rng.random_bool(0.3))
        .collect();
    let source = Graph::new(n, edges)?;
    let set = dither(
        &source,
        &DitherConfig {
            q1: 0.9,
            q2: 0.95,
            i_count: 3,
            seed: 41,
        },
    )?;
    let powers = AdjacencyPowerSet::from_graphs(set.graphs(), 2)?;
    let x = FeatureMatrix::new(Array2::from_shape_fn((n, 4), |(r, c)| {
        ((r * 5 + c * 3) % 9) as f64 / 4.0 - 1.0
    }))?;
    let labels = LabelData::new(
        (0..n).map(|i| Some(i % 3)).collect(),
        (0..6).collect(),
        (6..9).collect(),
        (9..12).collect(),
    )?;
    let model_cfg = ModelConfig {
        n_layers: 2,
        widths: vec![4, 3],
        k_hop: 2,
        i_count: 3,
        n_nodes: n,
        in_features: 4,
        n_classes: 3,
        r_mode: MixMode::Shared,
        w_mode: MixMode::Shared,
        residual: true,
        output_mode: OutputMode::Flatten,
    };
    let train_cfg = TrainConfig {
        mu1: 0.05,
        mu2: 0.01,
        sparsity: 0.02,
        ..TrainConfig::default()
    };
    Ok((model_cfg, train_cfg, x, powers, labels))
}

pub fn run(args: Args) -> Result<(), CliError> {
    let opts = GradCheckOptions {
        step: args.step,
        tolerance: args.tolerance,
        corrupt: args.corrupt,
    };
    let report = match &args.config {
        None => {
            let (model_cfg, train_cfg, x, powers, labels) = builtin_instance()?;
            let mut params = init_params(&model_cfg, 2020)?;
            // Keep the check point clear of the L1 kink.
            for slice in params.tensor_slices_mut() {
                for v in slice {
                    let sign = if *v < 0.0 { -1.0 } else { 1.0 };
                    *v = sign * v.abs().max(0.03);
                }
            }
            grad_check(
                &params,
                &x,
                &powers,
                &labels,
                labels.train_mask(),
                &train_cfg,
                &model_cfg,
                opts,
            )?
        }
        Some(path) => {
            let mut cfg = ExperimentConfig::load(path)?;
            args.overrides.apply(&mut cfg)?;
            let prepared = prepare(&cfg)?;
            if prepared.model_cfg.n_nodes > 64 {
                return Err(CliError::usage(
                    "gradient checking is quadratic in the parameter count; use a dataset with at most 64 nodes",
                ));
            }
            let params = init_params(&prepared.model_cfg, cfg.train.seed)?;
            grad_check(
                &params,
                &prepared.x,
                &prepared.powers,
                &prepared.labels,
                prepared.labels.train_mask(),
                &cfg.train,
                &prepared.model_cfg,
                opts,
            )?
        }
    };

    println!(
        "checked {} entries ({} skipped as zero); max relative error {:.3e} at {}",
        report.checked, report.skipped, report.max_rel_error, report.worst_parameter
    );
    if report.pass {
        println!("gradient check PASSED at tolerance {:.1e}", args.tolerance);
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "gradient check FAILED: max relative error {:.3e} at {} exceeds {:.1e}",
            report.max_rel_error, report.worst_parameter, args.tolerance
        )))
    }
}
