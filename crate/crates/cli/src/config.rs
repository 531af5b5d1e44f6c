//! Experiment configuration: one JSON document per run, with CLI flag
//! overrides layered on top. The fully resolved config is hashed and
//! written next to the outputs so every artifact can be traced back to
//! exactly what produced it.

use std::path::{Path, PathBuf};

use clap::Args;
use edagcn_core::dither::DitherConfig;
use edagcn_core::model::{MixMode, OutputMode};
use edagcn_core::perturb::NoiseConfig;
use edagcn_core::train::{EsMetric, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Dataset file paths, relative to the config file unless absolute.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataConfig {
    pub n_nodes: usize,
    pub edges: PathBuf,
    /// Feature CSV; identity features are used when absent.
    #[serde(default)]
    pub features: Option<PathBuf>,
    pub labels: PathBuf,
    pub splits: PathBuf,
    /// Manifest of an externally generated attacked graph; when present,
    /// training runs on the attacked topology.
    #[serde(default)]
    pub attack_manifest: Option<PathBuf>,
    /// Additional relation edge lists. A non-empty list switches to
    /// multi-relational mode: the graphs are used directly and the
    /// dithering stage is bypassed.
    #[serde(default)]
    pub extra_edges: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DitherSection {
    pub enabled: bool,
    pub q1: f64,
    pub q2: f64,
    pub i_count: usize,
    pub seed: u64,
}

impl Default for DitherSection {
    fn default() -> Self {
        DitherSection {
            enabled: true,
            q1: 0.9,
            q2: 1.0,
            i_count: 10,
            seed: 0,
        }
    }
}

impl DitherSection {
    pub fn to_core(self) -> DitherConfig {
        DitherConfig {
            q1: self.q1,
            q2: self.q2,
            i_count: self.i_count,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    /// Hidden layer widths; the class count is appended as the final
    /// layer width.
    pub hidden_widths: Vec<usize>,
    pub k_hop: usize,
    pub r_mode: MixMode,
    pub w_mode: MixMode,
    pub residual: bool,
    pub output_mode: OutputMode,
    /// Symmetric degree normalization of each adjacency before powers.
    pub normalize_adjacency: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            hidden_widths: vec![64, 8],
            k_hop: 1,
            r_mode: MixMode::Shared,
            w_mode: MixMode::Shared,
            residual: true,
            output_mode: OutputMode::Flatten,
            normalize_adjacency: false,
        }
    }
}

/// The whole experiment: dataset, dithering, model, training, optional
/// noise, and output location.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub dither: DitherSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub run_seed: u64,
}

impl ExperimentConfig {
    /// Load a config file and make its relative paths absolute with
    /// respect to the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        anchor(&mut cfg.data.edges);
        if let Some(f) = cfg.data.features.as_mut() {
            anchor(f);
        }
        anchor(&mut cfg.data.labels);
        anchor(&mut cfg.data.splits);
        if let Some(m) = cfg.data.attack_manifest.as_mut() {
            anchor(m);
        }
        for extra in cfg.data.extra_edges.iter_mut() {
            anchor(extra);
        }
        anchor(&mut cfg.out_dir);
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Write the resolved config next to the run outputs.
    pub fn write_resolved(&self, out_dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| CliError::usage(format!("cannot create {}: {e}", out_dir.display())))?;
        let json = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(out_dir.join("resolved_config.json"), json)
            .map_err(|e| CliError::usage(e.to_string()))?;
        Ok(())
    }
}

/// Flag overrides shared by the config-driven subcommands. Any flag given
/// here wins over the corresponding config field.
#[derive(Debug, Clone, Args, Default)]
pub struct Overrides {
    /// Run seed (also reseeds dithering and training).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Edge keep probability.
    #[arg(long)]
    pub q1: Option<f64>,
    /// Non-edge keep probability.
    #[arg(long)]
    pub q2: Option<f64>,
    /// Number of dithered graphs.
    #[arg(long)]
    pub i_count: Option<usize>,
    /// Disable dithering (train on the observed graph directly).
    #[arg(long)]
    pub no_dither: bool,
    /// Smoothness weight.
    #[arg(long)]
    pub mu1: Option<f64>,
    /// Weight-decay weight.
    #[arg(long)]
    pub mu2: Option<f64>,
    /// Sparsity (L1) weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Maximum training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Early-stopping patience in epochs.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Diffusion depth per layer.
    #[arg(long)]
    pub k_hop: Option<usize>,
    /// Graph-mixing mode: shared | per_node.
    #[arg(long)]
    pub r_mode: Option<String>,
    /// Feature-mixing mode: shared | per_node.
    #[arg(long)]
    pub w_mode: Option<String>,
    /// Residual input feed: true | false.
    #[arg(long)]
    pub residual: Option<bool>,
    /// Early-stopping metric: val_accuracy | val_loss.
    #[arg(long)]
    pub es_metric: Option<String>,
}

fn parse_mix_mode(s: &str) -> Result<MixMode, CliError> {
    match s {
        "shared" => Ok(MixMode::Shared),
        "per_node" => Ok(MixMode::PerNode),
        other => Err(CliError::usage(format!(
            "unknown mixing mode {other:?} (expected shared or per_node)"
        ))),
    }
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
        if let Some(seed) = self.seed {
            cfg.run_seed = seed;
            cfg.dither.seed = seed;
            cfg.train.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(q1) = self.q1 {
            cfg.dither.q1 = q1;
        }
        if let Some(q2) = self.q2 {
            cfg.dither.q2 = q2;
        }
        if let Some(i_count) = self.i_count {
            cfg.dither.i_count = i_count;
        }
        if self.no_dither {
            cfg.dither.enabled = false;
        }
        if let Some(mu1) = self.mu1 {
            cfg.train.mu1 = mu1;
        }
        if let Some(mu2) = self.mu2 {
            cfg.train.mu2 = mu2;
        }
        if let Some(lambda) = self.lambda {
            cfg.train.sparsity = lambda;
        }
        if let Some(lr) = self.lr {
            cfg.train.learning_rate = lr;
        }
        if let Some(epochs) = self.epochs {
            cfg.train.max_epochs = epochs;
        }
        if let Some(patience) = self.patience {
            cfg.train.patience = patience;
        }
        if let Some(k_hop) = self.k_hop {
            cfg.model.k_hop = k_hop;
        }
        if let Some(mode) = &self.r_mode {
            cfg.model.r_mode = parse_mix_mode(mode)?;
        }
        if let Some(mode) = &self.w_mode {
            cfg.model.w_mode = parse_mix_mode(mode)?;
        }
        if let Some(residual) = self.residual {
            cfg.model.residual = residual;
        }
        if let Some(metric) = &self.es_metric {
            cfg.train.es_metric = match metric.as_str() {
                "val_accuracy" => EsMetric::ValAccuracy,
                "val_loss" => EsMetric::ValLoss,
                other => {
                    return Err(CliError::usage(format!(
                        "unknown early-stopping metric {other:?}"
                    )))
                }
            };
        }
        Ok(())
    }
}
