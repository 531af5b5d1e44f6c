//! Full-batch training loop with early stopping, and evaluation.

use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, LabelData};
use crate::error::{Error, Result};
use crate::grad::gradients;
use crate::loss::{cross_entropy, LossBreakdown, SmoothnessVariant};
use crate::metrics::{accuracy, macro_f1, per_class_f1, predictions};
use crate::model::{model_forward, ModelConfig, ParameterSet};
use crate::optim::OptimizerState;
use crate::sparse::AdjacencyPowerSet;

/// Which validation quantity early stopping tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EsMetric {
    #[default]
    ValAccuracy,
    ValLoss,
}

/// Objective weights and optimization schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Smoothness weight.
    pub mu1: f64,
    /// Weight-decay (squared L2) weight.
    pub mu2: f64,
    /// L1 weight on the graph-mixing tensors.
    pub sparsity: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    pub es_metric: EsMetric,
    pub smoothness_variant: SmoothnessVariant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mu1: 0.0,
            mu2: 0.0,
            sparsity: 0.0,
            learning_rate: 0.005,
            max_epochs: 300,
            patience: 60,
            seed: 0,
            es_metric: EsMetric::ValAccuracy,
            smoothness_variant: SmoothnessVariant::Adjacency,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("sparsity", self.sparsity),
        ] {
            if !(v >= 0.0) {
                return Err(Error::validation(format!("{name} = {v} must be >= 0")));
            }
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::validation("learning rate must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::validation("max_epochs must be at least 1"));
        }
        if self.patience > self.max_epochs {
            return Err(Error::validation(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }
}

/// One epoch of history: the objective on the training mask and the
/// validation metrics used for early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
    pub val_accuracy: f64,
    /// Cross-entropy on the validation mask.
    pub val_loss: f64,
}

/// Trained parameters (from the best validation epoch) plus the full
/// epoch history.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub best_params: ParameterSet,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

fn improved(metric: EsMetric, candidate: f64, best: f64) -> bool {
    match metric {
        EsMetric::ValAccuracy => candidate > best,
        EsMetric::ValLoss => candidate < best,
    }
}

/// Full-batch gradient training with early stopping on the validation
/// mask. Deterministic given the seeds in `train_cfg` and the initial
/// parameter seed (which is `train_cfg.seed`).
pub fn train(
    x: &FeatureMatrix,
    powers: &AdjacencyPowerSet,
    labels: &LabelData,
    train_cfg: &TrainConfig,
    model_cfg: &ModelConfig,
) -> Result<TrainResult> {
    train_cfg.validate()?;
    if labels.train_mask().is_empty() {
        return Err(Error::validation("training mask is empty"));
    }
    if labels.val_mask().is_empty() {
        return Err(Error::validation("validation mask is empty"));
    }

    let mut params = crate::model::init_params(model_cfg, train_cfg.seed)?;
    let mut optimizer = OptimizerState::new(&params);
    let mut history = Vec::new();
    let mut best_params = params.clone();
    let mut best_epoch = 0usize;
    let mut best_metric = match train_cfg.es_metric {
        EsMetric::ValAccuracy => f64::NEG_INFINITY,
        EsMetric::ValLoss => f64::INFINITY,
    };
    let mut epochs_since_improvement = 0usize;

    for epoch in 0..train_cfg.max_epochs {
        let (breakdown, grads) = gradients(
            &params,
            x,
            powers,
            labels,
            labels.train_mask(),
            train_cfg,
            model_cfg,
        )?;
        if !breakdown.total.is_finite() {
            return Err(Error::numeric(format!(
                "non-finite loss {} at epoch {epoch}",
                breakdown.total
            )));
        }
        optimizer.step(&mut params, &grads, train_cfg.learning_rate)?;

        let acts = model_forward(x, powers, &params, model_cfg)?;
        let predicted = predictions(acts.y_hat.view());
        let val_accuracy = accuracy(&predicted, labels, labels.val_mask())?;
        let val_loss = cross_entropy(acts.y_hat.view(), labels, labels.val_mask())?;
        history.push(EpochRecord {
            epoch,
            loss: breakdown,
            val_accuracy,
            val_loss,
        });

        let candidate = match train_cfg.es_metric {
            EsMetric::ValAccuracy => val_accuracy,
            EsMetric::ValLoss => val_loss,
        };
        if improved(train_cfg.es_metric, candidate, best_metric) {
            best_metric = candidate;
            best_epoch = epoch;
            best_params = params.clone();
            epochs_since_improvement = 0;
        } else {
            epochs_since_improvement += 1;
            if epochs_since_improvement > train_cfg.patience {
                break;
            }
        }
    }

    Ok(TrainResult {
        best_params,
        best_epoch,
        history,
    })
}

/// Accuracy and F1 scores of a parameter set on one mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
}

pub fn evaluate(
    params: &ParameterSet,
    x: &FeatureMatrix,
    powers: &AdjacencyPowerSet,
    labels: &LabelData,
    mask: &[usize],
    model_cfg: &ModelConfig,
) -> Result<EvalReport> {
    if mask.is_empty() {
        return Err(Error::validation("evaluation mask is empty"));
    }
    let acts = model_forward(x, powers, params, model_cfg)?;
    let predicted = predictions(acts.y_hat.view());
    Ok(EvalReport {
        accuracy: accuracy(&predicted, labels, mask)?,
        macro_f1: macro_f1(&predicted, labels, mask)?,
        per_class_f1: per_class_f1(&predicted, labels, mask)?,
    })
}
