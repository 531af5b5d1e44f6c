//! The training objective and its four terms.
//!
//! total = cross_entropy
//!       + mu1 * smoothness        (trace term over the graph adjacencies)
//!       + mu2 * weight_decay      (squared L2 over hop/feature/output weights)
//!       + lambda * sparsity       (L1 over the graph-mixing tensors)
//!
//! The smoothness term is the literal adjacency trace
//! `sum_i trace(Y^T A_i Y)`; a Laplacian variant is available behind
//! [`SmoothnessVariant`]. The L2 term deliberately skips the graph-mixing
//! tensors (they carry the L1 penalty) and the output bias.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::data::LabelData;
use crate::error::{Error, Result};
use crate::model::{model_forward, Activations, ModelConfig, ParameterSet};
use crate::sparse::AdjacencyPowerSet;
use crate::train::TrainConfig;

/// Floor applied to probabilities inside `ln`, guarding saturated rows.
pub(crate) const PROB_FLOOR: f64 = 1e-12;

/// Which quadratic form the smoothness term uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessVariant {
    /// `sum_i trace(Y^T A_i Y)`, exactly as the objective is written.
    #[default]
    Adjacency,
    /// `sum_i trace(Y^T (D_i - A_i) Y)`, the graph-Laplacian form.
    Laplacian,
}

/// The objective value split into its four terms;
/// `total = cross_entropy + mu1*smoothness + mu2*weight_decay + lambda*sparsity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub cross_entropy: f64,
    pub smoothness: f64,
    pub weight_decay: f64,
    pub sparsity: f64,
}

/// Summed negative log-likelihood of the true classes over `mask`,
/// computed from the probability matrix. The logarithm is guarded by
/// clamping probabilities to at least 1e-12.
pub fn cross_entropy(y_hat: ArrayView2<f64>, labels: &LabelData, mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::validation(
            "cross-entropy over an empty mask is undefined",
        ));
    }
    let mut total = 0.0;
    for &node in mask {
        let class = labels.label_of(node).ok_or_else(|| {
            Error::validation(format!("node {node} in mask has no label"))
        })?;
        if node >= y_hat.nrows() || class >= y_hat.ncols() {
            return Err(Error::shape(format!(
                "prediction matrix {:?} cannot index node {node}, class {class}",
                y_hat.dim()
            )));
        }
        total -= y_hat[[node, class]].max(PROB_FLOOR).ln();
    }
    Ok(total)
}

/// The same negative log-likelihood evaluated from the logits via
/// log-sum-exp. Equal to [`cross_entropy`] wherever the probabilities are
/// representable, but stays exact (and finite) under softmax saturation,
/// which is why the training objective uses this form.
pub(crate) fn cross_entropy_from_logits(
    logits: ArrayView2<f64>,
    labels: &LabelData,
    mask: &[usize],
) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::validation(
            "cross-entropy over an empty mask is undefined",
        ));
    }
    let mut total = 0.0;
    for &node in mask {
        let class = labels.label_of(node).ok_or_else(|| {
            Error::validation(format!("node {node} in mask has no label"))
        })?;
        if node >= logits.nrows() || class >= logits.ncols() {
            return Err(Error::shape(format!(
                "logit matrix {:?} cannot index node {node}, class {class}",
                logits.dim()
            )));
        }
        let row = logits.row(node);
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let log_sum = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
        total += log_sum - row[class];
    }
    Ok(total)
}

/// `sum_i trace(Y^T A_i Y)` over the 1-hop matrices of `powers`
/// (or the Laplacian form, depending on `variant`).
pub fn smoothness_reg(
    y_hat: ArrayView2<f64>,
    powers: &AdjacencyPowerSet,
    variant: SmoothnessVariant,
) -> f64 {
    let mut total = 0.0;
    for i in 0..powers.n_graphs() {
        let base = powers.base(i);
        let adjacency_trace = base.trace_quadratic(y_hat);
        total += match variant {
            SmoothnessVariant::Adjacency => adjacency_trace,
            SmoothnessVariant::Laplacian => {
                let degree_trace: f64 = base
                    .row_sums()
                    .iter()
                    .zip(y_hat.rows())
                    .map(|(&d, row)| d * row.dot(&row))
                    .sum();
                degree_trace - adjacency_trace
            }
        };
    }
    total
}

/// Squared L2 norm over hop coefficients, feature-mixing tensors, and the
/// output weights. Graph-mixing tensors and the bias are excluded.
pub fn weight_decay_reg(params: &ParameterSet) -> f64 {
    let mut total = 0.0;
    for layer in params.z_layers.iter().chain(params.x_layers.iter()) {
        total += layer.hop_coeffs.iter().map(|v| v * v).sum::<f64>();
        total += layer
            .feature_mix
            .as_slice()
            .iter()
            .map(|v| v * v)
            .sum::<f64>();
    }
    total += params.output.weights.iter().map(|v| v * v).sum::<f64>();
    total
}

/// L1 norm of every graph-mixing tensor, both stacks, all layers.
pub fn sparsity_reg(params: &ParameterSet) -> f64 {
    params
        .z_layers
        .iter()
        .chain(params.x_layers.iter())
        .map(|layer| layer.graph_mix.as_slice().iter().map(|v| v.abs()).sum::<f64>())
        .sum()
}

pub(crate) fn assemble(
    acts: &Activations,
    params: &ParameterSet,
    powers: &AdjacencyPowerSet,
    labels: &LabelData,
    mask: &[usize],
    cfg: &TrainConfig,
) -> Result<LossBreakdown> {
    let cross_entropy = cross_entropy_from_logits(acts.logits.view(), labels, mask)?;
    let smoothness = smoothness_reg(acts.y_hat.view(), powers, cfg.smoothness_variant);
    let weight_decay = weight_decay_reg(params);
    let sparsity = sparsity_reg(params);
    let total = cross_entropy
        + cfg.mu1 * smoothness
        + cfg.mu2 * weight_decay
        + cfg.sparsity * sparsity;
    Ok(LossBreakdown {
        total,
        cross_entropy,
        smoothness,
        weight_decay,
        sparsity,
    })
}

/// Run a forward pass and assemble the objective. Returns the activations
/// alongside so callers can reuse them.
pub fn loss(
    params: &ParameterSet,
    x: &crate::data::FeatureMatrix,
    powers: &AdjacencyPowerSet,
    labels: &LabelData,
    mask: &[usize],
    train_cfg: &TrainConfig,
    model_cfg: &ModelConfig,
) -> Result<(LossBreakdown, Activations)> {
    let acts = model_forward(x, powers, params, model_cfg)?;
    let breakdown = assemble(&acts, params, powers, labels, mask, train_cfg)?;
    Ok((breakdown, acts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureMatrix;
    use crate::graph::Graph;
    use crate::model::{init_params, GraphMix, MixMode, ModelConfig, OutputMode};
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    fn labels2() -> LabelData {
        LabelData::new(vec![Some(0), Some(1)], vec![0, 1], vec![], vec![]).unwrap()
    }

    #[test]
    fn cross_entropy_perfect_prediction_is_zero() {
        let y_hat = array![[1.0, 0.0], [0.0, 1.0]];
        let value = cross_entropy(y_hat.view(), &labels2(), &[0, 1]).unwrap();
        assert_eq!(value, 0.0);
    }

    #[test]
    fn cross_entropy_half_probability() {
        let y_hat = array![[0.5, 0.5], [0.0, 1.0]];
        let value = cross_entropy(y_hat.view(), &labels2(), &[0]).unwrap();
        assert_abs_diff_eq!(value, 2.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn cross_entropy_two_nodes() {
        let y_hat = array![[0.5, 0.5], [0.75, 0.25]];
        let value = cross_entropy(y_hat.view(), &labels2(), &[0, 1]).unwrap();
        assert_abs_diff_eq!(value, 2.0f64.ln() + 4.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn cross_entropy_empty_mask_errors() {
        let y_hat = array![[1.0, 0.0], [0.0, 1.0]];
        assert!(cross_entropy(y_hat.view(), &labels2(), &[]).is_err());
    }

    #[test]
    fn smoothness_edgeless_is_zero() {
        let powers = AdjacencyPowerSet::from_graphs(&[Graph::empty(3)], 1).unwrap();
        let y = Array2::from_elem((3, 2), 0.5);
        assert_eq!(
            smoothness_reg(y.view(), &powers, SmoothnessVariant::Adjacency),
            0.0
        );
    }

    #[test]
    fn smoothness_single_edge_counts_both_directions() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let powers = AdjacencyPowerSet::from_graphs(&[g], 1).unwrap();
        let y = array![[1.0, 0.0], [1.0, 0.0]];
        assert_eq!(
            smoothness_reg(y.view(), &powers, SmoothnessVariant::Adjacency),
            2.0
        );
    }

    #[test]
    fn smoothness_is_linear_in_graph_copies() {
        let g = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        let y = array![[0.9, 0.1], [0.4, 0.6], [0.2, 0.8]];
        let one = AdjacencyPowerSet::from_graphs(&[g.clone()], 1).unwrap();
        let three = AdjacencyPowerSet::from_graphs(&[g.clone(), g.clone(), g], 1).unwrap();
        let single = smoothness_reg(y.view(), &one, SmoothnessVariant::Adjacency);
        let triple = smoothness_reg(y.view(), &three, SmoothnessVariant::Adjacency);
        assert_abs_diff_eq!(triple, 3.0 * single, epsilon = 1e-12);
    }

    #[test]
    fn laplacian_variant_on_constant_rows_is_zero() {
        // With identical rows, D- and A-quadratic forms coincide.
        let g = Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let powers = AdjacencyPowerSet::from_graphs(&[g], 1).unwrap();
        let y = Array2::from_elem((3, 2), 0.5);
        let value = smoothness_reg(y.view(), &powers, SmoothnessVariant::Laplacian);
        assert_abs_diff_eq!(value, 0.0, epsilon = 1e-12);
    }

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            n_layers: 1,
            widths: vec![2],
            k_hop: 1,
            i_count: 1,
            n_nodes: 2,
            in_features: 2,
            n_classes: 2,
            r_mode: MixMode::Shared,
            w_mode: MixMode::Shared,
            residual: false,
            output_mode: OutputMode::Flatten,
        }
    }

    #[test]
    fn weight_decay_examples() {
        let cfg = tiny_cfg();
        let mut params = init_params(&cfg, 1).unwrap().zeros_like();
        assert_eq!(weight_decay_reg(&params), 0.0);
        params.output.weights[[0, 0]] = 3.0;
        assert_eq!(weight_decay_reg(&params), 9.0);
        params.output.weights[[0, 0]] = 1.0;
        params.output.weights[[1, 1]] = -2.0;
        assert_eq!(weight_decay_reg(&params), 5.0);
        // The graph-mixing tensor and bias must not contribute.
        params.z_layers[0].graph_mix = GraphMix::Shared(array![[7.0]]);
        params.output.bias[0] = 4.0;
        assert_eq!(weight_decay_reg(&params), 5.0);
    }

    #[test]
    fn sparsity_examples() {
        let mut cfg = tiny_cfg();
        cfg.i_count = 3;
        let mut params = init_params(&cfg, 1).unwrap().zeros_like();
        assert_eq!(sparsity_reg(&params), 0.0);
        params.z_layers[0].graph_mix = GraphMix::Shared(Array2::eye(3));
        assert_eq!(sparsity_reg(&params), 3.0);
        params.z_layers[0].graph_mix =
            GraphMix::Shared(array![[0.5, 0.0, 0.0], [0.0, -0.5, 0.0], [0.0, 0.0, 0.0]]);
        assert_eq!(sparsity_reg(&params), 1.0);
    }

    #[test]
    fn loss_assembles_terms() {
        let cfg = tiny_cfg();
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let powers = AdjacencyPowerSet::from_graphs(&[g], 1).unwrap();
        let params = init_params(&cfg, 9).unwrap();
        let x = FeatureMatrix::identity(2);
        let labels = labels2();
        let tcfg = TrainConfig {
            mu1: 0.3,
            mu2: 0.2,
            sparsity: 0.1,
            ..TrainConfig::default()
        };
        let (breakdown, acts) = loss(
            &params,
            &x,
            &powers,
            &labels,
            labels.train_mask(),
            &tcfg,
            &cfg,
        )
        .unwrap();
        let expected = breakdown.cross_entropy
            + 0.3 * breakdown.smoothness
            + 0.2 * breakdown.weight_decay
            + 0.1 * breakdown.sparsity;
        assert_abs_diff_eq!(breakdown.total, expected, epsilon = 1e-10 * expected.abs());
        assert_abs_diff_eq!(
            breakdown.cross_entropy,
            cross_entropy(acts.y_hat.view(), &labels, &[0, 1]).unwrap(),
            epsilon = 1e-12
        );

        // With all regularizer weights zero the total is the data term.
        let plain = TrainConfig::default();
        let (b2, _) = loss(
            &params,
            &x,
            &powers,
            &labels,
            labels.train_mask(),
            &plain,
            &cfg,
        )
        .unwrap();
        assert_eq!(b2.total, b2.cross_entropy);
    }
}
