//! Exact reverse-mode gradients of the training objective, plus a
//! finite-difference checker.
//!
//! The backward pass mirrors the forward stages in reverse: the fused
//! softmax-cross-entropy gradient (`p - y` on masked rows, well defined
//! even under saturation) plus the smoothness term chained through the
//! softmax Jacobian, the output head, then per layer ReLU, feature
//! mixing, graph mixing, and hop aggregation, for both the main and the
//! residual branch. Subgradient conventions: ReLU contributes 0 at
//! exactly 0, and the L1 term's sign is 0 at exactly 0.
//!
//! Hop aggregation relies on the adjacency powers being symmetric, which
//! holds for powers of any symmetric base matrix.

use ndarray::{s, Array2, Array3, Array4, ArrayView2, ArrayView3, Axis, Zip};

use crate::data::{FeatureMatrix, LabelData};
use crate::error::{Error, Result};
use crate::loss::{self, LossBreakdown, SmoothnessVariant};
use crate::model::{
    model_forward, Activations, FeatureMix, GraphMix, ModelConfig, OutputMode, ParameterSet,
};
use crate::sparse::AdjacencyPowerSet;
use crate::train::TrainConfig;

/// Objective value and its gradient with respect to every parameter tensor.
pub fn gradients(
    params: &ParameterSet,
    x: &FeatureMatrix,
    powers: &AdjacencyPowerSet,
    labels: &LabelData,
    mask: &[usize],
    train_cfg: &TrainConfig,
    model_cfg: &ModelConfig,
) -> Result<(LossBreakdown, ParameterSet)> {
    let acts = model_forward(x, powers, params, model_cfg)?;
    let breakdown = loss::assemble(&acts, params, powers, labels, mask, train_cfg)?;
    let grads = backward(params, powers, labels, mask, train_cfg, model_cfg, &acts)?;
    Ok((breakdown, grads))
}

fn backward(
    params: &ParameterSet,
    powers: &AdjacencyPowerSet,
    labels: &LabelData,
    mask: &[usize],
    train_cfg: &TrainConfig,
    model_cfg: &ModelConfig,
    acts: &Activations,
) -> Result<ParameterSet> {
    let mut grads = params.zeros_like();
    let (n, _) = acts.y_hat.dim();

    // Cross-entropy enters as the fused softmax gradient on masked rows;
    // the smoothness quadratic acts on the probabilities and is chained
    // through the softmax Jacobian.
    let mut d_logits = if train_cfg.mu1 != 0.0 {
        let mut d_yhat = Array2::zeros(acts.y_hat.raw_dim());
        for i in 0..powers.n_graphs() {
            let base = powers.base(i);
            let ay = base.mul_dense(acts.y_hat.view())?;
            match train_cfg.smoothness_variant {
                SmoothnessVariant::Adjacency => {
                    d_yhat.scaled_add(2.0 * train_cfg.mu1, &ay);
                }
                SmoothnessVariant::Laplacian => {
                    d_yhat.scaled_add(-2.0 * train_cfg.mu1, &ay);
                    for (node, &degree) in base.row_sums().iter().enumerate() {
                        let y_row = acts.y_hat.row(node);
                        d_yhat
                            .row_mut(node)
                            .scaled_add(2.0 * train_cfg.mu1 * degree, &y_row);
                    }
                }
            }
        }
        softmax_backward(acts.y_hat.view(), d_yhat.view())
    } else {
        Array2::zeros(acts.y_hat.raw_dim())
    };
    for &node in mask {
        let class = labels
            .label_of(node)
            .ok_or_else(|| Error::validation(format!("node {node} in mask has no label")))?;
        let y_row = acts.y_hat.row(node);
        d_logits.row_mut(node).scaled_add(1.0, &y_row);
        d_logits[[node, class]] -= 1.0;
    }

    // Output head.
    let z_last = acts.layers.last().expect("at least one layer").post.view();
    let (_, i_count, p_last) = z_last.dim();
    let mut d_post: Array3<f64> = match model_cfg.output_mode {
        OutputMode::Flatten => {
            let flat = z_last
                .to_shape((n, i_count * p_last))
                .map_err(|e| Error::shape(e.to_string()))?;
            grads.output.weights.assign(&flat.t().dot(&d_logits));
            grads.output.bias.assign(&d_logits.sum_axis(Axis(0)));
            let d_flat = d_logits.dot(&params.output.weights.t());
            d_flat
                .into_shape_with_order((n, i_count, p_last))
                .map_err(|e| Error::shape(e.to_string()))?
        }
        OutputMode::MeanPool => {
            let mean = z_last.mean_axis(Axis(1)).expect("i_count > 0");
            grads.output.weights.assign(&mean.t().dot(&d_logits));
            grads.output.bias.assign(&d_logits.sum_axis(Axis(0)));
            let d_mean = d_logits.dot(&params.output.weights.t()) / i_count as f64;
            let mut d3 = Array3::zeros((n, i_count, p_last));
            for i in 0..i_count {
                d3.slice_mut(s![.., i, ..]).assign(&d_mean);
            }
            d3
        }
    };

    // Layer stack, top down.
    for l in (0..model_cfg.n_layers).rev() {
        let cache = &acts.layers[l];

        // ReLU: zero out where the pre-activation was not positive.
        let mut d_pre = d_post;
        Zip::from(&mut d_pre).and(&cache.pre).for_each(|d, &pre| {
            if pre <= 0.0 {
                *d = 0.0;
            }
        });

        // Main branch.
        let input = if l == 0 {
            acts.x_replicated.view()
        } else {
            acts.layers[l - 1].post.view()
        };
        let main = &params.z_layers[l];
        let (d_g, d_w) = mix_features_backward(cache.g.view(), &main.feature_mix, d_pre.view());
        let (d_h, d_r) = mix_graphs_backward(cache.h.view(), &main.graph_mix, d_g.view());
        let (d_input, d_c) = hop_aggregate_backward(
            input,
            powers,
            main.hop_coeffs.view(),
            d_h.view(),
            true,
        )?;
        let slot = &mut grads.z_layers[l];
        slot.hop_coeffs += &d_c;
        add_into(slot.graph_mix.as_slice_mut(), d_r.as_slice());
        add_into(slot.feature_mix.as_slice_mut(), d_w.as_slice());

        // Residual branch; its input is the constant replicated features,
        // so no gradient flows further down through it.
        if model_cfg.residual {
            let res = &params.x_layers[l];
            let g_res = cache.g_res.as_ref().expect("residual cache");
            let h_res = cache.h_res.as_ref().expect("residual cache");
            let (d_g_res, d_w_res) =
                mix_features_backward(g_res.view(), &res.feature_mix, d_pre.view());
            let (d_h_res, d_r_res) =
                mix_graphs_backward(h_res.view(), &res.graph_mix, d_g_res.view());
            let (_, d_c_res) = hop_aggregate_backward(
                acts.x_replicated.view(),
                powers,
                res.hop_coeffs.view(),
                d_h_res.view(),
                false,
            )?;
            let slot = &mut grads.x_layers[l];
            slot.hop_coeffs += &d_c_res;
            add_into(slot.graph_mix.as_slice_mut(), d_r_res.as_slice());
            add_into(slot.feature_mix.as_slice_mut(), d_w_res.as_slice());
        }

        d_post = d_input.expect("requested input gradient");
    }

    // Regularizers act directly on the parameters.
    if train_cfg.mu2 != 0.0 {
        let two_mu2 = 2.0 * train_cfg.mu2;
        for (slot, layer) in grads
            .z_layers
            .iter_mut()
            .chain(grads.x_layers.iter_mut())
            .zip(params.z_layers.iter().chain(params.x_layers.iter()))
        {
            slot.hop_coeffs.scaled_add(two_mu2, &layer.hop_coeffs);
            add_scaled_into(
                slot.feature_mix.as_slice_mut(),
                layer.feature_mix.as_slice(),
                two_mu2,
            );
        }
        grads
            .output
            .weights
            .scaled_add(two_mu2, &params.output.weights);
    }
    if train_cfg.sparsity != 0.0 {
        for (slot, layer) in grads
            .z_layers
            .iter_mut()
            .chain(grads.x_layers.iter_mut())
            .zip(params.z_layers.iter().chain(params.x_layers.iter()))
        {
            for (g, &r) in slot
                .graph_mix
                .as_slice_mut()
                .iter_mut()
                .zip(layer.graph_mix.as_slice())
            {
                // signum(0) is 0 here: exact zeros stay put.
                if r != 0.0 {
                    *g += train_cfg.sparsity * r.signum();
                }
            }
        }
    }

    Ok(grads)
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn add_scaled_into(dst: &mut [f64], src: &[f64], scale: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += scale * s;
    }
}

/// Row-wise softmax Jacobian product:
/// `out[n,k] = y[n,k] * (d[n,k] - sum_j d[n,j] * y[n,j])`.
fn softmax_backward(y_hat: ArrayView2<f64>, d_y: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(y_hat.raw_dim());
    for ((mut out_row, y_row), d_row) in out
        .rows_mut()
        .into_iter()
        .zip(y_hat.rows())
        .zip(d_y.rows())
    {
        let dot = d_row.dot(&y_row);
        for ((o, &y), &d) in out_row.iter_mut().zip(y_row).zip(d_row) {
            *o = y * (d - dot);
        }
    }
    out
}

fn mix_features_backward(
    g: ArrayView3<f64>,
    w: &FeatureMix,
    d_out: ArrayView3<f64>,
) -> (Array3<f64>, FeatureMix) {
    let (n, i_count, p_in) = g.dim();
    match w {
        FeatureMix::Shared(w) => {
            let mut d_g = Array3::zeros((n, i_count, p_in));
            let mut d_w = Array3::zeros(w.raw_dim());
            for i in 0..i_count {
                let g_slice = g.index_axis(Axis(1), i);
                let d_slice = d_out.index_axis(Axis(1), i);
                let w_slice = w.index_axis(Axis(1), i);
                d_g.index_axis_mut(Axis(1), i)
                    .assign(&d_slice.dot(&w_slice.t()));
                d_w.index_axis_mut(Axis(1), i)
                    .assign(&g_slice.t().dot(&d_slice));
            }
            (d_g, FeatureMix::Shared(d_w))
        }
        FeatureMix::PerNode(w) => {
            let mut d_g = Array3::zeros((n, i_count, p_in));
            let mut d_w = Array4::zeros(w.raw_dim());
            for node in 0..n {
                for i in 0..i_count {
                    let g_vec = g.slice(s![node, i, ..]);
                    let d_vec = d_out.slice(s![node, i, ..]);
                    let w_mat = w.slice(s![.., node, i, ..]);
                    d_g.slice_mut(s![node, i, ..]).assign(&w_mat.dot(&d_vec));
                    let mut d_w_mat = d_w.slice_mut(s![.., node, i, ..]);
                    for (q, &gq) in g_vec.iter().enumerate() {
                        if gq != 0.0 {
                            d_w_mat.row_mut(q).scaled_add(gq, &d_vec);
                        }
                    }
                }
            }
            (d_g, FeatureMix::PerNode(d_w))
        }
    }
}

fn mix_graphs_backward(
    h: ArrayView3<f64>,
    r: &GraphMix,
    d_g: ArrayView3<f64>,
) -> (Array3<f64>, GraphMix) {
    let (n, i_count, p) = h.dim();
    let mut d_h = Array3::zeros((n, i_count, p));
    match r {
        GraphMix::Shared(r) => {
            let mut d_r = Array2::zeros(r.raw_dim());
            for i in 0..i_count {
                let d_slice = d_g.index_axis(Axis(1), i);
                for i2 in 0..i_count {
                    let w = r[[i, i2]];
                    if w != 0.0 {
                        d_h.index_axis_mut(Axis(1), i2).scaled_add(w, &d_slice);
                    }
                    d_r[[i, i2]] = Zip::from(&d_slice)
                        .and(&h.index_axis(Axis(1), i2))
                        .fold(0.0, |acc, &a, &b| acc + a * b);
                }
            }
            (d_h, GraphMix::Shared(d_r))
        }
        GraphMix::PerNode(r) => {
            let mut d_r = Array3::zeros(r.raw_dim());
            for node in 0..n {
                for i in 0..i_count {
                    let d_vec = d_g.slice(s![node, i, ..]);
                    for i2 in 0..i_count {
                        let w = r[[i, i2, node]];
                        if w != 0.0 {
                            d_h.slice_mut(s![node, i2, ..]).scaled_add(w, &d_vec);
                        }
                        d_r[[i, i2, node]] = d_vec.dot(&h.slice(s![node, i2, ..]));
                    }
                }
            }
            (d_h, GraphMix::PerNode(d_r))
        }
    }
}

/// Backward of hop aggregation. Returns the gradient with respect to the
/// layer input (if requested) and to the hop coefficients. Uses the
/// symmetry of the power matrices in place of their transpose.
fn hop_aggregate_backward(
    input: ArrayView3<f64>,
    powers: &AdjacencyPowerSet,
    coeffs: ArrayView2<f64>,
    d_h: ArrayView3<f64>,
    want_d_input: bool,
) -> Result<(Option<Array3<f64>>, Array2<f64>)> {
    let (n, i_count, p) = input.dim();
    let mut d_input = want_d_input.then(|| Array3::zeros((n, i_count, p)));
    let mut d_c = Array2::zeros(coeffs.raw_dim());
    for i in 0..i_count {
        let input_slice = input.index_axis(Axis(1), i);
        let d_h_slice = d_h.index_axis(Axis(1), i);
        for k in 1..=powers.k_hop() {
            let matrix = powers.hop(i, k);
            // d_c[k,i] = <S_i^k input_i, d_h_i>
            let diffused = matrix.mul_dense(input_slice)?;
            d_c[[k - 1, i]] = Zip::from(&diffused)
                .and(&d_h_slice)
                .fold(0.0, |acc, &a, &b| acc + a * b);
            if let Some(d_input) = d_input.as_mut() {
                let c = coeffs[[k - 1, i]];
                if c != 0.0 {
                    let mut slot = d_input.index_axis_mut(Axis(1), i);
                    matrix.add_scaled_mul_dense(c, d_h_slice, &mut slot)?;
                }
            }
        }
    }
    Ok((d_input, d_c))
}

/// Options for [`grad_check`].
#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Maximum allowed relative error.
    pub tolerance: f64,
    /// Deliberately double the largest analytic gradient entry before
    /// comparing — a self-test that the checker catches wrong gradients.
    pub corrupt: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            tolerance: 1e-4,
            corrupt: false,
        }
    }
}

/// Outcome of a finite-difference sweep over every parameter entry.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Name and flat index of the entry with the largest relative error.
    pub worst_parameter: String,
    pub pass: bool,
    /// Entries compared / excluded (both gradients below 1e-10).
    pub checked: usize,
    pub skipped: usize,
}

/// Compare analytic gradients against central finite differences,
/// entry by entry. Relative error is `|a - f| / max(|a|, |f|, 1e-8)`;
/// entries where both magnitudes are below 1e-10 are excluded.
#[allow(clippy::too_many_arguments)]
pub fn grad_check(
    params: &ParameterSet,
    x: &FeatureMatrix,
    powers: &AdjacencyPowerSet,
    labels: &LabelData,
    mask: &[usize],
    train_cfg: &TrainConfig,
    model_cfg: &ModelConfig,
    opts: GradCheckOptions,
) -> Result<GradCheckReport> {
    let (_, mut analytic) =
        gradients(params, x, powers, labels, mask, train_cfg, model_cfg)?;

    if opts.corrupt {
        let mut slices = analytic.tensor_slices_mut();
        let mut target: Option<(usize, usize, f64)> = None;
        for (t, slice) in slices.iter().enumerate() {
            for (e, &v) in slice.iter().enumerate() {
                if target.map_or(true, |(_, _, best)| v.abs() > best) {
                    target = Some((t, e, v.abs()));
                }
            }
        }
        if let Some((t, e, magnitude)) = target {
            if magnitude > 0.0 {
                slices[t][e] *= 2.0;
            } else {
                slices[t][e] += 1.0;
            }
        }
    }

    let names = params.tensor_names();
    let analytic_slices: Vec<Vec<f64>> = analytic
        .tensor_slices()
        .into_iter()
        .map(<[f64]>::to_vec)
        .collect();

    let mut work = params.clone();
    let mut max_rel_error = 0.0f64;
    let mut worst_parameter = String::from("(none)");
    let mut checked = 0usize;
    let mut skipped = 0usize;

    let n_tensors = analytic_slices.len();
    for t in 0..n_tensors {
        for e in 0..analytic_slices[t].len() {
            let base = work.tensor_slices()[t][e];

            work.tensor_slices_mut()[t][e] = base + opts.step;
            let plus = loss::loss(&work, x, powers, labels, mask, train_cfg, model_cfg)?
                .0
                .total;
            work.tensor_slices_mut()[t][e] = base - opts.step;
            let minus = loss::loss(&work, x, powers, labels, mask, train_cfg, model_cfg)?
                .0
                .total;
            work.tensor_slices_mut()[t][e] = base;

            let numeric = (plus - minus) / (2.0 * opts.step);
            let exact = analytic_slices[t][e];
            if exact.abs() < 1e-10 && numeric.abs() < 1e-10 {
                skipped += 1;
                continue;
            }
            checked += 1;
            let rel = (exact - numeric).abs() / exact.abs().max(numeric.abs()).max(1e-8);
            if rel > max_rel_error {
                max_rel_error = rel;
                worst_parameter = format!("{}[{e}]", names[t]);
            }
        }
    }

    Ok(GradCheckReport {
        max_rel_error,
        worst_parameter,
        pass: max_rel_error < opts.tolerance,
        checked,
        skipped,
    })
}
