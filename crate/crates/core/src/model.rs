//! The adaptive multi-graph convolutional model.
//!
//! Each layer maps an `N x I x P` activation tensor (node, graph slice,
//! feature) through three stages:
//!
//! 1. hop aggregation — per graph slice, features diffuse over the k-hop
//!    neighborhoods with learnable per-hop coefficients;
//! 2. graph mixing — features are recombined across the I graph slices
//!    with learnable mixing weights, optionally different per node;
//! 3. feature mixing — a learnable linear map on the feature axis,
//!    optionally different per node.
//!
//! With the residual feed enabled, the raw input features pass through a
//! parallel copy of the same three stages and are added before the ReLU.
//! The output head flattens (or averages) the graph slices and applies an
//! affine map followed by a row softmax.
//!
//! Everything here is pure and deterministic; loops run in a fixed order so
//! repeated evaluations are bitwise identical.

use ndarray::{s, Array1, Array2, Array3, Array4, ArrayView2, ArrayView3, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::rng;
use crate::sparse::AdjacencyPowerSet;

/// Whether a mixing tensor is shared across nodes or has one slice per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixMode {
    Shared,
    PerNode,
}

/// How the output head consumes the final `N x I x P` tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    /// Affine map on the flattened `I * P` vector per node (default).
    Flatten,
    /// Average over the I graph slices, then an affine map on `P`.
    MeanPool,
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    /// Output width of each layer, `widths.len() == n_layers`.
    pub widths: Vec<usize>,
    pub k_hop: usize,
    pub i_count: usize,
    pub n_nodes: usize,
    pub in_features: usize,
    pub n_classes: usize,
    pub r_mode: MixMode,
    pub w_mode: MixMode,
    pub residual: bool,
    pub output_mode: OutputMode,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 {
            return Err(Error::validation("need at least one layer"));
        }
        if self.widths.len() != self.n_layers {
            return Err(Error::shape(format!(
                "{} widths for {} layers",
                self.widths.len(),
                self.n_layers
            )));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(Error::validation("layer widths must be positive"));
        }
        if self.k_hop == 0 || self.i_count == 0 || self.n_nodes == 0 {
            return Err(Error::validation(
                "k_hop, i_count, and n_nodes must be positive",
            ));
        }
        if self.in_features == 0 || self.n_classes == 0 {
            return Err(Error::validation(
                "in_features and n_classes must be positive",
            ));
        }
        Ok(())
    }

    /// Input width of layer `l` (0-based): the feature count at `l = 0`,
    /// the previous layer's width otherwise.
    pub fn input_width(&self, layer_index: usize) -> usize {
        if layer_index == 0 {
            self.in_features
        } else {
            self.widths[layer_index - 1]
        }
    }

    pub fn last_width(&self) -> usize {
        *self.widths.last().expect("validated non-empty")
    }

    /// Number of rows of the output weight matrix.
    pub fn output_rows(&self) -> usize {
        match self.output_mode {
            OutputMode::Flatten => self.i_count * self.last_width(),
            OutputMode::MeanPool => self.last_width(),
        }
    }
}

/// Graph-mixing weights: `[I, I]` shared, or `[I, I, N]` per node.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphMix {
    Shared(Array2<f64>),
    PerNode(Array3<f64>),
}

impl GraphMix {
    pub fn as_slice(&self) -> &[f64] {
        match self {
            GraphMix::Shared(a) => a.as_slice().expect("standard layout"),
            GraphMix::PerNode(a) => a.as_slice().expect("standard layout"),
        }
    }

    pub fn as_slice_mut(&mut self) -> &mut [f64] {
        match self {
            GraphMix::Shared(a) => a.as_slice_mut().expect("standard layout"),
            GraphMix::PerNode(a) => a.as_slice_mut().expect("standard layout"),
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            GraphMix::Shared(a) => GraphMix::Shared(Array2::zeros(a.raw_dim())),
            GraphMix::PerNode(a) => GraphMix::PerNode(Array3::zeros(a.raw_dim())),
        }
    }
}

/// Feature-mixing weights: `[P_in, I, P_out]` shared, or
/// `[P_in, N, I, P_out]` per node.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMix {
    Shared(Array3<f64>),
    PerNode(Array4<f64>),
}

impl FeatureMix {
    pub fn as_slice(&self) -> &[f64] {
        match self {
            FeatureMix::Shared(a) => a.as_slice().expect("standard layout"),
            FeatureMix::PerNode(a) => a.as_slice().expect("standard layout"),
        }
    }

    pub fn as_slice_mut(&mut self) -> &mut [f64] {
        match self {
            FeatureMix::Shared(a) => a.as_slice_mut().expect("standard layout"),
            FeatureMix::PerNode(a) => a.as_slice_mut().expect("standard layout"),
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            FeatureMix::Shared(a) => FeatureMix::Shared(Array3::zeros(a.raw_dim())),
            FeatureMix::PerNode(a) => FeatureMix::PerNode(Array4::zeros(a.raw_dim())),
        }
    }
}

/// Trainable tensors of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// `[K_hop, I]` per-hop diffusion coefficients.
    pub hop_coeffs: Array2<f64>,
    pub graph_mix: GraphMix,
    pub feature_mix: FeatureMix,
}

impl LayerParams {
    fn zeros_like(&self) -> Self {
        LayerParams {
            hop_coeffs: Array2::zeros(self.hop_coeffs.raw_dim()),
            graph_mix: self.graph_mix.zeros_like(),
            feature_mix: self.feature_mix.zeros_like(),
        }
    }
}

/// Output head: affine map from pooled/flattened features to class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputParams {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// All trainable tensors of a model: the main layer stack, the residual
/// input stack (empty when the residual feed is off), and the output head.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub z_layers: Vec<LayerParams>,
    pub x_layers: Vec<LayerParams>,
    pub output: OutputParams,
}

impl ParameterSet {
    pub fn zeros_like(&self) -> Self {
        ParameterSet {
            z_layers: self.z_layers.iter().map(LayerParams::zeros_like).collect(),
            x_layers: self.x_layers.iter().map(LayerParams::zeros_like).collect(),
            output: OutputParams {
                weights: Array2::zeros(self.output.weights.raw_dim()),
                bias: Array1::zeros(self.output.bias.raw_dim()),
            },
        }
    }

    /// Stable names of all tensors, in the same order the slice accessors
    /// use. Layer indices are 1-based.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (stack, params) in [("z", &self.z_layers), ("x", &self.x_layers)] {
            for (l, _) in params.iter().enumerate() {
                names.push(format!("{stack}{}.hop_coeffs", l + 1));
                names.push(format!("{stack}{}.graph_mix", l + 1));
                names.push(format!("{stack}{}.feature_mix", l + 1));
            }
        }
        names.push("output.weights".into());
        names.push("output.bias".into());
        names
    }

    /// Flat views of every tensor, in `tensor_names` order.
    pub fn tensor_slices(&self) -> Vec<&[f64]> {
        let mut slices = Vec::new();
        for params in self.z_layers.iter().chain(self.x_layers.iter()) {
            slices.push(params.hop_coeffs.as_slice().expect("standard layout"));
            slices.push(params.graph_mix.as_slice());
            slices.push(params.feature_mix.as_slice());
        }
        slices.push(self.output.weights.as_slice().expect("standard layout"));
        slices.push(self.output.bias.as_slice().expect("standard layout"));
        slices
    }

    /// Mutable flat views of every tensor, in `tensor_names` order.
    pub fn tensor_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut slices: Vec<&mut [f64]> = Vec::new();
        for params in self.z_layers.iter_mut().chain(self.x_layers.iter_mut()) {
            slices.push(params.hop_coeffs.as_slice_mut().expect("standard layout"));
            slices.push(params.graph_mix.as_slice_mut());
            slices.push(params.feature_mix.as_slice_mut());
        }
        slices.push(self.output.weights.as_slice_mut().expect("standard layout"));
        slices.push(self.output.bias.as_slice_mut().expect("standard layout"));
        slices
    }

    pub fn n_params(&self) -> usize {
        self.tensor_slices().iter().map(|s| s.len()).sum()
    }

    /// Verify every tensor has the shape `cfg` prescribes.
    pub fn check_shapes(&self, cfg: &ModelConfig) -> Result<()> {
        if self.z_layers.len() != cfg.n_layers {
            return Err(Error::shape(format!(
                "{} main layers, config says {}",
                self.z_layers.len(),
                cfg.n_layers
            )));
        }
        let expected_x = if cfg.residual { cfg.n_layers } else { 0 };
        if self.x_layers.len() != expected_x {
            return Err(Error::shape(format!(
                "{} residual layers, config says {expected_x}",
                self.x_layers.len()
            )));
        }
        for (stack, in_width_of, layers) in [
            (
                "z",
                Box::new(|l: usize| cfg.input_width(l)) as Box<dyn Fn(usize) -> usize>,
                &self.z_layers,
            ),
            (
                "x",
                Box::new(|_: usize| cfg.in_features),
                &self.x_layers,
            ),
        ] {
            for (l, params) in layers.iter().enumerate() {
                let p_in = in_width_of(l);
                let p_out = cfg.widths[l];
                if params.hop_coeffs.dim() != (cfg.k_hop, cfg.i_count) {
                    return Err(Error::shape(format!(
                        "{stack}{}.hop_coeffs is {:?}, want ({}, {})",
                        l + 1,
                        params.hop_coeffs.dim(),
                        cfg.k_hop,
                        cfg.i_count
                    )));
                }
                let graph_ok = match (&params.graph_mix, cfg.r_mode) {
                    (GraphMix::Shared(a), MixMode::Shared) => {
                        a.dim() == (cfg.i_count, cfg.i_count)
                    }
                    (GraphMix::PerNode(a), MixMode::PerNode) => {
                        a.dim() == (cfg.i_count, cfg.i_count, cfg.n_nodes)
                    }
                    _ => false,
                };
                if !graph_ok {
                    return Err(Error::shape(format!(
                        "{stack}{}.graph_mix does not match r_mode {:?}",
                        l + 1,
                        cfg.r_mode
                    )));
                }
                let feature_ok = match (&params.feature_mix, cfg.w_mode) {
                    (FeatureMix::Shared(a), MixMode::Shared) => {
                        a.dim() == (p_in, cfg.i_count, p_out)
                    }
                    (FeatureMix::PerNode(a), MixMode::PerNode) => {
                        a.dim() == (p_in, cfg.n_nodes, cfg.i_count, p_out)
                    }
                    _ => false,
                };
                if !feature_ok {
                    return Err(Error::shape(format!(
                        "{stack}{}.feature_mix does not match w_mode {:?} ({p_in} -> {p_out})",
                        l + 1,
                        cfg.w_mode
                    )));
                }
            }
        }
        if self.output.weights.dim() != (cfg.output_rows(), cfg.n_classes)
            || self.output.bias.len() != cfg.n_classes
        {
            return Err(Error::shape(format!(
                "output head is {:?} + ({},), want ({}, {}) + ({},)",
                self.output.weights.dim(),
                self.output.bias.len(),
                cfg.output_rows(),
                cfg.n_classes,
                cfg.n_classes
            )));
        }
        Ok(())
    }
}

/// Deterministic parameter initialization.
///
/// Hop coefficients start uniform at `1 / k_hop`, graph mixing starts at
/// identity mixing plus uniform noise of magnitude 0.01, feature mixing and
/// the output weights use the usual `sqrt(6 / (fan_in + fan_out))` uniform
/// range, and biases start at zero.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ParameterSet> {
    cfg.validate()?;
    let mut rng = rng::seeded(seed);

    let mut init_layer = |p_in: usize, p_out: usize| -> LayerParams {
        let hop_coeffs = Array2::from_elem((cfg.k_hop, cfg.i_count), 1.0 / cfg.k_hop as f64);
        let graph_mix = match cfg.r_mode {
            MixMode::Shared => {
                let mut r = Array2::zeros((cfg.i_count, cfg.i_count));
                for ((i, j), v) in r.indexed_iter_mut() {
                    *v = rng.random_range(-0.01..0.01) + f64::from(i == j);
                }
                GraphMix::Shared(r)
            }
            MixMode::PerNode => {
                let mut r = Array3::zeros((cfg.i_count, cfg.i_count, cfg.n_nodes));
                for ((i, j, _), v) in r.indexed_iter_mut() {
                    *v = rng.random_range(-0.01..0.01) + f64::from(i == j);
                }
                GraphMix::PerNode(r)
            }
        };
        let limit = (6.0 / (p_in + p_out) as f64).sqrt();
        let feature_mix = match cfg.w_mode {
            MixMode::Shared => {
                let mut w = Array3::zeros((p_in, cfg.i_count, p_out));
                w.iter_mut().for_each(|v| *v = rng.random_range(-limit..limit));
                FeatureMix::Shared(w)
            }
            MixMode::PerNode => {
                let mut w = Array4::zeros((p_in, cfg.n_nodes, cfg.i_count, p_out));
                w.iter_mut().for_each(|v| *v = rng.random_range(-limit..limit));
                FeatureMix::PerNode(w)
            }
        };
        LayerParams {
            hop_coeffs,
            graph_mix,
            feature_mix,
        }
    };

    let z_layers: Vec<_> = (0..cfg.n_layers)
        .map(|l| init_layer(cfg.input_width(l), cfg.widths[l]))
        .collect();
    let x_layers: Vec<_> = if cfg.residual {
        (0..cfg.n_layers)
            .map(|l| init_layer(cfg.in_features, cfg.widths[l]))
            .collect()
    } else {
        Vec::new()
    };

    let rows = cfg.output_rows();
    let limit = (6.0 / (rows + cfg.n_classes) as f64).sqrt();
    let mut weights = Array2::zeros((rows, cfg.n_classes));
    weights
        .iter_mut()
        .for_each(|v| *v = rng.random_range(-limit..limit));
    let output = OutputParams {
        weights,
        bias: Array1::zeros(cfg.n_classes),
    };

    Ok(ParameterSet {
        z_layers,
        x_layers,
        output,
    })
}

/// Replicate `N x F` features into the `N x I x F` layer-input layout:
/// every graph slice sees the same feature vector per node.
pub fn replicate_features(x: &FeatureMatrix, i_count: usize) -> Array3<f64> {
    let mut out = Array3::zeros((x.n_nodes(), i_count, x.n_features()));
    for i in 0..i_count {
        out.slice_mut(s![.., i, ..]).assign(x.values());
    }
    out
}

/// Hop aggregation: for each graph slice `i`,
/// `out[n, i, :] = sum_k coeffs[k, i] * sum_{n'} A_i^k[n, n'] * z[n', i, :]`.
pub fn hop_aggregate(
    z: ArrayView3<f64>,
    powers: &AdjacencyPowerSet,
    coeffs: ArrayView2<f64>,
) -> Result<Array3<f64>> {
    let (n, i_count, p) = z.dim();
    if n != powers.n_nodes() || i_count != powers.n_graphs() {
        return Err(Error::shape(format!(
            "activations are {n} x {i_count} x {p}, powers cover {} graphs on {} nodes",
            powers.n_graphs(),
            powers.n_nodes()
        )));
    }
    if coeffs.dim() != (powers.k_hop(), i_count) {
        return Err(Error::shape(format!(
            "hop coefficients are {:?}, want ({}, {i_count})",
            coeffs.dim(),
            powers.k_hop()
        )));
    }
    let mut out = Array3::zeros((n, i_count, p));
    for i in 0..i_count {
        let z_slice = z.index_axis(Axis(1), i);
        let mut out_slice = out.index_axis_mut(Axis(1), i);
        for k in 1..=powers.k_hop() {
            let c = coeffs[[k - 1, i]];
            if c != 0.0 {
                powers
                    .hop(i, k)
                    .add_scaled_mul_dense(c, z_slice, &mut out_slice)?;
            }
        }
    }
    Ok(out)
}

/// Graph mixing: recombine the I graph slices,
/// `out[n, i, :] = sum_{i'} R[i, i' (, n)] * h[n, i', :]`.
pub fn mix_graphs(h: ArrayView3<f64>, mix: &GraphMix) -> Result<Array3<f64>> {
    let (n, i_count, p) = h.dim();
    let mut out = Array3::zeros((n, i_count, p));
    match mix {
        GraphMix::Shared(r) => {
            if r.dim() != (i_count, i_count) {
                return Err(Error::shape(format!(
                    "graph mix is {:?}, want ({i_count}, {i_count})",
                    r.dim()
                )));
            }
            for i in 0..i_count {
                let mut out_slice = out.index_axis_mut(Axis(1), i);
                for i2 in 0..i_count {
                    let w = r[[i, i2]];
                    if w != 0.0 {
                        out_slice.scaled_add(w, &h.index_axis(Axis(1), i2));
                    }
                }
            }
        }
        GraphMix::PerNode(r) => {
            if r.dim() != (i_count, i_count, n) {
                return Err(Error::shape(format!(
                    "graph mix is {:?}, want ({i_count}, {i_count}, {n})",
                    r.dim()
                )));
            }
            for node in 0..n {
                for i in 0..i_count {
                    let mut out_vec = out.slice_mut(s![node, i, ..]);
                    for i2 in 0..i_count {
                        let w = r[[i, i2, node]];
                        if w != 0.0 {
                            out_vec.scaled_add(w, &h.slice(s![node, i2, ..]));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Feature mixing: `out[n, i, p] = g[n, i, :] . W[: (, n), i, p]`.
pub fn mix_features(g: ArrayView3<f64>, w: &FeatureMix) -> Result<Array3<f64>> {
    let (n, i_count, p_in) = g.dim();
    match w {
        FeatureMix::Shared(w) => {
            let (wp_in, wi, p_out) = w.dim();
            if wp_in != p_in || wi != i_count {
                return Err(Error::shape(format!(
                    "feature mix is {:?}, want ({p_in}, {i_count}, _)",
                    w.dim()
                )));
            }
            let mut out = Array3::zeros((n, i_count, p_out));
            for i in 0..i_count {
                let product = g.index_axis(Axis(1), i).dot(&w.index_axis(Axis(1), i));
                out.index_axis_mut(Axis(1), i).assign(&product);
            }
            Ok(out)
        }
        FeatureMix::PerNode(w) => {
            let (wp_in, wn, wi, p_out) = w.dim();
            if wp_in != p_in || wn != n || wi != i_count {
                return Err(Error::shape(format!(
                    "feature mix is {:?}, want ({p_in}, {n}, {i_count}, _)",
                    w.dim()
                )));
            }
            let mut out = Array3::zeros((n, i_count, p_out));
            for node in 0..n {
                for i in 0..i_count {
                    let g_vec = g.slice(s![node, i, ..]);
                    let w_mat = w.slice(s![.., node, i, ..]);
                    out.slice_mut(s![node, i, ..]).assign(&g_vec.dot(&w_mat));
                }
            }
            Ok(out)
        }
    }
}

/// Per-layer intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    /// Hop-aggregated main-branch activations.
    pub h: Array3<f64>,
    /// Graph-mixed main-branch activations.
    pub g: Array3<f64>,
    /// Residual-branch counterparts (present iff the residual feed is on).
    pub h_res: Option<Array3<f64>>,
    pub g_res: Option<Array3<f64>>,
    /// Linear output of the layer, before the nonlinearity.
    pub pre: Array3<f64>,
    /// `max(0, pre)`.
    pub post: Array3<f64>,
}

/// Everything a forward pass produces, including what backprop needs.
#[derive(Debug, Clone)]
pub struct Activations {
    /// Input features replicated to `N x I x F`.
    pub x_replicated: Array3<f64>,
    pub layers: Vec<LayerCache>,
    pub logits: Array2<f64>,
    /// Row-stochastic class probabilities.
    pub y_hat: Array2<f64>,
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn layer_pass(
    input: ArrayView3<f64>,
    x_replicated: ArrayView3<f64>,
    layer_index: usize,
    params: &ParameterSet,
    powers: &AdjacencyPowerSet,
    cfg: &ModelConfig,
) -> Result<LayerCache> {
    let main = &params.z_layers[layer_index];
    let h = hop_aggregate(input, powers, main.hop_coeffs.view())?;
    let g = mix_graphs(h.view(), &main.graph_mix)?;
    let mut pre = mix_features(g.view(), &main.feature_mix)?;

    let (h_res, g_res) = if cfg.residual {
        let res = &params.x_layers[layer_index];
        let h_res = hop_aggregate(x_replicated, powers, res.hop_coeffs.view())?;
        let g_res = mix_graphs(h_res.view(), &res.graph_mix)?;
        pre += &mix_features(g_res.view(), &res.feature_mix)?;
        (Some(h_res), Some(g_res))
    } else {
        (None, None)
    };

    let post = pre.mapv(relu);
    Ok(LayerCache {
        h,
        g,
        h_res,
        g_res,
        pre,
        post,
    })
}

/// One layer: the three mixing stages on `z_prev`, plus the residual feed
/// of the replicated input when enabled, then an elementwise ReLU.
/// `layer_index` is 0-based.
pub fn layer_forward(
    z_prev: ArrayView3<f64>,
    x_replicated: ArrayView3<f64>,
    layer_index: usize,
    params: &ParameterSet,
    powers: &AdjacencyPowerSet,
    cfg: &ModelConfig,
) -> Result<Array3<f64>> {
    Ok(layer_pass(z_prev, x_replicated, layer_index, params, powers, cfg)?.post)
}

/// Row softmax with max subtraction.
pub fn softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Output head: logits from the final activation tensor, then a row
/// softmax. In `Flatten` mode node `n`'s feature vector is `z[n, :, :]`
/// flattened row-major (graph slice major, feature minor).
pub fn output_forward(
    z_last: ArrayView3<f64>,
    out: &OutputParams,
    mode: OutputMode,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let (n, i_count, p) = z_last.dim();
    let k = out.bias.len();
    let rows = match mode {
        OutputMode::Flatten => i_count * p,
        OutputMode::MeanPool => p,
    };
    if out.weights.dim() != (rows, k) {
        return Err(Error::shape(format!(
            "output weights are {:?}, want ({rows}, {k})",
            out.weights.dim()
        )));
    }
    let logits = match mode {
        OutputMode::Flatten => {
            let flat = z_last
                .to_shape((n, i_count * p))
                .map_err(|e| Error::shape(e.to_string()))?;
            flat.dot(&out.weights) + &out.bias
        }
        OutputMode::MeanPool => {
            let mean = z_last.mean_axis(Axis(1)).expect("i_count > 0");
            mean.dot(&out.weights) + &out.bias
        }
    };
    let y_hat = softmax_rows(logits.view());
    Ok((logits, y_hat))
}

/// Full forward pass; caches every intermediate the backward pass needs.
pub fn model_forward(
    x: &FeatureMatrix,
    powers: &AdjacencyPowerSet,
    params: &ParameterSet,
    cfg: &ModelConfig,
) -> Result<Activations> {
    cfg.validate()?;
    params.check_shapes(cfg)?;
    if x.n_nodes() != cfg.n_nodes || x.n_features() != cfg.in_features {
        return Err(Error::shape(format!(
            "features are {} x {}, config says {} x {}",
            x.n_nodes(),
            x.n_features(),
            cfg.n_nodes,
            cfg.in_features
        )));
    }
    if powers.n_nodes() != cfg.n_nodes
        || powers.n_graphs() != cfg.i_count
        || powers.k_hop() < cfg.k_hop
    {
        return Err(Error::shape(format!(
            "powers cover {} graphs on {} nodes up to {} hops; config wants {} / {} / {}",
            powers.n_graphs(),
            powers.n_nodes(),
            powers.k_hop(),
            cfg.i_count,
            cfg.n_nodes,
            cfg.k_hop
        )));
    }

    let x_replicated = replicate_features(x, cfg.i_count);
    let mut layers: Vec<LayerCache> = Vec::with_capacity(cfg.n_layers);
    for l in 0..cfg.n_layers {
        let input = if l == 0 {
            x_replicated.view()
        } else {
            layers[l - 1].post.view()
        };
        let cache = layer_pass(input, x_replicated.view(), l, params, powers, cfg)?;
        layers.push(cache);
    }
    let (logits, y_hat) = output_forward(
        layers.last().expect("at least one layer").post.view(),
        &params.output,
        cfg.output_mode,
    )?;
    Ok(Activations {
        x_replicated,
        layers,
        logits,
        y_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn small_cfg(r_mode: MixMode, w_mode: MixMode, residual: bool) -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            widths: vec![3, 2],
            k_hop: 2,
            i_count: 2,
            n_nodes: 4,
            in_features: 3,
            n_classes: 2,
            r_mode,
            w_mode,
            residual,
            output_mode: OutputMode::Flatten,
        }
    }

    fn small_powers(cfg: &ModelConfig) -> AdjacencyPowerSet {
        let g1 = Graph::new(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let g2 = Graph::new(4, [(0, 2), (1, 3)]).unwrap();
        AdjacencyPowerSet::from_graphs(&[g1, g2], cfg.k_hop).unwrap()
    }

    #[test]
    fn init_hop_coeffs_uniform() {
        let cfg = small_cfg(MixMode::Shared, MixMode::Shared, true);
        let params = init_params(&cfg, 3).unwrap();
        for layer in params.z_layers.iter().chain(params.x_layers.iter()) {
            assert!(layer.hop_coeffs.iter().all(|&c| c == 0.5));
        }
    }

    #[test]
    fn init_graph_mix_near_identity() {
        let mut cfg = small_cfg(MixMode::Shared, MixMode::Shared, false);
        cfg.i_count = 3;
        let params = init_params(&cfg, 3).unwrap();
        let GraphMix::Shared(r) = &params.z_layers[0].graph_mix else {
            panic!("expected shared mixing")
        };
        for ((i, j), &v) in r.indexed_iter() {
            if i == j {
                assert!((v - 1.0).abs() <= 0.01);
            } else {
                assert!(v.abs() <= 0.01);
            }
        }
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = small_cfg(MixMode::PerNode, MixMode::PerNode, true);
        let a = init_params(&cfg, 11).unwrap();
        let b = init_params(&cfg, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hop_aggregate_one_hop_path() {
        // Path 0-1-2, one hop, unit coefficient: node 1 collects nodes 0
        // and 2.
        let g = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        let powers = AdjacencyPowerSet::from_graphs(&[g], 1).unwrap();
        let mut z = Array3::zeros((3, 1, 3));
        for n in 0..3 {
            z[[n, 0, n]] = 1.0;
        }
        let coeffs = array![[1.0]];
        let h = hop_aggregate(z.view(), &powers, coeffs.view()).unwrap();
        assert_eq!(h.slice(s![1, 0, ..]).to_vec(), vec![1.0, 0.0, 1.0]);
        assert_eq!(h.slice(s![0, 0, ..]).to_vec(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn hop_aggregate_edgeless_is_zero() {
        let powers = AdjacencyPowerSet::from_graphs(&[Graph::empty(3)], 2).unwrap();
        let z = Array3::from_elem((3, 1, 2), 1.5);
        let coeffs = array![[1.0], [0.5]];
        let h = hop_aggregate(z.view(), &powers, coeffs.view()).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hop_aggregate_zero_coefficients() {
        let g = Graph::complete(3);
        let powers = AdjacencyPowerSet::from_graphs(&[g], 2).unwrap();
        let z = Array3::from_elem((3, 1, 2), 1.0);
        let coeffs = Array2::zeros((2, 1));
        let h = hop_aggregate(z.view(), &powers, coeffs.view()).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mix_graphs_identity() {
        let h = Array3::from_shape_fn((2, 2, 2), |(n, i, p)| (n + 2 * i + 4 * p) as f64);
        let g = mix_graphs(h.view(), &GraphMix::Shared(Array2::eye(2))).unwrap();
        assert_eq!(g, h);
    }

    #[test]
    fn mix_graphs_swap() {
        let h = Array3::from_shape_fn((2, 2, 2), |(n, i, p)| (n + 2 * i + 4 * p) as f64);
        let swap = GraphMix::Shared(array![[0.0, 1.0], [1.0, 0.0]]);
        let g = mix_graphs(h.view(), &swap).unwrap();
        assert_eq!(g.index_axis(Axis(1), 0), h.index_axis(Axis(1), 1));
        assert_eq!(g.index_axis(Axis(1), 1), h.index_axis(Axis(1), 0));
    }

    #[test]
    fn mix_graphs_average() {
        let h = Array3::from_shape_fn((1, 2, 2), |(_, i, p)| (2 * i + p) as f64);
        let avg = GraphMix::Shared(array![[0.5, 0.5], [0.5, 0.5]]);
        let g = mix_graphs(h.view(), &avg).unwrap();
        let mean = (h.index_axis(Axis(1), 0).to_owned() + h.index_axis(Axis(1), 1)) / 2.0;
        assert_eq!(g.index_axis(Axis(1), 0), mean);
        assert_eq!(g.index_axis(Axis(1), 1), mean);
    }

    #[test]
    fn mix_features_identity_passthrough() {
        let g = Array3::from_shape_fn((2, 1, 3), |(n, _, p)| (n * 3 + p) as f64);
        let mut w = Array3::zeros((3, 1, 3));
        for p in 0..3 {
            w[[p, 0, p]] = 1.0;
        }
        let z = mix_features(g.view(), &FeatureMix::Shared(w)).unwrap();
        assert_eq!(z, g);
    }

    #[test]
    fn mix_features_zero_weights() {
        let g = Array3::from_elem((2, 2, 3), 1.0);
        let w = FeatureMix::Shared(Array3::zeros((3, 2, 4)));
        let z = mix_features(g.view(), &w).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mix_features_hand_inner_product() {
        let mut g = Array3::zeros((1, 1, 2));
        g[[0, 0, 0]] = 3.0;
        g[[0, 0, 1]] = 2.0;
        let mut w = Array3::zeros((2, 1, 1));
        w[[0, 0, 0]] = 1.0;
        w[[1, 0, 0]] = -1.0;
        let z = mix_features(g.view(), &FeatureMix::Shared(w)).unwrap();
        assert_eq!(z[[0, 0, 0]], 1.0);
    }

    #[test]
    fn layer_forward_zero_params_is_zero() {
        let cfg = small_cfg(MixMode::Shared, MixMode::Shared, false);
        let powers = small_powers(&cfg);
        let params = init_params(&cfg, 5).unwrap().zeros_like();
        let x = FeatureMatrix::new(Array2::from_elem((4, 3), 1.0)).unwrap();
        let xrep = replicate_features(&x, cfg.i_count);
        let out = layer_forward(xrep.view(), xrep.view(), 0, &params, &powers, &cfg).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn layer_forward_residual_passthrough_aggregates_input() {
        // Main branch zeroed, residual branch wired as identity at every
        // stage: the layer reduces to one-hop aggregation of the input.
        let cfg = ModelConfig {
            n_layers: 1,
            widths: vec![2],
            k_hop: 1,
            i_count: 1,
            n_nodes: 3,
            in_features: 2,
            n_classes: 2,
            r_mode: MixMode::Shared,
            w_mode: MixMode::Shared,
            residual: true,
            output_mode: OutputMode::Flatten,
        };
        let g = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        let powers = AdjacencyPowerSet::from_graphs(&[g], 1).unwrap();
        let mut params = init_params(&cfg, 5).unwrap().zeros_like();
        params.x_layers[0].hop_coeffs.fill(1.0);
        params.x_layers[0].graph_mix = GraphMix::Shared(Array2::eye(1));
        let mut w = Array3::zeros((2, 1, 2));
        w[[0, 0, 0]] = 1.0;
        w[[1, 0, 1]] = 1.0;
        params.x_layers[0].feature_mix = FeatureMix::Shared(w);

        let x = FeatureMatrix::new(array![[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]]).unwrap();
        let xrep = replicate_features(&x, 1);
        let out = layer_forward(xrep.view(), xrep.view(), 0, &params, &powers, &cfg).unwrap();
        // Node 1 aggregates nodes 0 and 2.
        assert_eq!(out.slice(s![1, 0, ..]).to_vec(), vec![3.0, 2.0]);
        // Node 0 aggregates node 1 only.
        assert_eq!(out.slice(s![0, 0, ..]).to_vec(), vec![0.0, 1.0]);
    }

    #[test]
    fn relu_clamps_negatives() {
        assert_eq!(relu(-2.5), 0.0);
        assert_eq!(relu(1.5), 1.5);
        assert_eq!(relu(0.0), 0.0);
    }

    #[test]
    fn output_symmetric_logits() {
        let z = Array3::zeros((1, 1, 2));
        let out = OutputParams {
            weights: Array2::zeros((2, 2)),
            bias: Array1::zeros(2),
        };
        let (_, y) = output_forward(z.view(), &out, OutputMode::Flatten).unwrap();
        assert_eq!(y.row(0).to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn output_softmax_is_stable() {
        let logits = array![[1000.0, 0.0]];
        let y = softmax_rows(logits.view());
        assert!(y.iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(y[[0, 0]], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn output_softmax_hand_case() {
        let logits = array![[1.0f64.ln(), 3.0f64.ln()]];
        let y = softmax_rows(logits.view());
        assert_abs_diff_eq!(y[[0, 0]], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(y[[0, 1]], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn forward_zero_params_gives_uniform_rows() {
        let cfg = small_cfg(MixMode::Shared, MixMode::Shared, false);
        let powers = small_powers(&cfg);
        let params = init_params(&cfg, 5).unwrap().zeros_like();
        let x = FeatureMatrix::identity(4);
        let x = FeatureMatrix::new(x.values().slice(s![.., ..3]).to_owned()).unwrap();
        let acts = model_forward(&x, &powers, &params, &cfg).unwrap();
        for row in acts.y_hat.rows() {
            assert_abs_diff_eq!(row[0], 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(row[1], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let cfg = small_cfg(MixMode::PerNode, MixMode::PerNode, true);
        let powers = small_powers(&cfg);
        let params = init_params(&cfg, 17).unwrap();
        let x = FeatureMatrix::new(Array2::from_shape_fn((4, 3), |(n, f)| {
            ((n * 7 + f * 3) % 5) as f64 - 2.0
        }))
        .unwrap();
        let a = model_forward(&x, &powers, &params, &cfg).unwrap();
        let b = model_forward(&x, &powers, &params, &cfg).unwrap();
        assert_eq!(a.y_hat, b.y_hat);
        assert_eq!(a.logits, b.logits);
    }

    #[test]
    fn forward_rows_are_stochastic() {
        let cfg = small_cfg(MixMode::Shared, MixMode::PerNode, true);
        let powers = small_powers(&cfg);
        let params = init_params(&cfg, 23).unwrap();
        let x = FeatureMatrix::new(Array2::from_shape_fn((4, 3), |(n, f)| {
            (n as f64 - 1.5) * (f as f64 + 0.5)
        }))
        .unwrap();
        let acts = model_forward(&x, &powers, &params, &cfg).unwrap();
        for row in acts.y_hat.rows() {
            assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-6);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let cfg = small_cfg(MixMode::Shared, MixMode::Shared, false);
        let powers = small_powers(&cfg);
        let params = init_params(&cfg, 5).unwrap();
        let x = FeatureMatrix::identity(4); // 4 features, config wants 3
        assert!(matches!(
            model_forward(&x, &powers, &params, &cfg),
            Err(Error::Shape(_))
        ));
    }
}
