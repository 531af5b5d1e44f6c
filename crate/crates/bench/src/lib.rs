//! Shared fixtures for the benchmarks.

use edagcn_core::model::{MixMode, ModelConfig, OutputMode};
use edagcn_core::{FeatureMatrix, Graph, LabelData};
use rand::Rng;

/// Seeded sparse random graph with the given edge probability.
pub fn random_graph(n_nodes: usize, edge_prob: f64, seed: u64) -> Graph {
    let mut rng = edagcn_core::rng::seeded(seed);
    let edges = (0..n_nodes)
        .flat_map(|u| ((u + 1)..n_nodes).map(move |v| (u, v)))
        .filter(|_| rng.random_bool(edge_prob))
        .collect::<Vec<_>>();
    Graph::new(n_nodes, edges).expect("valid random graph")
}

/// Two-class labels with simple index-based splits, as used by the
/// training benchmarks.
pub fn block_labels(n_nodes: usize) -> LabelData {
    let half = n_nodes / 2;
    LabelData::new(
        (0..n_nodes).map(|v| Some(usize::from(v >= half))).collect(),
        (0..n_nodes).step_by(10).collect(),
        (1..n_nodes).step_by(10).collect(),
        (2..n_nodes).step_by(10).collect(),
    )
    .expect("valid labels")
}

/// Model configuration sized like the synthetic robustness experiments.
pub fn bench_model_config(n_nodes: usize, i_count: usize, x: &FeatureMatrix) -> ModelConfig {
    ModelConfig {
        n_layers: 3,
        widths: vec![64, 8, 2],
        k_hop: 1,
        i_count,
        n_nodes,
        in_features: x.n_features(),
        n_classes: 2,
        r_mode: MixMode::Shared,
        w_mode: MixMode::Shared,
        residual: true,
        output_mode: OutputMode::Flatten,
    }
}
