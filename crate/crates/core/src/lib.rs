//! Edge-dithered auxiliary graphs and the adaptive GCN that learns over
//! them: graph handling, the dithering sampler with its recovery-probability
//! closed forms, the multi-graph convolutional model with hand-written
//! reverse-mode gradients, the regularized training loop, and the
//! perturbation harnesses used in robustness experiments.

pub mod checkpoint;
pub mod data;
pub mod dither;
pub mod error;
pub mod grad;
pub mod graph;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod perturb;
pub mod rng;
pub mod sparse;
pub mod train;

pub use data::{FeatureMatrix, LabelData, Split};
pub use dither::{
    count_edge_events, dither, edge_restore_probability, monte_carlo_recovery,
    neighborhood_recovery_probability, per_pair_union_probability, DitherConfig,
    DitheredGraphSet, EdgeEventCounts, MonteCarloEstimate, PairCase, RecoverySemantics,
    RestoreCase,
};
pub use error::{Error, Result};
pub use grad::{grad_check, gradients, GradCheckOptions, GradCheckReport};
pub use graph::{Graph, PerturbationDelta};
pub use loss::{
    cross_entropy, loss, smoothness_reg, sparsity_reg, weight_decay_reg, LossBreakdown,
    SmoothnessVariant,
};
pub use metrics::{accuracy, macro_f1, predictions};
pub use model::{
    hop_aggregate, init_params, layer_forward, mix_features, mix_graphs, model_forward,
    output_forward, replicate_features, softmax_rows, Activations, FeatureMix, GraphMix,
    LayerParams, MixMode, ModelConfig, OutputMode, OutputParams, ParameterSet,
};
pub use optim::OptimizerState;
pub use perturb::{
    gaussian_noise_adjacency, gaussian_noise_features, knn_graph, load_attacked_graph,
    random_edge_insertion, simple_targeted_attack, AttackManifest, AttackedGraph, NoiseConfig,
    NoiseTarget, WeightedGraph,
};
pub use sparse::{AdjacencyPowerSet, SparseMatrix};
pub use train::{evaluate, train, EpochRecord, EsMetric, EvalReport, TrainConfig, TrainResult};
