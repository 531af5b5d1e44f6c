//! Shared dataset preparation: load files, apply the configured
//! perturbations, assemble the graph set, and derive the model
//! configuration.

use edagcn_core::dither::dither;
use edagcn_core::model::ModelConfig;
use edagcn_core::perturb::{
    gaussian_noise_adjacency, gaussian_noise_features, load_attacked_graph, NoiseTarget,
    WeightedGraph,
};
use edagcn_core::sparse::{AdjacencyPowerSet, SparseMatrix};
use edagcn_core::{FeatureMatrix, Graph, LabelData};

use crate::config::ExperimentConfig;
use crate::CliError;

pub struct Prepared {
    pub powers: AdjacencyPowerSet,
    pub x: FeatureMatrix,
    pub labels: LabelData,
    pub model_cfg: ModelConfig,
}

/// Load the observed graph: the attacked topology when a manifest is
/// configured, the plain edge list otherwise.
pub fn load_observed_graph(cfg: &ExperimentConfig) -> Result<Graph, CliError> {
    let original = Graph::from_edge_list_file(&cfg.data.edges, cfg.data.n_nodes)?;
    match &cfg.data.attack_manifest {
        None => Ok(original),
        Some(manifest) => {
            let attacked = load_attacked_graph(manifest, &original)?;
            for warning in &attacked.warnings {
                eprintln!("warning: {warning}");
            }
            Ok(attacked.graph)
        }
    }
}

/// Assemble everything a training or evaluation run needs.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, CliError> {
    let observed = load_observed_graph(cfg)?;
    let n_nodes = cfg.data.n_nodes;

    let mut x = match &cfg.data.features {
        Some(path) => FeatureMatrix::from_csv_file(path)?,
        None => FeatureMatrix::identity(n_nodes),
    };
    if x.n_nodes() != n_nodes {
        return Err(CliError::usage(format!(
            "features cover {} nodes, config says {n_nodes}",
            x.n_nodes()
        )));
    }
    let labels =
        LabelData::from_files(&cfg.data.labels, &cfg.data.splits)?.expand_to(n_nodes)?;

    let feature_noise = cfg
        .noise
        .filter(|n| matches!(n.target, NoiseTarget::Features));
    let adjacency_noise = cfg
        .noise
        .filter(|n| matches!(n.target, NoiseTarget::Adjacency));
    if let Some(noise) = feature_noise {
        x = gaussian_noise_features(&x, noise.snr, noise.seed)?;
    }

    // Base relations: the observed graph plus any extra relation files.
    let mut relations = vec![observed.clone()];
    for (index, path) in cfg.data.extra_edges.iter().enumerate() {
        let extra = Graph::from_edge_list_file(path, n_nodes).map_err(|e| {
            CliError::usage(format!("extra relation {index}: {e}"))
        })?;
        relations.push(extra);
    }
    let multi_relational = relations.len() > 1;

    let powers = if let Some(noise) = adjacency_noise {
        // Additive noise produces weighted graphs; dithering does not
        // apply to those, so the relations feed the model directly.
        let matrices = relations
            .iter()
            .enumerate()
            .map(|(index, graph)| {
                let weighted = gaussian_noise_adjacency(
                    &WeightedGraph::from_graph(graph),
                    noise.snr,
                    edagcn_core::rng::derive_seed(noise.seed, index as u64),
                )?;
                let sparse = weighted.to_sparse();
                Ok(if cfg.model.normalize_adjacency {
                    sparse.sym_normalized()
                } else {
                    sparse
                })
            })
            .collect::<Result<Vec<SparseMatrix>, edagcn_core::Error>>()?;
        AdjacencyPowerSet::from_matrices(matrices, cfg.model.k_hop)?
    } else {
        let graphs: Vec<Graph> = if multi_relational || !cfg.dither.enabled {
            relations
        } else {
            dither(&observed, &cfg.dither.to_core())?.graphs().to_vec()
        };
        if cfg.model.normalize_adjacency {
            AdjacencyPowerSet::from_graphs_normalized(&graphs, cfg.model.k_hop)?
        } else {
            AdjacencyPowerSet::from_graphs(&graphs, cfg.model.k_hop)?
        }
    };

    let mut widths = cfg.model.hidden_widths.clone();
    widths.push(labels.n_classes());
    let model_cfg = ModelConfig {
        n_layers: widths.len(),
        widths,
        k_hop: cfg.model.k_hop,
        i_count: powers.n_graphs(),
        n_nodes,
        in_features: x.n_features(),
        n_classes: labels.n_classes(),
        r_mode: cfg.model.r_mode,
        w_mode: cfg.model.w_mode,
        residual: cfg.model.residual,
        output_mode: cfg.model.output_mode,
    };
    Ok(Prepared {
        powers,
        x,
        labels,
        model_cfg,
    })
}
