//! Perturbation regimes for robustness experiments: random edge
//! insertion, additive Gaussian noise at a target SNR, k-nearest-neighbor
//! graph construction, and ingestion of externally generated targeted
//! attacks (plus a small built-in targeted attack for desk-scale tests).

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, LabelData};
use crate::dither::sample_non_edges;
use crate::error::{Error, Result};
use crate::graph::{Graph, PerturbationDelta};
use crate::rng;
use crate::sparse::SparseMatrix;

/// What additive Gaussian noise is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseTarget {
    Features,
    Adjacency,
}

/// Noise specification. `snr` is the linear ratio of mean-square signal
/// to noise variance (not decibels).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub snr: f64,
    pub seed: u64,
    pub target: NoiseTarget,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.snr > 0.0) {
            return Err(Error::validation(format!(
                "snr = {} must be positive",
                self.snr
            )));
        }
        Ok(())
    }
}

/// Symmetric real-weighted graph with zero diagonal; what a binary graph
/// becomes once additive noise touches its adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    weights: Array2<f64>,
}

impl WeightedGraph {
    pub fn new(weights: Array2<f64>) -> Result<Self> {
        let (rows, cols) = weights.dim();
        if rows != cols {
            return Err(Error::shape(format!("weights are {rows}x{cols}, not square")));
        }
        for r in 0..rows {
            if weights[[r, r]] != 0.0 {
                return Err(Error::validation(format!("nonzero diagonal at {r}")));
            }
            for c in 0..r {
                if weights[[r, c]] != weights[[c, r]] {
                    return Err(Error::validation(format!(
                        "asymmetric weights at ({r}, {c})"
                    )));
                }
            }
        }
        Ok(WeightedGraph { weights })
    }

    pub fn from_graph(g: &Graph) -> Self {
        let mut weights = Array2::zeros((g.n_nodes(), g.n_nodes()));
        for &(u, v) in g.edges() {
            weights[[u, v]] = 1.0;
            weights[[v, u]] = 1.0;
        }
        WeightedGraph { weights }
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_dense_symmetric(self.weights.view())
            .expect("validated symmetric zero-diagonal")
    }
}

/// Insert `count` distinct uniformly chosen non-edges into `g`.
pub fn random_edge_insertion(g: &Graph, count: usize, seed: u64) -> Result<Graph> {
    let mut rng = rng::seeded(seed);
    let inserted = sample_non_edges(g, count, &mut rng)?;
    let edges = g.edges().iter().copied().chain(inserted);
    Graph::new(g.n_nodes(), edges)
}

fn noise_sigma(mean_square_signal: f64, snr: f64) -> f64 {
    (mean_square_signal / snr).sqrt()
}

/// Add white Gaussian noise to every feature entry, with variance set by
/// the mean-square signal over all entries divided by `snr`.
pub fn gaussian_noise_features(x: &FeatureMatrix, snr: f64, seed: u64) -> Result<FeatureMatrix> {
    if !(snr > 0.0) {
        return Err(Error::validation(format!("snr = {snr} must be positive")));
    }
    let values = x.values();
    let mean_square = values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64;
    let sigma = noise_sigma(mean_square, snr);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::numeric(e.to_string()))?;
    let mut rng = rng::seeded(seed);
    let mut noisy = values.clone();
    noisy.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    FeatureMatrix::new(noisy)
}

/// Add white Gaussian noise to the off-diagonal adjacency weights. Noise
/// is drawn once per unordered pair and mirrored, so the output stays
/// exactly symmetric; the variance comes from the mean-square signal over
/// all off-diagonal entries divided by `snr`.
pub fn gaussian_noise_adjacency(
    graph: &WeightedGraph,
    snr: f64,
    seed: u64,
) -> Result<WeightedGraph> {
    if !(snr > 0.0) {
        return Err(Error::validation(format!("snr = {snr} must be positive")));
    }
    let n = graph.n_nodes();
    if n < 2 {
        return Ok(graph.clone());
    }
    let weights = graph.weights();
    let off_diagonal = (n * n - n) as f64;
    let mean_square = weights.iter().map(|v| v * v).sum::<f64>() / off_diagonal;
    let sigma = noise_sigma(mean_square, snr);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::numeric(e.to_string()))?;
    let mut rng = rng::seeded(seed);
    let mut noisy = weights.clone();
    for u in 0..n {
        for v in (u + 1)..n {
            let noise = normal.sample(&mut rng);
            noisy[[u, v]] += noise;
            noisy[[v, u]] = noisy[[u, v]];
        }
    }
    WeightedGraph::new(noisy)
}

/// k-nearest-neighbor graph by squared Euclidean feature distance.
/// Each node selects its k nearest others (ties broken toward the lower
/// node index, never itself); the directed selections are symmetrized by
/// union.
pub fn knn_graph(x: &FeatureMatrix, k: usize) -> Result<Graph> {
    let n = x.n_nodes();
    if k == 0 || k >= n {
        return Err(Error::validation(format!(
            "k = {k} out of range for {n} nodes"
        )));
    }
    let values = x.values();
    let mut edges = Vec::with_capacity(n * k);
    for node in 0..n {
        let row = values.row(node);
        let mut candidates: Vec<(f64, usize)> = (0..n)
            .filter(|&other| other != node)
            .map(|other| {
                let diff = &row - &values.row(other);
                (diff.dot(&diff), other)
            })
            .collect();
        candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        edges.extend(candidates[..k].iter().map(|&(_, other)| (node, other)));
    }
    Graph::new(n, edges)
}

/// Manifest accompanying an externally generated attacked graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackManifest {
    pub targets: Vec<usize>,
    /// Content hash of the clean graph the attack was generated against.
    pub original_hash: String,
    #[serde(default)]
    pub notes: String,
    /// Edge-list file of the attacked graph, relative to the manifest.
    pub edges: String,
}

/// An ingested attacked graph: the perturbed topology, its delta against
/// the clean graph, the targeted nodes, and any soft inconsistencies.
#[derive(Debug, Clone)]
pub struct AttackedGraph {
    pub graph: Graph,
    pub delta: PerturbationDelta,
    pub targets: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Load an attacked graph described by a JSON manifest. Hard
/// inconsistencies (hash mismatch, out-of-range targets) are errors; a
/// target with no adjacent change is accepted with a warning.
pub fn load_attacked_graph(
    manifest_path: impl AsRef<Path>,
    original: &Graph,
) -> Result<AttackedGraph> {
    let manifest_path = manifest_path.as_ref();
    let text = std::fs::read_to_string(manifest_path)?;
    let manifest: AttackManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: manifest_path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;

    if manifest.original_hash != original.content_hash() {
        return Err(Error::validation(format!(
            "manifest was generated against a different graph (hash {} vs {})",
            manifest.original_hash,
            original.content_hash()
        )));
    }
    let edges_path = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&manifest.edges);
    let graph = Graph::from_edge_list_file(&edges_path, original.n_nodes())?;
    let delta = PerturbationDelta::between(original, &graph)?;

    let mut targets = manifest.targets.clone();
    targets.sort_unstable();
    targets.dedup();
    let mut warnings = Vec::new();
    for &t in &targets {
        if t >= original.n_nodes() {
            return Err(Error::Bounds {
                index: t,
                n_nodes: original.n_nodes(),
            });
        }
        let touched = delta
            .insertions()
            .iter()
            .chain(delta.deletions())
            .any(|&(u, v)| u == t || v == t);
        if !touched {
            warnings.push(format!("target {t} has no adjacent edge change"));
        }
    }
    Ok(AttackedGraph {
        graph,
        delta,
        targets,
        warnings,
    })
}

/// Minimal targeted attack: connect each target to `budget` uniformly
/// chosen nodes of a different class (uniform over all non-neighbors when
/// the target's label is unknown or no labels are given). When fewer
/// candidates exist, all of them are used.
pub fn simple_targeted_attack(
    g: &Graph,
    targets: &[usize],
    budget: usize,
    labels: Option<&LabelData>,
    seed: u64,
) -> Result<Graph> {
    if budget == 0 {
        return Ok(g.clone());
    }
    let n = g.n_nodes();
    let mut sorted_targets = targets.to_vec();
    sorted_targets.sort_unstable();
    sorted_targets.dedup();
    let mut rng = rng::seeded(seed);
    let mut current = g.clone();
    for &target in &sorted_targets {
        if target >= n {
            return Err(Error::Bounds {
                index: target,
                n_nodes: n,
            });
        }
        let target_label = labels.and_then(|l| l.label_of(target));
        let mut candidates: Vec<usize> = (0..n)
            .filter(|&v| v != target && !current.has_edge(target, v))
            .filter(|&v| match (labels, target_label) {
                (Some(labels), Some(own)) => {
                    labels.label_of(v).is_some_and(|other| other != own)
                }
                _ => true,
            })
            .collect();
        let take = budget.min(candidates.len());
        for i in 0..take {
            let j = rng.random_range(i..candidates.len());
            candidates.swap(i, j);
        }
        let new_edges = candidates[..take].iter().map(|&v| (target, v));
        let edges = current.edges().iter().copied().chain(new_edges);
        current = Graph::new(n, edges)?;
    }
    Ok(current)
}
