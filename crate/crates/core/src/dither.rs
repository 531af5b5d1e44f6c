//! Edge dithering: probabilistic generation of auxiliary graphs.
//!
//! Given an observed (possibly perturbed) graph, each auxiliary graph is an
//! independent redraw of every node pair: an existing edge survives with
//! probability `q1`, and an absent edge is created with probability
//! `1 - q2`. Drawing `i_count` such graphs makes it likely that, for every
//! pair, at least one draw agrees with the clean graph — the closed forms
//! in this module quantify exactly how likely, and the Monte-Carlo
//! estimators validate them.
//!
//! Sampling draws the number of inserted non-edges from a binomial and then
//! places them uniformly, so cost stays near-linear in the edge count when
//! `1 - q2` is small, rather than quadratic in the node count.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;

/// Dithering knobs: `q1` is the probability an observed edge is kept,
/// `q2` the probability an observed non-edge stays absent, `i_count` the
/// number of auxiliary graphs to draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DitherConfig {
    pub q1: f64,
    pub q2: f64,
    pub i_count: usize,
    pub seed: u64,
}

impl DitherConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("q1", self.q1), ("q2", self.q2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::validation(format!(
                    "{name} = {p} outside [0, 1]"
                )));
            }
        }
        if self.i_count == 0 {
            return Err(Error::validation("i_count must be at least 1"));
        }
        Ok(())
    }
}

/// The auxiliary graphs drawn from one source graph, plus the
/// configuration that produced them.
#[derive(Debug, Clone)]
pub struct DitheredGraphSet {
    graphs: Vec<Graph>,
    config: DitherConfig,
    source: Graph,
}

impl DitheredGraphSet {
    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn config(&self) -> &DitherConfig {
        &self.config
    }

    pub fn source(&self) -> &Graph {
        &self.source
    }
}

/// Draw `cfg.i_count` auxiliary graphs from `source`.
///
/// Graph `i` is sampled from RNG stream `(cfg.seed, i)`, so the result is
/// identical no matter how many threads run the draws or in what order.
pub fn dither(source: &Graph, cfg: &DitherConfig) -> Result<DitheredGraphSet> {
    cfg.validate()?;
    let graphs = (0..cfg.i_count)
        .into_par_iter()
        .map(|i| sample_one(source, cfg, i as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(DitheredGraphSet {
        graphs,
        config: *cfg,
        source: source.clone(),
    })
}

/// One dithered redraw of `source` on stream `(cfg.seed, index)`.
fn sample_one(source: &Graph, cfg: &DitherConfig, index: u64) -> Result<Graph> {
    let mut rng = rng::stream(cfg.seed, index);
    let n = source.n_nodes();

    // Kept edges: one Bernoulli(q1) per edge, in canonical edge order.
    let mut edges: Vec<(usize, usize)> = source
        .edges()
        .iter()
        .copied()
        .filter(|_| rng.random_bool(cfg.q1))
        .collect();

    // Inserted non-edges: binomial count, then uniform distinct placement.
    let non_edges = source.non_edge_count() as u64;
    let insert_prob = 1.0 - cfg.q2;
    if non_edges > 0 && insert_prob > 0.0 {
        let count = Binomial::new(non_edges, insert_prob)
            .expect("validated probability")
            .sample(&mut rng) as usize;
        edges.extend(sample_non_edges(source, count, &mut rng)?);
    }
    Graph::new(n, edges)
}

/// Uniformly sample `count` distinct non-edges of `g`.
///
/// Rejection sampling when the request is a small fraction of the non-edge
/// universe, otherwise a partial shuffle of the enumerated non-edges; the
/// distribution is uniform without replacement either way.
pub(crate) fn sample_non_edges(
    g: &Graph,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(usize, usize)>> {
    let available = g.non_edge_count();
    if count > available {
        return Err(Error::validation(format!(
            "requested {count} non-edges but only {available} exist"
        )));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let n = g.n_nodes();
    if count * 3 < available {
        let mut chosen = std::collections::BTreeSet::new();
        while chosen.len() < count {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u == v {
                continue;
            }
            let pair = (u.min(v), u.max(v));
            if g.has_edge(pair.0, pair.1) {
                continue;
            }
            chosen.insert(pair);
        }
        Ok(chosen.into_iter().collect())
    } else {
        let mut pool: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !g.has_edge(u, v))
            .collect();
        for i in 0..count {
            let j = rng.random_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool.sort_unstable();
        Ok(pool)
    }
}

/// The two ways a pair can be perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestoreCase {
    /// Observed edge that is absent in the clean graph.
    SpuriousEdge,
    /// Observed non-edge that is an edge in the clean graph.
    MissingEdge,
}

/// Probability that at least one of `i_count` draws restores a perturbed
/// pair to its clean value: `1 - q1^I` for a spurious edge, `1 - q2^I`
/// for a missing one.
pub fn edge_restore_probability(case: RestoreCase, q1: f64, q2: f64, i_count: usize) -> f64 {
    match case {
        RestoreCase::SpuriousEdge => 1.0 - q1.powi(i_count as i32),
        RestoreCase::MissingEdge => 1.0 - q2.powi(i_count as i32),
    }
}

/// The four joint configurations of (observed, clean) for a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairCase {
    /// Observed edge, clean edge.
    KeptEdge,
    /// Observed edge, clean non-edge.
    SpuriousEdge,
    /// Observed non-edge, clean edge.
    MissingEdge,
    /// Observed non-edge, clean non-edge.
    KeptNonEdge,
}

/// Probability that at least one of `i_count` independent draws agrees
/// with the clean value of a pair in the given configuration.
pub fn per_pair_union_probability(case: PairCase, q1: f64, q2: f64, i_count: usize) -> f64 {
    let i = i_count as i32;
    match case {
        PairCase::KeptEdge => 1.0 - (1.0 - q1).powi(i),
        PairCase::SpuriousEdge => 1.0 - q1.powi(i),
        PairCase::MissingEdge => 1.0 - q2.powi(i),
        PairCase::KeptNonEdge => 1.0 - (1.0 - q2).powi(i),
    }
}

/// Counts of the four [`PairCase`] configurations over a pair universe:
/// `kappa` kept edges, `lambda` spurious edges, `mu` missing edges,
/// `nu` kept non-edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeEventCounts {
    pub kappa: usize,
    pub lambda: usize,
    pub mu: usize,
    pub nu: usize,
}

impl EdgeEventCounts {
    pub fn total(&self) -> usize {
        self.kappa + self.lambda + self.mu + self.nu
    }
}

/// Classify every pair by (observed, clean) value. With `node` given, only
/// the pairs incident to that node are counted; otherwise all unordered
/// pairs are.
pub fn count_edge_events(
    original: &Graph,
    perturbed: &Graph,
    node: Option<usize>,
) -> Result<EdgeEventCounts> {
    if original.n_nodes() != perturbed.n_nodes() {
        return Err(Error::shape(format!(
            "graphs have {} and {} nodes",
            original.n_nodes(),
            perturbed.n_nodes()
        )));
    }
    let n = original.n_nodes();
    let mut counts = EdgeEventCounts {
        kappa: 0,
        lambda: 0,
        mu: 0,
        nu: 0,
    };
    let mut tally = |u: usize, v: usize| {
        match (perturbed.has_edge(u, v), original.has_edge(u, v)) {
            (true, true) => counts.kappa += 1,
            (true, false) => counts.lambda += 1,
            (false, true) => counts.mu += 1,
            (false, false) => counts.nu += 1,
        }
    };
    match node {
        Some(node) => {
            if node >= n {
                return Err(Error::Bounds {
                    index: node,
                    n_nodes: n,
                });
            }
            for other in 0..n {
                if other != node {
                    tally(node, other);
                }
            }
        }
        None => {
            for u in 0..n {
                for v in (u + 1)..n {
                    tally(u, v);
                }
            }
        }
    }
    Ok(counts)
}

/// Product of per-pair union probabilities over a counted pair universe:
///
/// `(1-(1-q1)^I)^kappa * (1-q1^I)^lambda * (1-q2^I)^mu * (1-(1-q2)^I)^nu`
///
/// Accumulated in the log domain once the pair count exceeds 50, since the
/// product can underflow on real rows.
pub fn neighborhood_recovery_probability(
    counts: &EdgeEventCounts,
    q1: f64,
    q2: f64,
    i_count: usize,
) -> f64 {
    let factors = [
        (
            counts.kappa,
            per_pair_union_probability(PairCase::KeptEdge, q1, q2, i_count),
        ),
        (
            counts.lambda,
            per_pair_union_probability(PairCase::SpuriousEdge, q1, q2, i_count),
        ),
        (
            counts.mu,
            per_pair_union_probability(PairCase::MissingEdge, q1, q2, i_count),
        ),
        (
            counts.nu,
            per_pair_union_probability(PairCase::KeptNonEdge, q1, q2, i_count),
        ),
    ];
    if counts.total() > 50 {
        let log_sum: f64 = factors
            .iter()
            .map(|&(count, p)| {
                if count == 0 {
                    0.0
                } else {
                    count as f64 * p.ln()
                }
            })
            .sum();
        log_sum.exp()
    } else {
        factors
            .iter()
            .map(|&(count, p)| p.powi(count as i32))
            .product()
    }
}

/// Which recovery event a Monte-Carlo run estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoverySemantics {
    /// Every pair agrees with the clean graph in *some* draw; different
    /// pairs may be covered by different draws. This is the event whose
    /// probability the closed-form product gives.
    PerPairUnion,
    /// A *single* draw agrees with the clean graph on every pair at once,
    /// i.e. some auxiliary graph reproduces the whole neighborhood.
    SingleDrawFull,
}

/// Monte-Carlo estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Estimate a recovery probability by simulation.
///
/// Each trial redraws `cfg.i_count` dithered copies of the relevant pairs
/// of `perturbed` and checks the chosen recovery event against `original`.
/// The draw stream depends only on `(cfg.seed, trial)`, so the two
/// semantics evaluated at the same seed see identical draws — which makes
/// the pointwise dominance `SingleDrawFull <= PerPairUnion` hold exactly,
/// not just in expectation.
pub fn monte_carlo_recovery(
    original: &Graph,
    perturbed: &Graph,
    node: Option<usize>,
    cfg: &DitherConfig,
    trials: usize,
    semantics: RecoverySemantics,
) -> Result<MonteCarloEstimate> {
    cfg.validate()?;
    if trials == 0 {
        return Err(Error::validation("trials must be at least 1"));
    }
    if original.n_nodes() != perturbed.n_nodes() {
        return Err(Error::shape(format!(
            "graphs have {} and {} nodes",
            original.n_nodes(),
            perturbed.n_nodes()
        )));
    }
    let n = original.n_nodes();
    let pairs: Vec<(usize, usize)> = match node {
        Some(node) => {
            if node >= n {
                return Err(Error::Bounds {
                    index: node,
                    n_nodes: n,
                });
            }
            (0..n).filter(|&o| o != node).map(|o| (node, o)).collect()
        }
        None => (0..n)
            .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
            .collect(),
    };

    let successes: u64 = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng::stream(cfg.seed, trial);
            // matched_any[p]: some draw agreed with the clean value at pair p.
            let mut matched_any = vec![false; pairs.len()];
            let mut any_draw_full = false;
            for _ in 0..cfg.i_count {
                let mut draw_full = true;
                for (p, &(u, v)) in pairs.iter().enumerate() {
                    let sampled = if perturbed.has_edge(u, v) {
                        rng.random_bool(cfg.q1)
                    } else {
                        !rng.random_bool(cfg.q2)
                    };
                    let matches = sampled == original.has_edge(u, v);
                    matched_any[p] |= matches;
                    draw_full &= matches;
                }
                any_draw_full |= draw_full;
            }
            let success = match semantics {
                RecoverySemantics::PerPairUnion => matched_any.iter().all(|&m| m),
                RecoverySemantics::SingleDrawFull => any_draw_full,
            };
            u64::from(success)
        })
        .sum();

    let estimate = successes as f64 / trials as f64;
    let std_error = (estimate * (1.0 - estimate) / trials as f64).sqrt();
    Ok(MonteCarloEstimate {
        estimate,
        std_error,
        trials,
    })
}
