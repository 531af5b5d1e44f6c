//! `edagcn attack`: perturb a graph by uniform random edge insertion or
//! by the built-in targeted attack. Writes the perturbed edge list, an
//! attack manifest (so the result can be ingested later), and a delta
//! report.

use std::path::PathBuf;

use clap::Args as ClapArgs;
use edagcn_core::perturb::{random_edge_insertion, simple_targeted_attack, AttackManifest};
use edagcn_core::{LabelData, PerturbationDelta};
use serde::Serialize;

use crate::config::{ExperimentConfig, Overrides};
use crate::CliError;

#[derive(ClapArgs)]
pub struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Insert this many uniformly chosen non-edges.
    #[arg(long, conflicts_with = "targets")]
    count: Option<usize>,
    /// Comma-separated targeted nodes (uses the labels to pick
    /// cross-class endpoints).
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<usize>>,
    /// Edges added per target.
    #[arg(long, default_value_t = 1)]
    budget: usize,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Serialize)]
struct DeltaReport {
    insertion_count: usize,
    deletion_count: usize,
    insertions: Vec<(usize, usize)>,
    deletions: Vec<(usize, usize)>,
    config_hash: String,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    args.overrides.apply(&mut cfg)?;
    let hash = cfg.hash();
    cfg.write_resolved(&cfg.out_dir)?;

    let original =
        edagcn_core::Graph::from_edge_list_file(&cfg.data.edges, cfg.data.n_nodes)?;
    let (perturbed, targets) = match (&args.count, &args.targets) {
        (Some(count), None) => (
            random_edge_insertion(&original, *count, cfg.run_seed)?,
            Vec::new(),
        ),
        (None, Some(targets)) => {
            let labels = LabelData::from_files(&cfg.data.labels, &cfg.data.splits)?
                .expand_to(cfg.data.n_nodes)?;
            (
                simple_targeted_attack(
                    &original,
                    targets,
                    args.budget,
                    Some(&labels),
                    cfg.run_seed,
                )?,
                targets.clone(),
            )
        }
        _ => {
            return Err(CliError::usage(
                "pass exactly one of --count or --targets",
            ))
        }
    };

    let edges_name = "attacked.tsv";
    let file = std::fs::File::create(cfg.out_dir.join(edges_name))
        .map_err(edagcn_core::Error::from)?;
    perturbed
        .write_edge_list(std::io::BufWriter::new(file))
        .map_err(edagcn_core::Error::from)?;

    let manifest = AttackManifest {
        targets,
        original_hash: original.content_hash(),
        notes: format!("config_hash:{hash}"),
        edges: edges_name.into(),
    };
    std::fs::write(
        cfg.out_dir.join("attack.json"),
        serde_json::to_string_pretty(&manifest).expect("serializable"),
    )
    .map_err(edagcn_core::Error::from)?;

    let delta = PerturbationDelta::between(&original, &perturbed)?;
    let report = DeltaReport {
        insertion_count: delta.insertions().len(),
        deletion_count: delta.deletions().len(),
        insertions: delta.insertions().to_vec(),
        deletions: delta.deletions().to_vec(),
        config_hash: hash,
    };
    let json = serde_json::to_string_pretty(&report).expect("serializable");
    std::fs::write(cfg.out_dir.join("delta.json"), &json)
        .map_err(edagcn_core::Error::from)?;
    println!("{json}");
    Ok(())
}
