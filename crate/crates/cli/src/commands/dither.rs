//! `edagcn dither`: write the drawn auxiliary graphs as edge-list files
//! plus a JSON manifest tying them to the source graph and config.

use std::path::PathBuf;

use clap::Args as ClapArgs;
use edagcn_core::dither::dither;
use serde::Serialize;

use crate::config::{ExperimentConfig, Overrides};
use crate::pipeline::load_observed_graph;
use crate::CliError;

#[derive(ClapArgs)]
pub struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Serialize)]
struct Manifest {
    q1: f64,
    q2: f64,
    i_count: usize,
    seed: u64,
    source_hash: String,
    config_hash: String,
    files: Vec<String>,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    args.overrides.apply(&mut cfg)?;
    let hash = cfg.hash();
    cfg.write_resolved(&cfg.out_dir)?;

    let source = load_observed_graph(&cfg)?;
    let set = dither(&source, &cfg.dither.to_core())?;

    let mut files = Vec::with_capacity(set.graphs().len());
    for (index, graph) in set.graphs().iter().enumerate() {
        let name = format!("graph_{index:03}.tsv");
        let file = std::fs::File::create(cfg.out_dir.join(&name))
            .map_err(edagcn_core::Error::from)?;
        graph
            .write_edge_list(std::io::BufWriter::new(file))
            .map_err(edagcn_core::Error::from)?;
        files.push(name);
    }
    let manifest = Manifest {
        q1: cfg.dither.q1,
        q2: cfg.dither.q2,
        i_count: cfg.dither.i_count,
        seed: cfg.dither.seed,
        source_hash: source.content_hash(),
        config_hash: hash,
        files,
    };
    std::fs::write(
        cfg.out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("serializable"),
    )
    .map_err(edagcn_core::Error::from)?;
    println!(
        "wrote {} graphs and manifest.json to {}",
        set.graphs().len(),
        cfg.out_dir.display()
    );
    Ok(())
}
