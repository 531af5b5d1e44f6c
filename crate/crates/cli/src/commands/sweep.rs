//! `edagcn sweep`: run the training pipeline across a sequence of values
//! of one knob and collect test metrics into a CSV. Each run gets its own
//! derived seed and output subdirectory.

use std::io::Write;
use std::path::PathBuf;

use clap::Args as ClapArgs;
use edagcn_core::rng::derive_seed;
use serde::Deserialize;

use crate::commands::train::run_resolved;
use crate::config::{ExperimentConfig, Overrides};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Axis {
    Q1,
    Q2,
    ICount,
    InsertedEdges,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Q1 => "q1",
            Axis::Q2 => "q2",
            Axis::ICount => "i_count",
            Axis::InsertedEdges => "inserted_edges",
        }
    }
}

#[derive(ClapArgs)]
pub struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Which knob to sweep.
    #[arg(long, value_enum)]
    axis: Axis,
    /// Comma-separated values, echoed verbatim into the CSV.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    /// Independent repetitions per value (each with its own seed).
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Deserialize)]
struct MetricsIn {
    accuracy: f64,
    macro_f1: f64,
}

fn bad_value(axis: Axis, value: &str) -> CliError {
    CliError::usage(format!("bad value {value:?} for axis {}", axis.name()))
}

fn apply_axis(cfg: &mut ExperimentConfig, axis: Axis, value: &str) -> Result<(), CliError> {
    match axis {
        Axis::Q1 => cfg.dither.q1 = value.parse().map_err(|_| bad_value(axis, value))?,
        Axis::Q2 => cfg.dither.q2 = value.parse().map_err(|_| bad_value(axis, value))?,
        Axis::ICount => {
            cfg.dither.i_count = value.parse().map_err(|_| bad_value(axis, value))?
        }
        Axis::InsertedEdges => {
            // Handled at run time (perturbs the input graph); validate
            // here so errors surface before any run starts.
            let _: usize = value.parse().map_err(|_| bad_value(axis, value))?;
        }
    }
    Ok(())
}

pub fn run(args: Args) -> Result<(), CliError> {
    if args.repeats == 0 {
        return Err(CliError::usage("--repeats must be at least 1"));
    }
    let mut base = ExperimentConfig::load(&args.config)?;
    args.overrides.apply(&mut base)?;
    base.write_resolved(&base.out_dir)?;

    let mut rows = Vec::new();
    for (value_index, value) in args.values.iter().enumerate() {
        for repeat in 0..args.repeats {
            let run_index = (value_index * args.repeats + repeat) as u64;
            let seed = derive_seed(base.run_seed, run_index);
            let mut cfg = base.clone();
            cfg.run_seed = seed;
            cfg.dither.seed = derive_seed(seed, 1);
            cfg.train.seed = derive_seed(seed, 2);
            apply_axis(&mut cfg, args.axis, value)?;

            if args.axis == Axis::InsertedEdges {
                // Materialize the perturbed graph for this run.
                let count: usize = value.parse().expect("validated");
                let original = edagcn_core::Graph::from_edge_list_file(
                    &cfg.data.edges,
                    cfg.data.n_nodes,
                )?;
                let perturbed = edagcn_core::perturb::random_edge_insertion(
                    &original,
                    count,
                    derive_seed(seed, 3),
                )?;
                let run_dir = cfg.out_dir.join(format!("run_{run_index:03}"));
                std::fs::create_dir_all(&run_dir).map_err(edagcn_core::Error::from)?;
                let path = run_dir.join("perturbed.tsv");
                let file =
                    std::fs::File::create(&path).map_err(edagcn_core::Error::from)?;
                perturbed
                    .write_edge_list(std::io::BufWriter::new(file))
                    .map_err(edagcn_core::Error::from)?;
                cfg.data.edges = path;
            }

            let run_dir = cfg.out_dir.join(format!("run_{run_index:03}"));
            cfg.out_dir = run_dir.clone();
            cfg.write_resolved(&run_dir)?;
            let metrics_json = run_resolved(&cfg, &run_dir)?;
            let metrics: MetricsIn = serde_json::from_str(&metrics_json)
                .map_err(|e| CliError::usage(e.to_string()))?;
            rows.push((
                value.clone(),
                seed,
                metrics.accuracy,
                metrics.macro_f1,
                cfg.hash(),
            ));
            println!(
                "{}={value} seed={seed}: accuracy {:.4}, macro_f1 {:.4}",
                args.axis.name(),
                metrics.accuracy,
                metrics.macro_f1
            );
        }
    }

    let csv_path = base.out_dir.join("sweep.csv");
    let mut csv = std::io::BufWriter::new(
        std::fs::File::create(&csv_path).map_err(edagcn_core::Error::from)?,
    );
    writeln!(csv, "axis,value,seed,accuracy,macro_f1,config_hash")
        .map_err(edagcn_core::Error::from)?;
    for (value, seed, accuracy, macro_f1, hash) in &rows {
        writeln!(
            csv,
            "{},{value},{seed},{accuracy},{macro_f1},{hash}",
            args.axis.name()
        )
        .map_err(edagcn_core::Error::from)?;
    }
    println!("wrote {}", csv_path.display());
    Ok(())
}
