//! Parameter checkpoints: one JSON file carrying the model config, a
//! shape manifest, and the flattened tensors. Loading verifies shapes
//! against the embedded config and against the caller's expectations.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{init_params, ModelConfig, ParameterSet};

#[derive(Debug, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    config_hash: String,
    model: ModelConfig,
    tensors: Vec<TensorRecord>,
}

const FORMAT: &str = "edagcn-checkpoint-v1";

fn tensor_shapes(params: &ParameterSet, cfg: &ModelConfig) -> Vec<Vec<usize>> {
    // Shapes in tensor_names order, derived from the arrays themselves.
    let mut shapes = Vec::new();
    for layer in params.z_layers.iter().chain(params.x_layers.iter()) {
        shapes.push(layer.hop_coeffs.shape().to_vec());
        shapes.push(match &layer.graph_mix {
            crate::model::GraphMix::Shared(a) => a.shape().to_vec(),
            crate::model::GraphMix::PerNode(a) => a.shape().to_vec(),
        });
        shapes.push(match &layer.feature_mix {
            crate::model::FeatureMix::Shared(a) => a.shape().to_vec(),
            crate::model::FeatureMix::PerNode(a) => a.shape().to_vec(),
        });
    }
    shapes.push(params.output.weights.shape().to_vec());
    shapes.push(vec![cfg.n_classes]);
    shapes
}

/// Serialize parameters (with their config and a caller-supplied config
/// hash) to a JSON checkpoint.
pub fn save_params(
    path: impl AsRef<Path>,
    cfg: &ModelConfig,
    params: &ParameterSet,
    config_hash: &str,
) -> Result<()> {
    params.check_shapes(cfg)?;
    let names = params.tensor_names();
    let shapes = tensor_shapes(params, cfg);
    let tensors = names
        .into_iter()
        .zip(shapes)
        .zip(params.tensor_slices())
        .map(|((name, shape), data)| TensorRecord {
            name,
            shape,
            data: data.to_vec(),
        })
        .collect();
    let file = CheckpointFile {
        format: FORMAT.into(),
        config_hash: config_hash.into(),
        model: cfg.clone(),
        tensors,
    };
    let json = serde_json::to_string(&file).map_err(|e| Error::numeric(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Load a checkpoint. Returns the embedded model config, the parameters,
/// and the stored config hash. Any shape disagreement is an error.
pub fn load_params(path: impl AsRef<Path>) -> Result<(ModelConfig, ParameterSet, String)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if file.format != FORMAT {
        return Err(Error::validation(format!(
            "unsupported checkpoint format {:?}",
            file.format
        )));
    }
    // Materialize a parameter set of the right shapes, then fill it.
    let mut params = init_params(&file.model, 0)?.zeros_like();
    let names = params.tensor_names();
    if file.tensors.len() != names.len() {
        return Err(Error::shape(format!(
            "checkpoint holds {} tensors, config implies {}",
            file.tensors.len(),
            names.len()
        )));
    }
    let expected_shapes = tensor_shapes(&params, &file.model);
    {
        let mut slices = params.tensor_slices_mut();
        for (idx, record) in file.tensors.iter().enumerate() {
            if record.name != names[idx] {
                return Err(Error::shape(format!(
                    "tensor {idx} is {:?}, expected {:?}",
                    record.name, names[idx]
                )));
            }
            if record.shape != expected_shapes[idx] {
                return Err(Error::shape(format!(
                    "{}: checkpoint shape {:?} does not match config shape {:?}",
                    record.name, record.shape, expected_shapes[idx]
                )));
            }
            if record.data.len() != slices[idx].len() {
                return Err(Error::shape(format!(
                    "{}: {} values for {} slots",
                    record.name,
                    record.data.len(),
                    slices[idx].len()
                )));
            }
            slices[idx].copy_from_slice(&record.data);
        }
    }
    params.check_shapes(&file.model)?;
    Ok((file.model, params, file.config_hash))
}

/// Load a checkpoint and additionally require that its model config
/// equals `expected`.
pub fn load_params_for(
    path: impl AsRef<Path>,
    expected: &ModelConfig,
) -> Result<(ParameterSet, String)> {
    let (stored, params, hash) = load_params(path)?;
    if &stored != expected {
        return Err(Error::shape(
            "checkpoint model config does not match the requested config",
        ));
    }
    Ok((params, hash))
}
