//! Checkpoint files: model config and parameters, plus optional optimizer
//! moments, RNG position and metrics so far for exact resume.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::{AdamHyper, Optimizer, OptimizerKind};
use super::{EpochMetrics, TrainConfig};
use crate::autodiff::Tensor;
use crate::blob::{self, Array};
use crate::error::{Error, Result};
use crate::model::{IbModel, ModelConfig};
use crate::rng::RngState;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"IBCKPT\0\x01";

/// Everything beyond the parameters that training needs to continue exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingState {
    pub train_config: TrainConfig,
    /// Completed epochs.
    pub epoch: usize,
    pub rng: RngState,
    pub optimizer: Optimizer,
    pub metrics: Vec<EpochMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: IbModel,
    pub training: Option<TrainingState>,
}

#[derive(Serialize, Deserialize)]
struct OptimizerMeta {
    kind: OptimizerKind,
    hyper: AdamHyper,
    step: u64,
}

#[derive(Serialize, Deserialize)]
struct TrainingMeta {
    train_config: TrainConfig,
    epoch: usize,
    rng: RngState,
    optimizer: OptimizerMeta,
    metrics: Vec<EpochMetrics>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    schema_version: u32,
    model_config: ModelConfig,
    params: Vec<String>,
    training: Option<TrainingMeta>,
}

pub fn save_checkpoint(path: &Path, model: &IbModel, training: Option<&TrainingState>) -> Result<()> {
    let names = model.params().names();
    let mut arrays: Vec<Array<'_>> = names
        .iter()
        .zip(model.params().tensors())
        .map(|(n, t)| array(format!("param:{n}"), t))
        .collect();
    if let Some(ts) = training {
        for (prefix, moments) in [("adam_m", &ts.optimizer.m), ("adam_v", &ts.optimizer.v)] {
            arrays.extend(names.iter().zip(moments).map(|(n, t)| array(format!("{prefix}:{n}"), t)));
        }
    }
    let meta = Meta {
        schema_version: CHECKPOINT_VERSION,
        model_config: model.config().clone(),
        params: names.to_vec(),
        training: training.map(|ts| TrainingMeta {
            train_config: ts.train_config.clone(),
            epoch: ts.epoch,
            rng: ts.rng.clone(),
            optimizer: OptimizerMeta {
                kind: ts.optimizer.kind,
                hyper: ts.optimizer.hyper,
                step: ts.optimizer.step,
            },
            metrics: ts.metrics.clone(),
        }),
    };
    // write-then-rename keeps the previous checkpoint intact if writing fails
    let tmp = path.with_extension("partial");
    blob::write(&tmp, MAGIC, serde_json::to_value(meta)?, &arrays)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn array<'a>(name: String, t: &'a Tensor) -> Array<'a> {
    Array {
        name,
        shape: t.shape().to_vec(),
        data: t.data(),
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let ctx = path.display().to_string();
    let mut contents = blob::read(path, MAGIC)?;
    let version = contents
        .meta
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .unwrap_or(0) as u32;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    let meta: Meta = serde_json::from_value(contents.meta.clone())
        .map_err(|e| Error::Format(format!("{ctx}: checkpoint header: {e}")))?;
    let mut take = |name: String| -> Result<Tensor> {
        let (shape, data) = contents.take(&name, &ctx)?;
        Tensor::new(shape, data).map_err(|e| Error::Format(format!("{ctx}: array `{name}`: {e}")))
    };
    let params = meta
        .params
        .iter()
        .map(|n| take(format!("param:{n}")))
        .collect::<Result<Vec<_>>>()?;
    let model = IbModel::from_parts(meta.model_config, &meta.params, params)
        .map_err(|e| Error::Format(format!("{ctx}: {e}")))?;
    let training = match meta.training {
        None => None,
        Some(tm) => {
            let m = meta
                .params
                .iter()
                .map(|n| take(format!("adam_m:{n}")))
                .collect::<Result<Vec<_>>>()?;
            let v = meta
                .params
                .iter()
                .map(|n| take(format!("adam_v:{n}")))
                .collect::<Result<Vec<_>>>()?;
            Some(TrainingState {
                train_config: tm.train_config,
                epoch: tm.epoch,
                rng: tm.rng,
                optimizer: Optimizer {
                    kind: tm.optimizer.kind,
                    hyper: tm.optimizer.hyper,
                    step: tm.optimizer.step,
                    m,
                    v,
                },
                metrics: tm.metrics,
            })
        }
    };
    Ok(Checkpoint { model, training })
}

/// Loads only the model from a checkpoint.
pub fn load_model(path: &Path) -> Result<IbModel> {
    Ok(load_checkpoint(path)?.model)
}
