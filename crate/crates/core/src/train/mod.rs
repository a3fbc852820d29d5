//! Mini-batch training with a staircase learning-rate schedule.
//!
//! Every admissible stride-1 window of every sequence is visited exactly once
//! per epoch in a shuffled order. All randomness (shuffling and the latent
//! noise draws) comes from one seeded stream whose position is checkpointed,
//! so resuming reproduces an uninterrupted run exactly.

mod checkpoint;
mod optim;

use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, load_model, save_checkpoint, Checkpoint, TrainingState, CHECKPOINT_VERSION};
pub use optim::{clip_global_norm, global_norm, lr_at, AdamHyper, Optimizer, OptimizerKind};

use crate::autodiff::{Graph, Tensor};
use crate::error::{invalid, Error, Result};
use crate::model::{sample_noise, ClipBatch, IbModel, ModelConfig};
use crate::rng::{stream, Purpose, RngState};
use crate::world::SequenceDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Frame pairs per clip.
    pub clip_len: usize,
    pub lr_initial: f64,
    /// `(epoch, lr)` steps; `None` means `lr_initial` scaled by 0.1 after half
    /// the epochs and by 0.05 after five sixths. Derived milestones move with
    /// `epochs`, so runs meant to be resumed longer should list them.
    pub lr_milestones: Option<Vec<(usize, f64)>>,
    pub optimizer: OptimizerKind,
    pub adam: AdamHyper,
    /// Global gradient norm cap; `None` disables clipping.
    pub grad_clip_norm: Option<f64>,
    pub seed: u64,
    /// Fill the `seconds` metrics column with wall-clock time; off makes logs bit-reproducible.
    pub record_timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 60,
            batch_size: 16,
            clip_len: 5,
            lr_initial: 1e-4,
            lr_milestones: None,
            optimizer: OptimizerKind::Adam,
            adam: AdamHyper::default(),
            grad_clip_norm: Some(5.0),
            seed: 0,
            record_timing: true,
        }
    }
}

impl TrainConfig {
    pub fn milestones(&self) -> Vec<(usize, f64)> {
        match &self.lr_milestones {
            Some(m) => m.clone(),
            None => {
                let (a, b) = (self.epochs / 2, self.epochs * 5 / 6);
                if a < b {
                    vec![(a, self.lr_initial * 0.1), (b, self.lr_initial * 0.05)]
                } else {
                    vec![(b, self.lr_initial * 0.05)]
                }
            }
        }
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        lr_at(self.lr_initial, &self.milestones(), epoch)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("train.{m}")));
        if self.epochs == 0 || self.batch_size == 0 || self.clip_len == 0 {
            return fail("epochs, batch_size and clip_len must be at least 1".into());
        }
        if !(self.lr_initial > 0.0 && self.lr_initial.is_finite()) {
            return fail(format!("lr_initial must be positive, got {}", self.lr_initial));
        }
        if let Some(c) = self.grad_clip_norm {
            if !(c > 0.0) {
                return fail(format!("grad_clip_norm must be positive, got {c}"));
            }
        }
        let ms = self.milestones();
        let mut prev_lr = self.lr_initial;
        for (i, &(e, lr)) in ms.iter().enumerate() {
            if i > 0 && e <= ms[i - 1].0 {
                return fail(format!("lr_milestones epochs must strictly increase, got {ms:?}"));
            }
            if !(lr > 0.0) || lr > prev_lr {
                return fail(format!("lr_milestones rates must be positive and non-increasing, got {ms:?}"));
            }
            prev_lr = lr;
        }
        Ok(())
    }
}

/// One row of the metrics log. `epoch` counts from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean clip loss over the epoch.
    pub loss: f64,
    pub pose_term: f64,
    pub kl_term: f64,
    pub lr: f64,
    pub seconds: f64,
}

pub fn write_metrics_csv(path: &Path, metrics: &[EpochMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for m in metrics {
        w.serialize(m)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<EpochMetrics>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

/// Every `(sequence, start)` whose clip of `len` frame pairs fits.
pub fn admissible_windows(datasets: &[SequenceDataset], len: usize) -> Vec<(usize, usize)> {
    datasets
        .iter()
        .enumerate()
        .flat_map(|(s, ds)| (0..(ds.frames() + 1).saturating_sub(len)).map(move |start| (s, start)))
        .collect()
}

pub struct Trainer {
    model: IbModel,
    config: TrainConfig,
    optimizer: Optimizer,
    rng: ChaCha20Rng,
    epoch: usize,
    metrics: Vec<EpochMetrics>,
}

struct Snapshot {
    params: Vec<Tensor>,
    optimizer: Optimizer,
    rng: ChaCha20Rng,
}

impl Trainer {
    /// Fresh model initialized from `config.seed`.
    pub fn new(model_config: ModelConfig, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let model = IbModel::new(model_config, config.seed)?;
        Ok(Trainer::with_model(model, config))
    }

    fn with_model(model: IbModel, config: TrainConfig) -> Self {
        let optimizer = Optimizer::new(config.optimizer, config.adam, model.params().tensors());
        let rng = stream(config.seed, 0, Purpose::Training);
        Trainer {
            model,
            config,
            optimizer,
            rng,
            epoch: 0,
            metrics: Vec::new(),
        }
    }

    /// Continues from a checkpoint written by [`Trainer::save`].
    ///
    /// The model config must equal the checkpoint's. `epochs` may differ
    /// (to train longer); every other training setting must match.
    pub fn resume(path: &Path, model_config: &ModelConfig, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let ckpt = load_checkpoint(path)?;
        if ckpt.model.config() != model_config {
            return Err(Error::Config(format!(
                "{}: checkpoint model config {:?} differs from {:?}",
                path.display(),
                ckpt.model.config(),
                model_config
            )));
        }
        let ts = ckpt
            .training
            .ok_or_else(|| Error::Format(format!("{}: checkpoint has no training state", path.display())))?;
        let comparable = TrainConfig {
            epochs: config.epochs,
            ..ts.train_config.clone()
        };
        if comparable != config {
            return Err(Error::Config(format!(
                "{}: checkpoint was trained with {:?}, asked to continue with {:?}",
                path.display(),
                ts.train_config,
                config
            )));
        }
        let rng = ts
            .rng
            .restore()
            .ok_or_else(|| Error::Format(format!("{}: bad RNG state", path.display())))?;
        Ok(Trainer {
            model: ckpt.model,
            config,
            optimizer: ts.optimizer,
            rng,
            epoch: ts.epoch,
            metrics: ts.metrics,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let state = TrainingState {
            train_config: self.config.clone(),
            epoch: self.epoch,
            rng: RngState::capture(&self.rng),
            optimizer: self.optimizer.clone(),
            metrics: self.metrics.clone(),
        };
        save_checkpoint(path, &self.model, Some(&state))
    }

    pub fn model(&self) -> &IbModel {
        &self.model
    }

    pub fn into_model(self) -> IbModel {
        self.model
    }

    pub fn metrics(&self) -> &[EpochMetrics] {
        &self.metrics
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            params: self.model.params().tensors().to_vec(),
            optimizer: self.optimizer.clone(),
            rng: self.rng.clone(),
        }
    }

    fn restore(&mut self, s: Snapshot) {
        self.model
            .params_mut()
            .assign(s.params)
            .expect("snapshot has the model's own shapes");
        self.optimizer = s.optimizer;
        self.rng = s.rng;
    }

    /// One optimizer step on a clip batch; returns (loss, pose term, kl term).
    fn step(&mut self, clip: &ClipBatch, lr: f64) -> Result<(f64, f64, f64)> {
        let mut g = Graph::new();
        let vars = self.model.params().bind(&mut g);
        let loss = self.model.clip_loss(&mut g, &vars, clip)?;
        let grads = g.backward(loss.total)?;
        let mut grads: Vec<Tensor> = vars.iter().map(|&v| grads.wrt(v)).collect();
        let norm = clip_global_norm(&mut grads, self.config.grad_clip_norm);
        if !norm.is_finite() {
            return Err(invalid("non-finite gradient norm"));
        }
        self.optimizer
            .apply(self.model.params_mut().tensors_mut(), &grads, lr);
        let scalar = |v| g.value(v).data()[0];
        Ok((scalar(loss.total), scalar(loss.pose), scalar(loss.kl)))
    }

    /// Trains one epoch. On a non-finite loss or gradient the parameters,
    /// optimizer and RNG are rolled back to the start of the epoch.
    pub fn run_epoch(&mut self, datasets: &[SequenceDataset]) -> Result<EpochMetrics> {
        let started = Instant::now();
        let mut windows = admissible_windows(datasets, self.config.clip_len);
        if windows.is_empty() {
            return Err(invalid(format!(
                "no sequence is long enough for clips of {} frame pairs",
                self.config.clip_len
            )));
        }
        let snapshot = self.snapshot();
        let lr = self.config.lr_at(self.epoch);
        windows.shuffle(&mut self.rng);
        let (mut loss, mut pose, mut kl) = (0.0, 0.0, 0.0);
        let d = self.model.config().latent_dim;
        for batch in windows.chunks(self.config.batch_size) {
            let noise = sample_noise(&mut self.rng, batch.len(), self.config.clip_len, d);
            let clip = ClipBatch::from_windows(datasets, batch, self.config.clip_len, self.model.config(), &noise, true)?;
            match self.step(&clip, lr) {
                Ok((l, p, k)) => {
                    let w = batch.len() as f64;
                    loss += l * w;
                    pose += p * w;
                    kl += k * w;
                }
                Err(e @ (Error::NonFiniteLoss { .. } | Error::InvalidInput(_) | Error::Tensor(_))) => {
                    warn!("epoch {}: {e}; rolling back", self.epoch + 1);
                    self.restore(snapshot);
                    return Err(Error::Diverged { epoch: self.epoch + 1 });
                }
                Err(e) => return Err(e),
            }
        }
        let n = windows.len() as f64;
        self.epoch += 1;
        let m = EpochMetrics {
            epoch: self.epoch,
            loss: loss / n,
            pose_term: pose / n,
            kl_term: kl / n,
            lr,
            seconds: if self.config.record_timing {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };
        info!(
            "epoch {} loss {:.6} pose {:.6} kl {:.6} lr {:e}",
            m.epoch, m.loss, m.pose_term, m.kl_term, m.lr
        );
        self.metrics.push(m);
        Ok(m)
    }

    /// Trains until `config.epochs` epochs are done, optionally saving a
    /// checkpoint after every completed epoch. On divergence the checkpoint of
    /// the last completed epoch is left untouched.
    pub fn run(&mut self, datasets: &[SequenceDataset], checkpoint: Option<&Path>) -> Result<()> {
        if datasets.is_empty() {
            return Err(invalid("training needs at least one sequence"));
        }
        while self.epoch < self.config.epochs {
            match self.run_epoch(datasets) {
                Ok(_) => {
                    if let Some(p) = checkpoint {
                        self.save(p)?;
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
}

/// Trains a fresh model; returns it with its per-epoch metrics.
pub fn train(
    datasets: &[SequenceDataset],
    model_config: ModelConfig,
    config: TrainConfig,
) -> Result<(IbModel, Vec<EpochMetrics>)> {
    let mut trainer = Trainer::new(model_config, config)?;
    trainer.run(datasets, None)?;
    let metrics = trainer.metrics.clone();
    Ok((trainer.into_model(), metrics))
}
