//! Reconstruction probe: how much of the per-sequence nuisance code can a
//! small perceptron recover from a frozen model's observation latents?

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{invalid, Result};
use crate::model::{sample_noise, ClipBatch, IbModel};
use crate::rng::{normals, stream, Purpose};
use crate::train::{AdamHyper, Optimizer, OptimizerKind};
use crate::world::{generate_sequences, WorldConfig};

/// Probe sequences draw indices from here on.
pub const PROBE_INDEX_OFFSET: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// The nuisance code is constant per sequence, so sequence counts, not
    /// sample counts, bound how well a probe can be fit and scored.
    pub train_sequences: usize,
    pub val_sequences: usize,
    pub test_sequences: usize,
    /// Frame pairs per probe sequence; every step contributes one sample.
    pub frames: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            hidden: 64,
            epochs: 60,
            batch_size: 64,
            lr: 1e-3,
            train_sequences: 800,
            val_sequences: 200,
            test_sequences: 400,
            frames: 5,
            seed: 0,
        }
    }
}

/// Inputs and targets, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSets {
    pub train: Split,
    pub val: Split,
    pub test: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub hidden: usize,
    /// Held-out MSE from the model's latents.
    pub mse: f64,
    /// Held-out MSE from white-noise inputs of the same width.
    pub noise_mse: f64,
    /// Per-dimension variance of the held-out targets, averaged.
    pub target_variance: f64,
}

impl ProbeSets {
    /// Latent samples of `model` on fresh sequences of `world`; the target of
    /// every step is its sequence's nuisance code.
    pub fn from_model(model: &IbModel, world: &WorldConfig, config: &ProbeConfig) -> Result<Self> {
        if !model.config().variant.is_stochastic() {
            return Err(invalid("the probe reads stochastic latents; the deterministic baseline has none"));
        }
        let world = WorldConfig {
            frames: config.frames,
            ..world.clone()
        };
        let mut rng = stream(config.seed, 0, Purpose::Probe);
        let d = model.config().latent_dim;
        let mut split = |offset: u64, n: usize| -> Result<Split> {
            let start = PROBE_INDEX_OFFSET + offset;
            let seqs = generate_sequences(&world, start..start + n as u64)?;
            let windows: Vec<(usize, usize)> = (0..n).map(|s| (s, 0)).collect();
            let noise = sample_noise(&mut rng, n, config.frames, d);
            let clip = ClipBatch::from_windows(&seqs, &windows, config.frames, model.config(), &noise, false)?;
            let out = model.infer(&clip)?;
            let mut x = Vec::with_capacity(n * config.frames);
            let mut y = Vec::with_capacity(n * config.frames);
            for code in &out.code {
                for (s, ds) in seqs.iter().enumerate() {
                    x.push(code.row(s).to_vec());
                    y.push(ds.nuisance.clone());
                }
            }
            Ok(Split { x, y })
        };
        let train = split(0, config.train_sequences)?;
        let val = split(config.train_sequences as u64, config.val_sequences)?;
        let test = split((config.train_sequences + config.val_sequences) as u64, config.test_sequences)?;
        Ok(ProbeSets { train, val, test })
    }

    /// Same targets with inputs replaced by independent standard normals.
    pub fn with_noise_inputs(&self, seed: u64) -> ProbeSets {
        let mut rng = stream(seed, 1, Purpose::Probe);
        let mut swap = |s: &Split| Split {
            x: s.x.iter().map(|row| normals(&mut rng, row.len())).collect(),
            y: s.y.clone(),
        };
        ProbeSets {
            train: swap(&self.train),
            val: swap(&self.val),
            test: swap(&self.test),
        }
    }
}

fn matrix(rows: &[Vec<f64>]) -> Tensor {
    let cols = rows.first().map_or(0, Vec::len);
    Tensor::from_parts(vec![rows.len(), cols], rows.concat())
}

struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &[Vec<f64>]) -> Self {
        let n = x.len() as f64;
        let dim = x[0].len();
        let mean: Vec<f64> = (0..dim).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale = (0..dim)
            .map(|j| {
                let var = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 1e-24 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    fn apply(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|r| r.iter().enumerate().map(|(j, v)| (v - self.mean[j]) / self.scale[j]).collect())
            .collect()
    }
}

fn glorot(rng: &mut rand_chacha::ChaCha20Rng, rows: usize, cols: usize) -> Tensor {
    use rand::Rng;
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::from_parts(vec![rows, cols], (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect())
}

fn forward(g: &mut Graph, p: &[Var], x: Var) -> crate::autodiff::Result<Var> {
    let mut h = x;
    for layer in 0..3 {
        h = g.matmul(h, p[2 * layer])?;
        h = g.add_row(h, p[2 * layer + 1])?;
        if layer < 2 {
            h = g.relu(h)?;
        }
    }
    Ok(h)
}

fn mse_of(params: &[Tensor], x: &Tensor, y: &Tensor) -> Result<f64> {
    let mut g = Graph::new();
    let p: Vec<Var> = params.iter().map(|t| g.constant(t.clone())).collect();
    let xv = g.constant(x.clone());
    let yv = g.constant(y.clone());
    let out = forward(&mut g, &p, xv)?;
    let diff = g.sub(out, yv)?;
    let sq = g.square(diff)?;
    let m = g.mean(sq, None)?;
    Ok(g.value(m).data()[0])
}

/// Trains a 3-layer perceptron on `sets.train`, keeps the parameters with the
/// lowest validation MSE, and returns their test MSE.
pub fn probe_mse(sets: &ProbeSets, config: &ProbeConfig) -> Result<f64> {
    if sets.train.x.is_empty() || sets.val.x.is_empty() || sets.test.x.is_empty() {
        return Err(invalid("probe splits must be non-empty"));
    }
    let norm = Standardizer::fit(&sets.train.x);
    let train_x = norm.apply(&sets.train.x);
    let val_x = matrix(&norm.apply(&sets.val.x));
    let val_y = matrix(&sets.val.y);
    let test_x = matrix(&norm.apply(&sets.test.x));
    let test_y = matrix(&sets.test.y);
    let input = train_x[0].len();
    let output = sets.train.y[0].len();
    let h = config.hidden;

    let mut rng = stream(config.seed, 2, Purpose::Probe);
    let mut params = vec![
        glorot(&mut rng, input, h),
        Tensor::zeros(&[h]),
        glorot(&mut rng, h, h),
        Tensor::zeros(&[h]),
        glorot(&mut rng, h, output),
        Tensor::zeros(&[output]),
    ];
    let mut opt = Optimizer::new(OptimizerKind::Adam, AdamHyper::default(), &params);
    let mut best = (mse_of(&params, &val_x, &val_y)?, params.clone());
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size.max(1)) {
            let bx: Vec<Vec<f64>> = batch.iter().map(|&i| train_x[i].clone()).collect();
            let by: Vec<Vec<f64>> = batch.iter().map(|&i| sets.train.y[i].clone()).collect();
            let mut g = Graph::new();
            let p: Vec<Var> = params.iter().map(|t| g.param(t.clone())).collect();
            let xv = g.constant(matrix(&bx));
            let yv = g.constant(matrix(&by));
            let out = forward(&mut g, &p, xv)?;
            let diff = g.sub(out, yv)?;
            let sq = g.square(diff)?;
            let loss = g.mean(sq, None)?;
            let grads = g.backward(loss)?;
            let grads: Vec<Tensor> = p.iter().map(|&v| grads.wrt(v)).collect();
            opt.apply(&mut params, &grads, config.lr);
        }
        let val = mse_of(&params, &val_x, &val_y)?;
        if val < best.0 {
            best = (val, params.clone());
        }
    }
    mse_of(&best.1, &test_x, &test_y)
}

/// Mean over target dimensions of the held-out target variance.
pub fn target_variance(split: &Split) -> f64 {
    let n = split.y.len() as f64;
    let dim = split.y[0].len();
    (0..dim)
        .map(|j| {
            let m = split.y.iter().map(|r| r[j]).sum::<f64>() / n;
            split.y.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n
        })
        .sum::<f64>()
        / dim as f64
}

/// Probe of one frozen model, with the white-noise baseline alongside.
pub fn nuisance_probe(model: &IbModel, world: &WorldConfig, config: &ProbeConfig) -> Result<ProbeReport> {
    let sets = ProbeSets::from_model(model, world, config)?;
    let noise = sets.with_noise_inputs(config.seed);
    Ok(ProbeReport {
        hidden: config.hidden,
        mse: probe_mse(&sets, config)?,
        noise_mse: probe_mse(&noise, config)?,
        target_variance: target_variance(&sets.test),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(n: usize, informative: bool, seed: u64) -> Split {
        let mut rng = stream(seed, 3, Purpose::Probe);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let target = normals(&mut rng, 2);
            let noise = normals(&mut rng, 4);
            let row = if informative {
                vec![target[0] + 0.05 * noise[0], target[1] - target[0], noise[2], noise[3]]
            } else {
                noise
            };
            x.push(row);
            y.push(target);
        }
        Split { x, y }
    }

    fn config() -> ProbeConfig {
        ProbeConfig {
            hidden: 16,
            epochs: 30,
            batch_size: 32,
            ..Default::default()
        }
    }

    #[test]
    fn noise_inputs_reach_the_target_variance() {
        let sets = ProbeSets {
            train: synthetic(800, false, 1),
            val: synthetic(300, false, 2),
            test: synthetic(2000, false, 3),
        };
        let mse = probe_mse(&sets, &config()).unwrap();
        let var = target_variance(&sets.test);
        assert!((mse / var - 1.0).abs() < 0.05, "mse {mse} var {var}");
    }

    #[test]
    fn informative_inputs_beat_noise() {
        let sets = ProbeSets {
            train: synthetic(800, true, 1),
            val: synthetic(300, true, 2),
            test: synthetic(1000, true, 3),
        };
        let mse = probe_mse(&sets, &config()).unwrap();
        assert!(mse < 0.1, "{mse}");
    }
}
