//! Sliding-window evaluation, refinement and latent-uncertainty analysis.
//!
//! Every window start `0..=T−L` of a sequence is evaluated as one clip, so an
//! interior frame pair receives one prediction from each clip position
//! `0..L`. Refinement drops the position-0 prediction, the one made with the
//! least temporal context, and averages the rest. Evaluation uses zero latent
//! noise, i.e. the regressor reads the mean of the observation belief.

mod ablation;
mod probe;

use log::debug;
use serde::{Deserialize, Serialize};

pub use ablation::*;
pub use probe::{nuisance_probe, probe_mse, ProbeConfig, ProbeReport, ProbeSets};

use crate::error::{invalid, Result};
use crate::model::{ClipBatch, IbModel};
use crate::se3::{rmse, wrap_angle, Pose6};
use crate::world::SequenceDataset;

/// Predictions of one sequence, indexed `[pair][position]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlidingPredictions {
    pub clip_len: usize,
    pub preds: Vec<Vec<Option<Pose6>>>,
    /// Mean of `std_o²` over latent dimensions, same indexing; `None` for
    /// the deterministic baseline.
    pub sigma2: Vec<Vec<Option<f64>>>,
}

impl SlidingPredictions {
    pub fn pairs(&self) -> usize {
        self.preds.len()
    }

    /// Predictions of `pair` ordered by clip position.
    pub fn for_pair(&self, pair: usize) -> Vec<Pose6> {
        self.preds[pair].iter().flatten().copied().collect()
    }
}

/// Runs every window of `dataset` through the model in inference mode.
pub fn sliding_predictions(model: &IbModel, dataset: &SequenceDataset, clip_len: usize) -> Result<SlidingPredictions> {
    let frames = dataset.frames();
    if clip_len == 0 || frames < clip_len {
        return Err(invalid(format!(
            "sequence {} has {frames} frame pairs, fewer than the clip length {clip_len}",
            dataset.meta.index
        )));
    }
    let windows: Vec<(usize, usize)> = (0..=frames - clip_len).map(|s| (0, s)).collect();
    let d = model.config().latent_dim;
    let noise = vec![0.0; windows.len() * clip_len * 2 * d];
    let clip = ClipBatch::from_windows(
        std::slice::from_ref(dataset),
        &windows,
        clip_len,
        model.config(),
        &noise,
        false,
    )?;
    let out = model.infer(&clip)?;
    let mut preds = vec![vec![None; clip_len]; frames];
    let mut sigma2 = vec![vec![None; clip_len]; frames];
    for (w, &(_, start)) in windows.iter().enumerate() {
        for pos in 0..clip_len {
            let pair = start + pos;
            preds[pair][pos] = Some(Pose6::from_slice(out.preds[pos].row(w)));
            sigma2[pair][pos] = out.std_o[pos]
                .as_ref()
                .map(|s| s.row(w).iter().map(|v| v * v).sum::<f64>() / d as f64);
        }
    }
    Ok(SlidingPredictions { clip_len, preds, sigma2 })
}

/// Average of the predictions after position 0.
///
/// Rotations are averaged componentwise on wrapped Euler angles around the
/// first kept prediction. A single prediction is passed through.
pub fn refine(per_position: &[Pose6]) -> Result<Pose6> {
    match per_position.len() {
        0 => Err(invalid("refine needs at least one prediction")),
        1 => {
            debug!("refine: only one prediction for this pair; passing it through");
            Ok(per_position[0])
        }
        _ => {
            let kept = &per_position[1..];
            let n = kept.len() as f64;
            let reference = kept[0].r;
            let mut t = [0.0; 3];
            let mut r = [0.0; 3];
            for p in kept {
                for i in 0..3 {
                    t[i] += p.t[i] / n;
                    r[i] += wrap_angle(p.r[i] - reference[i]) / n;
                }
            }
            Ok(Pose6::new(t, std::array::from_fn(|i| wrap_angle(reference[i] + r[i]))))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub index: u64,
    pub degradation: Option<String>,
    pub t_rmse: f64,
    pub r_rmse: f64,
    pub sigma2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub clip_len: usize,
    /// Over all refined pairs of all sequences (m).
    pub t_rmse: f64,
    /// Over all refined pairs of all sequences (deg).
    pub r_rmse: f64,
    pub per_position_t_rmse: Vec<f64>,
    pub per_position_r_rmse: Vec<f64>,
    /// Mean `std_o²` over every evaluated step and latent dimension.
    pub sigma2: Option<f64>,
    pub per_position_sigma2: Option<Vec<f64>>,
    pub sequences: Vec<SequenceReport>,
    pub pairs: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sliding-window evaluation over a set of sequences.
pub fn evaluate(model: &IbModel, datasets: &[SequenceDataset], clip_len: usize) -> Result<EvalReport> {
    if datasets.is_empty() {
        return Err(invalid("evaluation needs at least one sequence"));
    }
    let mut refined_all = Vec::new();
    let mut gt_all = Vec::new();
    let mut pos_pred: Vec<Vec<Pose6>> = vec![Vec::new(); clip_len];
    let mut pos_gt: Vec<Vec<Pose6>> = vec![Vec::new(); clip_len];
    let mut pos_sigma: Vec<Vec<f64>> = vec![Vec::new(); clip_len];
    let mut sequences = Vec::with_capacity(datasets.len());
    for ds in datasets {
        let sp = sliding_predictions(model, ds, clip_len)?;
        let gt = ds.poses();
        let mut refined = Vec::with_capacity(sp.pairs());
        let mut seq_sigma = Vec::new();
        for pair in 0..sp.pairs() {
            refined.push(refine(&sp.for_pair(pair))?);
            for pos in 0..clip_len {
                if let Some(p) = sp.preds[pair][pos] {
                    pos_pred[pos].push(p);
                    pos_gt[pos].push(gt[pair]);
                }
                if let Some(s) = sp.sigma2[pair][pos] {
                    pos_sigma[pos].push(s);
                    seq_sigma.push(s);
                }
            }
        }
        let (t, r) = rmse(&refined, gt)?;
        sequences.push(SequenceReport {
            index: ds.meta.index,
            degradation: ds.meta.degradation.clone(),
            t_rmse: t,
            r_rmse: r,
            sigma2: (!seq_sigma.is_empty()).then(|| mean(&seq_sigma)),
        });
        refined_all.extend(refined);
        gt_all.extend_from_slice(gt);
    }
    let (t_rmse, r_rmse) = rmse(&refined_all, &gt_all)?;
    let mut per_position_t_rmse = Vec::with_capacity(clip_len);
    let mut per_position_r_rmse = Vec::with_capacity(clip_len);
    for pos in 0..clip_len {
        let (t, r) = rmse(&pos_pred[pos], &pos_gt[pos])?;
        per_position_t_rmse.push(t);
        per_position_r_rmse.push(r);
    }
    let stochastic = pos_sigma.iter().all(|v| !v.is_empty());
    let all_sigma: Vec<f64> = pos_sigma.iter().flatten().copied().collect();
    Ok(EvalReport {
        clip_len,
        t_rmse,
        r_rmse,
        per_position_t_rmse,
        per_position_r_rmse,
        sigma2: stochastic.then(|| mean(&all_sigma)),
        per_position_sigma2: stochastic.then(|| pos_sigma.iter().map(|v| mean(v)).collect()),
        sequences,
        pairs: gt_all.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub sigma2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub sigma2: f64,
    /// Binned by the geodesic rotation angle of the ground-truth relative pose (rad).
    pub by_turn: Vec<UncertaintyBin>,
    /// Binned by the forward translation of the ground-truth relative pose (m).
    pub by_forward: Vec<UncertaintyBin>,
}

fn bins(samples: &[(f64, f64)], count: usize) -> Vec<UncertaintyBin> {
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / count as f64 } else { 1.0 };
    let mut sums = vec![(0usize, 0.0); count];
    for &(x, s) in samples {
        let b = (((x - lo) / width) as usize).min(count - 1);
        sums[b].0 += 1;
        sums[b].1 += s;
    }
    sums.into_iter()
        .enumerate()
        .map(|(i, (n, s))| UncertaintyBin {
            lo: lo + i as f64 * width,
            hi: lo + (i + 1) as f64 * width,
            count: n,
            sigma2: (n > 0).then(|| s / n as f64),
        })
        .collect()
}

/// Mean `std_o²` overall and against motion magnitude, `bins` equal-width bins each.
pub fn uncertainty(model: &IbModel, datasets: &[SequenceDataset], clip_len: usize, bin_count: usize) -> Result<UncertaintyReport> {
    if !model.config().variant.is_stochastic() {
        return Err(invalid("the deterministic baseline has no latent uncertainty"));
    }
    if bin_count == 0 {
        return Err(invalid("need at least one bin"));
    }
    let mut turn = Vec::new();
    let mut forward = Vec::new();
    for ds in datasets {
        let sp = sliding_predictions(model, ds, clip_len)?;
        for (pair, gt) in ds.poses().iter().enumerate() {
            for s in sp.sigma2[pair].iter().flatten() {
                turn.push((gt.rotation_angle(), *s));
                forward.push((gt.t[0], *s));
            }
        }
    }
    if turn.is_empty() {
        return Err(invalid("no steps to measure"));
    }
    Ok(UncertaintyReport {
        sigma2: turn.iter().map(|s| s.1).sum::<f64>() / turn.len() as f64,
        by_turn: bins(&turn, bin_count),
        by_forward: bins(&forward, bin_count),
    })
}
