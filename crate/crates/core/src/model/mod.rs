//! Recurrent odometry model with a stochastic information bottleneck.
//!
//! Two transition paths run side by side. The observation path encodes sensor
//! readings into a deterministic state `h_o` and a Gaussian latent `s_o`; the
//! pose path does the same from the (tiled) relative pose, giving `h_p` and
//! `s_p`. The pose regressor reads only `s_o`. During training the pose path
//! is teacher-forced with ground truth and the KL divergence from the
//! observation belief to the pose belief is the bottleneck penalty; during
//! inference the pose path consumes the model's own prediction for the step.

mod clip;
mod config;
mod layers;
mod params;

pub use clip::{sample_noise, ClipBatch, Path};
pub use config::{ModelConfig, SensorSet, Variant};
pub use params::ParamSet;

use crate::autodiff::{gaussian_sample, kl_diag_gauss_rows, Graph, Tensor, TensorError, Var};
use crate::error::{invalid, Error, Result};
use layers::{gaussian_head, gru, linear, softplus_std};
use params::Architecture;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Pose path reads ground truth.
    Train,
    /// Pose path reads the model's own prediction; ground truth is never touched.
    Infer,
}

/// Graph handles produced at one time step of a rollout.
#[derive(Debug, Clone, Copy)]
pub struct StepVars {
    pub h_o: Var,
    pub h_p: Option<Var>,
    pub mu_o: Option<Var>,
    pub std_o: Option<Var>,
    pub s_o: Option<Var>,
    pub mu_p: Option<Var>,
    pub std_p: Option<Var>,
    pub s_p: Option<Var>,
    /// Predicted relative pose, `[B, 6]`.
    pub pred: Var,
    /// Per-row KL from the observation belief to the pose belief, `[B]`.
    pub kl: Option<Var>,
}

#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub total: Var,
    pub pose: Var,
    pub kl: Var,
}

/// Plain values of an inference rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    /// One `[B, 6]` prediction per step.
    pub preds: Vec<Tensor>,
    /// Observation-path std per step; absent for the deterministic baseline.
    pub std_o: Vec<Option<Tensor>>,
    /// Observation-path sample (or state, for the baseline) fed to the regressor.
    pub code: Vec<Tensor>,
}

/// Which previous samples form the recurrent context of a stochastic-only path.
///
/// The `-s` variant carries only the path's own sample (twice, to fill the
/// `2d` state); the `-d` variant carries both.
pub fn transition_context(variant: Variant, path: Path) -> Option<[Path; 2]> {
    match variant {
        Variant::StochasticOnlyS => Some([path, path]),
        Variant::StochasticOnlyD => Some([Path::Obs, Path::Pose]),
        Variant::Full | Variant::DeterministicBaseline => None,
    }
}

/// Repeats each row of a `[B, 6]` pose `times` times along the feature axis.
pub fn tile_pose(g: &mut Graph, pose: Var, times: usize) -> Result<Var> {
    let parts = vec![pose; times];
    Ok(g.concat(&parts, 1)?)
}

fn at_step(step: usize) -> impl Fn(TensorError) -> Error {
    move |e| match e {
        TensorError::NonFinite { .. } => Error::NonFiniteLoss { step, source: e },
        other => Error::Tensor(other),
    }
}

struct Carry {
    h_o: Var,
    h_p: Option<Var>,
    s_o: Var,
    s_p: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IbModel {
    config: ModelConfig,
    arch: Architecture,
    params: ParamSet,
}

impl IbModel {
    /// Freshly initialized model; the same config and seed give identical parameters.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let (arch, params) = params::build(&config, seed)?;
        Ok(IbModel { config, arch, params })
    }

    /// Model with given parameter arrays, checked by name and shape against the config.
    pub fn from_parts(config: ModelConfig, names: &[String], tensors: Vec<Tensor>) -> Result<Self> {
        let mut model = IbModel::new(config, 0)?;
        if names != model.params.names() {
            return Err(Error::Format(format!(
                "parameter names do not match the model layout: expected {:?}, got {:?}",
                model.params.names(),
                names
            )));
        }
        model.params.assign(tensors)?;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Fused observation feature for step `t`, `[B, feature_len]`.
    pub fn encode(&self, g: &mut Graph, p: &[Var], clip: &ClipBatch, t: usize) -> Result<Var> {
        let mut parts = Vec::with_capacity(2);
        if let Some((l0, l1)) = self.arch.vis {
            let x = clip
                .vis(t)
                .ok_or_else(|| invalid("model uses the visual sensor but the clip has none"))?;
            let x = g.constant(x.clone());
            let hdn = linear(g, p, l0, x)?;
            let hdn = g.relu(hdn)?;
            parts.push(linear(g, p, l1, hdn)?);
        }
        if let Some(cell) = self.arch.imu {
            let readings = clip
                .imu(t)
                .ok_or_else(|| invalid("model uses the inertial sensor but the clip has none"))?;
            let mut h = g.constant(Tensor::zeros(&[clip.batch(), cell.hidden]));
            for r in readings {
                let x = g.constant(r.clone());
                h = gru(g, p, cell, x, h)?;
            }
            parts.push(h);
        }
        Ok(g.concat(&parts, 1)?)
    }

    /// Recurrent context fed as the previous hidden state of a path.
    fn context(&self, g: &mut Graph, path: Path, carry: &Carry) -> Result<Var> {
        match transition_context(self.config.variant, path) {
            Some(pair) => {
                let pick = |q: Path| if q == Path::Obs { carry.s_o } else { carry.s_p };
                Ok(g.concat(&[pick(pair[0]), pick(pair[1])], 1)?)
            }
            None => Ok(match path {
                Path::Obs => carry.h_o,
                Path::Pose => carry.h_p.expect("pose state exists for the full variant"),
            }),
        }
    }

    /// Observation-path state update from the fused feature.
    fn obs_transition(&self, g: &mut Graph, p: &[Var], feat: Var, carry: &Carry) -> Result<Var> {
        let input = match self.config.variant {
            Variant::Full => g.concat(&[feat, carry.s_o, carry.s_p], 1)?,
            _ => feat,
        };
        let x = linear(g, p, self.arch.obs_in, input)?;
        let x = g.relu(x)?;
        let prev = self.context(g, Path::Obs, carry)?;
        Ok(gru(g, p, self.arch.obs_cell, x, prev)?)
    }

    /// Pose-path state update from a `[B, 6]` relative pose.
    fn pose_transition(&self, g: &mut Graph, p: &[Var], pose: Var, carry: &Carry) -> Result<Var> {
        let (inp, cell) = match (self.arch.pose_in, self.arch.pose_cell) {
            (Some(i), Some(c)) => (i, c),
            _ => return Err(invalid("this variant has no pose path")),
        };
        let tiled = tile_pose(g, pose, self.config.pose_tile)?;
        let input = match self.config.variant {
            Variant::Full => g.concat(&[tiled, carry.s_o, carry.s_p], 1)?,
            _ => tiled,
        };
        let x = linear(g, p, inp, input)?;
        let x = g.relu(x)?;
        let prev = self.context(g, Path::Pose, carry)?;
        Ok(gru(g, p, cell, x, prev)?)
    }

    /// Mean and std of a path's latent given its new state.
    fn stochastic_head(&self, g: &mut Graph, p: &[Var], path: Path, h: Var) -> Result<(Var, Var)> {
        let min_std = self.config.min_std;
        let head = match path {
            Path::Obs => self.arch.obs_head,
            Path::Pose => self.arch.pose_head,
        };
        match head {
            Some(head) => Ok(gaussian_head(g, p, head, h, min_std)?),
            None => {
                // stochastic-only: the 2d-wide state splits into mean and std residue
                let d = self.config.latent_dim;
                let mu = g.slice(h, 1, 0, d)?;
                let raw = g.slice(h, 1, d, d)?;
                Ok((mu, softplus_std(g, raw, min_std)?))
            }
        }
    }

    /// Relative pose `[B, 6]` from the regressor input.
    pub fn regress_pose(&self, g: &mut Graph, p: &[Var], code: Var) -> Result<Var> {
        let mut x = code;
        for l in self.arch.reg {
            x = linear(g, p, l, x)?;
            x = g.relu(x)?;
        }
        let t = linear(g, p, self.arch.reg_t, x)?;
        let r = linear(g, p, self.arch.reg_r, x)?;
        Ok(g.concat(&[t, r], 1)?)
    }

    /// Runs the model over every step of `clip`.
    ///
    /// `p` must come from [`ParamSet::bind`] or [`ParamSet::bind_frozen`] on this
    /// model's parameters (or arrays of identical shapes).
    pub fn rollout(&self, g: &mut Graph, p: &[Var], clip: &ClipBatch, mode: Mode) -> Result<Vec<StepVars>> {
        if p.len() != self.params.len() {
            return Err(invalid(format!(
                "expected {} bound parameters, got {}",
                self.params.len(),
                p.len()
            )));
        }
        if mode == Mode::Train && self.config.variant.is_stochastic() && !clip.has_poses() {
            return Err(invalid("training rollout needs ground-truth poses"));
        }
        let b = clip.batch();
        let d = self.config.latent_dim;
        let k = self.config.deterministic_dim;
        let zeros_d = g.constant(Tensor::zeros(&[b, d]));
        let zeros_k = g.constant(Tensor::zeros(&[b, k]));
        let mut carry = Carry {
            h_o: zeros_k,
            h_p: (self.config.variant == Variant::Full).then_some(zeros_k),
            s_o: zeros_d,
            s_p: zeros_d,
        };
        let mut steps = Vec::with_capacity(clip.len());
        for t in 0..clip.len() {
            let step = self.step(g, p, clip, t, mode, &carry).map_err(|e| match e {
                Error::Tensor(te) => at_step(t)(te),
                other => other,
            })?;
            carry = Carry {
                h_o: step.h_o,
                h_p: step.h_p.or(carry.h_p),
                s_o: step.s_o.unwrap_or(carry.s_o),
                s_p: step.s_p.unwrap_or(carry.s_p),
            };
            steps.push(step);
        }
        Ok(steps)
    }

    fn step(&self, g: &mut Graph, p: &[Var], clip: &ClipBatch, t: usize, mode: Mode, carry: &Carry) -> Result<StepVars> {
        let feat = self.encode(g, p, clip, t)?;
        let h_o = self.obs_transition(g, p, feat, carry)?;
        if !self.config.variant.is_stochastic() {
            let pred = self.regress_pose(g, p, h_o)?;
            return Ok(StepVars {
                h_o,
                h_p: None,
                mu_o: None,
                std_o: None,
                s_o: None,
                mu_p: None,
                std_p: None,
                s_p: None,
                pred,
                kl: None,
            });
        }
        let (mu_o, std_o) = self.stochastic_head(g, p, Path::Obs, h_o)?;
        let s_o = gaussian_sample(g, mu_o, std_o, clip.noise(t, Path::Obs))?;
        let pred = self.regress_pose(g, p, s_o)?;
        let pose_in = match mode {
            Mode::Train => {
                let gt = clip.pose(t).ok_or_else(|| invalid("training rollout needs ground-truth poses"))?;
                g.constant(gt.clone())
            }
            Mode::Infer => pred,
        };
        let h_p = self.pose_transition(g, p, pose_in, carry)?;
        let (mu_p, std_p) = self.stochastic_head(g, p, Path::Pose, h_p)?;
        let s_p = gaussian_sample(g, mu_p, std_p, clip.noise(t, Path::Pose))?;
        let kl = kl_diag_gauss_rows(g, mu_o, std_o, mu_p, std_p)?;
        Ok(StepVars {
            h_o,
            h_p: Some(h_p),
            mu_o: Some(mu_o),
            std_o: Some(std_o),
            s_o: Some(s_o),
            mu_p: Some(mu_p),
            std_p: Some(std_p),
            s_p: Some(s_p),
            pred,
            kl: Some(kl),
        })
    }

    /// Training loss of a clip batch: the batch mean of
    /// `Σ_t α‖Δt‖₂ + β‖Δr‖₂` plus `γ` times the batch mean of `Σ_t KL_t`.
    pub fn clip_loss(&self, g: &mut Graph, p: &[Var], clip: &ClipBatch) -> Result<LossVars> {
        if !clip.has_poses() {
            return Err(invalid("loss needs ground-truth poses"));
        }
        let steps = self.rollout(g, p, clip, Mode::Train)?;
        let cfg = &self.config;
        let mut pose_sum: Option<Var> = None;
        let mut kl_sum: Option<Var> = None;
        for (t, s) in steps.iter().enumerate() {
            let res: std::result::Result<(Var, Option<Var>), TensorError> = (|| {
                let gt = g.constant(clip.pose(t).expect("checked above").clone());
                let diff = g.sub(s.pred, gt)?;
                let dt = g.slice(diff, 1, 0, 3)?;
                let dr = g.slice(diff, 1, 3, 3)?;
                let nt = g.l2_norm(dt, 1)?;
                let nr = g.l2_norm(dr, 1)?;
                let nt = g.scale(nt, cfg.alpha)?;
                let nr = g.scale(nr, cfg.beta)?;
                Ok((g.add(nt, nr)?, s.kl))
            })();
            let (term, kl) = res.map_err(at_step(t))?;
            let acc = |g: &mut Graph, a: Option<Var>, x: Var| match a {
                Some(a) => g.add(a, x).map_err(at_step(t)),
                None => Ok(x),
            };
            pose_sum = Some(acc(g, pose_sum, term)?);
            if let Some(kl) = kl {
                kl_sum = Some(acc(g, kl_sum, kl)?);
            }
        }
        let last = steps.len().saturating_sub(1);
        let finish = |g: &mut Graph| -> std::result::Result<LossVars, TensorError> {
            let pose = g.mean(pose_sum.expect("clip has at least one step"), None)?;
            let kl = match kl_sum {
                Some(k) => g.mean(k, None)?,
                None => g.constant(Tensor::scalar(0.0)?),
            };
            let total = if cfg.gamma > 0.0 && kl_sum.is_some() {
                let weighted = g.scale(kl, cfg.gamma)?;
                g.add(pose, weighted)?
            } else {
                pose
            };
            Ok(LossVars { total, pose, kl })
        };
        finish(g).map_err(at_step(last))
    }

    /// Inference rollout on frozen parameters.
    pub fn infer(&self, clip: &ClipBatch) -> Result<Inference> {
        let mut g = Graph::new();
        let p = self.params.bind_frozen(&mut g);
        let steps = self.rollout(&mut g, &p, clip, Mode::Infer)?;
        Ok(Inference {
            preds: steps.iter().map(|s| g.value(s.pred).clone()).collect(),
            std_o: steps.iter().map(|s| s.std_o.map(|v| g.value(v).clone())).collect(),
            code: steps
                .iter()
                .map(|s| g.value(s.s_o.unwrap_or(s.h_o)).clone())
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use crate::world::{generate_sequences, SequenceDataset, WorldConfig};

    fn small(variant: Variant, sensors: SensorSet) -> ModelConfig {
        ModelConfig {
            latent_dim: 3,
            deterministic_dim: 4,
            hidden_dim: 5,
            sensors,
            variant,
            gamma: 0.5,
            beta: 1.0,
            vis_dim: 6,
            imu_substeps: 2,
            imu_dim: 6,
            ..Default::default()
        }
    }

    fn data() -> Vec<SequenceDataset> {
        let world = WorldConfig {
            frames: 6,
            vis_dim: 6,
            imu_substeps: 2,
            seed: 2,
            ..Default::default()
        };
        generate_sequences(&world, 0..2).unwrap()
    }

    fn clip(config: &ModelConfig, seqs: &[SequenceDataset], len: usize) -> ClipBatch {
        let mut rng = crate::rng::stream(1, 0, crate::rng::Purpose::Training);
        let noise = sample_noise(&mut rng, 2, len, config.latent_dim);
        ClipBatch::from_windows(seqs, &[(0, 0), (1, 2)], len, config, &noise, true).unwrap()
    }

    fn zeroed(model: &IbModel) -> IbModel {
        let mut m = model.clone();
        for t in m.params_mut().tensors_mut() {
            *t = Tensor::zeros(t.shape());
        }
        m
    }

    fn carry(g: &mut Graph, b: usize, config: &ModelConfig, s_p: Option<Tensor>) -> Carry {
        let zk = g.constant(Tensor::zeros(&[b, config.deterministic_dim]));
        let zd = g.constant(Tensor::zeros(&[b, config.latent_dim]));
        let s_p = s_p.map(|t| g.constant(t)).unwrap_or(zd);
        Carry {
            h_o: zk,
            h_p: Some(zk),
            s_o: zd,
            s_p,
        }
    }

    #[test]
    fn zero_weights_closed_forms() {
        let seqs = data();
        let config = small(Variant::Full, SensorSet::VisImu);
        let model = zeroed(&IbModel::new(config.clone(), 0).unwrap());
        let c = clip(&config, &seqs, 1);
        let mut g = Graph::new();
        let p = model.params().bind_frozen(&mut g);
        let feat = model.encode(&mut g, &p, &c, 0).unwrap();
        assert_eq!(g.shape(feat), &[2, 2 * config.hidden_dim]);
        assert!(g.value(feat).data().iter().all(|&v| v == 0.0));

        // r = z = ½ and n = tanh(0) = 0, so h' = ½·h_prev = 0
        let cr = carry(&mut g, 2, &config, None);
        let h = model.obs_transition(&mut g, &p, feat, &cr).unwrap();
        assert!(g.value(h).data().iter().all(|&v| v == 0.0));

        let (mu, std) = model.stochastic_head(&mut g, &p, Path::Obs, h).unwrap();
        assert!(g.value(mu).data().iter().all(|&v| v == 0.0));
        let expected = 0.1 + std::f64::consts::LN_2;
        assert!(g.value(std).data().iter().all(|&v| (v - expected).abs() < 1e-15));
        assert!((expected - 0.7931).abs() < 1e-4);

        let pose = model.regress_pose(&mut g, &p, mu).unwrap();
        assert_eq!(g.shape(pose), &[2, 6]);
        assert!(g.value(pose).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn transitions_are_sensitive_to_their_inputs() {
        let seqs = data();
        let config = small(Variant::Full, SensorSet::Vis);
        let model = IbModel::new(config.clone(), 6).unwrap();
        let c = clip(&config, &seqs, 1);
        let mut g = Graph::new();
        let p = model.params().bind_frozen(&mut g);
        let feat = model.encode(&mut g, &p, &c, 0).unwrap();
        let a = carry(&mut g, 2, &config, None);
        let b = carry(&mut g, 2, &config, Some(Tensor::filled(&[2, 3], 0.5)));
        let ha = model.obs_transition(&mut g, &p, feat, &a).unwrap();
        let hb = model.obs_transition(&mut g, &p, feat, &b).unwrap();
        assert_ne!(g.value(ha), g.value(hb));

        let zero = g.constant(Tensor::zeros(&[2, 6]));
        let ident = g.constant(Tensor::matrix(2, 6, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap());
        let pz = model.pose_transition(&mut g, &p, zero, &a).unwrap();
        let pi = model.pose_transition(&mut g, &p, ident, &a).unwrap();
        assert_ne!(g.value(pz), g.value(pi));
    }

    #[test]
    fn identical_beliefs_have_zero_kl() {
        let seqs = data();
        let config = small(Variant::Full, SensorSet::Vis);
        let random = IbModel::new(config.clone(), 8).unwrap();
        let mut model = zeroed(&random);
        // both cells stay at zero; give both heads the same random weights
        let names = model.params().names().to_vec();
        for (i, name) in names.iter().enumerate() {
            if let Some(rest) = name.strip_prefix("pose.head.") {
                let src = random.params().get(&format!("obs.head.{rest}")).unwrap().clone();
                model.params_mut().tensors_mut()[i] = src.clone();
                let j = names.iter().position(|n| n == &format!("obs.head.{rest}")).unwrap();
                model.params_mut().tensors_mut()[j] = src;
            }
        }
        let c = clip(&config, &seqs, 1);
        let mut g = Graph::new();
        let p = model.params().bind_frozen(&mut g);
        let steps = model.rollout(&mut g, &p, &c, Mode::Train).unwrap();
        assert!(g.value(steps[0].kl.unwrap()).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rollout_ignores_gamma_and_modes_diverge() {
        let seqs = data();
        let config = small(Variant::Full, SensorSet::VisImu);
        let c = clip(&config, &seqs, 3);
        let a = IbModel::new(ModelConfig { gamma: 0.0, ..config.clone() }, 2).unwrap();
        let b = IbModel::new(ModelConfig { gamma: 7.0, ..config.clone() }, 2).unwrap();
        assert_eq!(a.infer(&c).unwrap(), b.infer(&c).unwrap());

        let preds = |mode: Mode| {
            let mut g = Graph::new();
            let p = a.params().bind_frozen(&mut g);
            let steps = a.rollout(&mut g, &p, &c, mode).unwrap();
            steps.iter().map(|s| g.value(s.pred).clone()).collect::<Vec<_>>()
        };
        let (train, infer) = (preds(Mode::Train), preds(Mode::Infer));
        assert_eq!(train[0], infer[0]);
        assert_ne!(train[2], infer[2]);
    }

    #[test]
    fn perfect_predictions_give_zero_loss_and_loss_is_bitwise_deterministic() {
        let world = WorldConfig {
            profile: crate::world::Profile::Static,
            frames: 6,
            vis_dim: 6,
            imu_substeps: 2,
            ..Default::default()
        };
        let seqs = generate_sequences(&world, 0..2).unwrap();
        let config = ModelConfig {
            gamma: 0.0,
            ..small(Variant::Full, SensorSet::VisImu)
        };
        let model = zeroed(&IbModel::new(config.clone(), 1).unwrap());
        let c = clip(&config, &seqs, 3);
        let mut g = Graph::new();
        let p = model.params().bind(&mut g);
        let l = model.clip_loss(&mut g, &p, &c).unwrap();
        assert_eq!(g.value(l.total).data()[0], 0.0);

        let random = IbModel::new(config.clone(), 1).unwrap();
        let value = || {
            let mut g = Graph::new();
            let p = random.params().bind(&mut g);
            let l = random.clip_loss(&mut g, &p, &c).unwrap();
            g.value(l.total).data()[0].to_bits()
        };
        assert_eq!(value(), value());
    }

    #[test]
    fn kl_is_non_negative_at_every_step() {
        let seqs = data();
        for seed in 0..5 {
            let config = small(Variant::StochasticOnlyD, SensorSet::VisImu);
            let model = IbModel::new(config.clone(), seed).unwrap();
            let mut g = Graph::new();
            let p = model.params().bind_frozen(&mut g);
            for s in model.rollout(&mut g, &p, &clip(&config, &seqs, 4), Mode::Train).unwrap() {
                assert!(g.value(s.kl.unwrap()).data().iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn tiling_repeats_the_pose() {
        let mut g = Graph::new();
        let pose = g.constant(Tensor::matrix(1, 6, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let tiled = tile_pose(&mut g, pose, 8).unwrap();
        let v = g.value(tiled);
        assert_eq!(v.shape(), &[1, 48]);
        for (i, x) in v.data().iter().enumerate() {
            assert_eq!(*x, (i % 6 + 1) as f64);
        }
    }

    #[test]
    fn context_selection() {
        assert_eq!(transition_context(Variant::StochasticOnlyS, Path::Obs), Some([Path::Obs, Path::Obs]));
        assert_eq!(transition_context(Variant::StochasticOnlyS, Path::Pose), Some([Path::Pose, Path::Pose]));
        assert_eq!(transition_context(Variant::StochasticOnlyD, Path::Obs), Some([Path::Obs, Path::Pose]));
        assert_eq!(transition_context(Variant::Full, Path::Obs), None);
    }

    #[test]
    fn zero_gamma_loss_is_pose_term_and_gamma_adds_kl() {
        let seqs = data();
        let base = small(Variant::Full, SensorSet::VisImu);
        let c = clip(&base, &seqs, 3);
        let eval = |gamma: f64| {
            let model = IbModel::new(ModelConfig { gamma, ..base.clone() }, 9).unwrap();
            let mut g = Graph::new();
            let p = model.params().bind(&mut g);
            let l = model.clip_loss(&mut g, &p, &c).unwrap();
            (g.value(l.total).data()[0], g.value(l.pose).data()[0], g.value(l.kl).data()[0])
        };
        let (t0, p0, k0) = eval(0.0);
        assert_eq!(t0, p0);
        assert!(k0 > 0.0);
        let (t1, p1, k1) = eval(1.0);
        assert_eq!(p1, p0);
        assert_eq!(k1, k0);
        assert!((t1 - (p0 + k0)).abs() < 1e-12);
    }

    #[test]
    fn std_is_floored_everywhere() {
        let seqs = data();
        for variant in [Variant::Full, Variant::StochasticOnlyS, Variant::StochasticOnlyD] {
            let config = small(variant, SensorSet::VisImu);
            let model = IbModel::new(config.clone(), 1).unwrap();
            let out = model.infer(&clip(&config, &seqs, 3)).unwrap();
            for s in out.std_o {
                assert!(s.unwrap().data().iter().all(|&v| v >= config.min_std));
            }
        }
    }

    #[test]
    fn inference_never_reads_ground_truth() {
        let seqs = data();
        let config = small(Variant::Full, SensorSet::VisImu);
        let model = IbModel::new(config.clone(), 3).unwrap();
        let c = clip(&config, &seqs, 4);
        let with = model.infer(&c).unwrap();
        let without = model.infer(&c.without_poses()).unwrap();
        assert_eq!(with, without);
        let mut g = Graph::new();
        let p = model.params().bind_frozen(&mut g);
        assert!(model.rollout(&mut g, &p, &c.without_poses(), Mode::Train).is_err());
    }

    #[test]
    fn teacher_forced_pose_path_ignores_the_regressor() {
        let seqs = data();
        let config = small(Variant::Full, SensorSet::VisImu);
        let model = IbModel::new(config.clone(), 3).unwrap();
        let mut bumped = model.clone();
        let names = bumped.params().names().to_vec();
        for (name, t) in names.iter().zip(bumped.params_mut().tensors_mut()) {
            if name.starts_with("reg.") {
                *t = t.map(|v| v + 0.3);
            }
        }
        let c = clip(&config, &seqs, 3);
        let h_p = |m: &IbModel, mode: Mode| {
            let mut g = Graph::new();
            let p = m.params().bind_frozen(&mut g);
            let steps = m.rollout(&mut g, &p, &c, mode).unwrap();
            steps.iter().map(|s| g.value(s.h_p.unwrap()).clone()).collect::<Vec<_>>()
        };
        assert_eq!(h_p(&model, Mode::Train), h_p(&bumped, Mode::Train));
        assert_ne!(h_p(&model, Mode::Infer), h_p(&bumped, Mode::Infer));
    }

    #[test]
    fn loss_gradients_check_for_every_variant() {
        let seqs = data();
        for variant in Variant::ALL {
            for sensors in [SensorSet::Vis, SensorSet::VisImu] {
                let config = small(variant, sensors);
                let model = IbModel::new(config.clone(), 4).unwrap();
                let c = clip(&config, &seqs, 2);
                // zero biases can put a ReLU input exactly on its kink
                let mut rng = crate::rng::stream(5, 0, crate::rng::Purpose::Init);
                let jittered: Vec<Tensor> = model
                    .params()
                    .tensors()
                    .iter()
                    .map(|t| t.map(|v| v + 0.1 * crate::rng::normal(&mut rng)))
                    .collect();
                let report = grad_check(
                    |g: &mut Graph, v: &[Var]| -> Result<Var> { Ok(model.clip_loss(g, v, &c)?.total) },
                    &jittered,
                    1e-5,
                    1e-4,
                )
                .unwrap();
                assert!(report.passed(), "{variant} {sensors}: {report:?}");
            }
        }
    }

    #[test]
    fn deterministic_baseline_has_no_kl() {
        let seqs = data();
        let config = small(Variant::DeterministicBaseline, SensorSet::Imu);
        let model = IbModel::new(config.clone(), 4).unwrap();
        let c = clip(&config, &seqs, 2);
        let mut g = Graph::new();
        let p = model.params().bind(&mut g);
        let l = model.clip_loss(&mut g, &p, &c).unwrap();
        assert_eq!(g.value(l.kl).data()[0], 0.0);
        assert_eq!(g.value(l.total).data(), g.value(l.pose).data());
    }

    #[test]
    fn from_parts_rejects_foreign_layouts() {
        let a = IbModel::new(small(Variant::Full, SensorSet::Vis), 0).unwrap();
        let b = IbModel::new(small(Variant::DeterministicBaseline, SensorSet::Vis), 0).unwrap();
        let err = IbModel::from_parts(a.config().clone(), b.params().names(), b.params().tensors().to_vec());
        assert!(err.is_err());
        let ok = IbModel::from_parts(a.config().clone(), a.params().names(), a.params().tensors().to_vec()).unwrap();
        assert_eq!(ok, a);
    }
}
