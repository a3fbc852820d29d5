use rand::Rng;

use super::config::{ModelConfig, Variant};
use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Named, ordered parameter arrays of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Replaces every tensor, keeping names; shapes must match.
    pub fn assign(&mut self, tensors: Vec<Tensor>) -> Result<()> {
        if tensors.len() != self.tensors.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} parameter arrays, got {}",
                self.tensors.len(),
                tensors.len()
            )));
        }
        for ((name, old), new) in self.names.iter().zip(&self.tensors).zip(&tensors) {
            if old.shape() != new.shape() {
                return Err(Error::InvalidInput(format!(
                    "parameter `{name}` has shape {:?}, got {:?}",
                    old.shape(),
                    new.shape()
                )));
            }
        }
        self.tensors = tensors;
        Ok(())
    }

    /// Registers every array as a trainable leaf.
    pub fn bind(&self, g: &mut Graph) -> Vec<Var> {
        self.tensors.iter().map(|t| g.param(t.clone())).collect()
    }

    /// Registers every array as a constant; no gradients are tracked.
    pub fn bind_frozen(&self, g: &mut Graph) -> Vec<Var> {
        self.tensors.iter().map(|t| g.constant(t.clone())).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Linear {
    pub w: usize,
    pub b: usize,
}

/// Gated recurrent unit; gate order in the stacked weights is `[r, z, n]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Gru {
    pub wx: usize,
    pub wh: usize,
    pub bx: usize,
    pub bh: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Head {
    pub mu: Linear,
    pub std: Linear,
}

/// Index layout of every layer within a [`ParamSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Architecture {
    pub vis: Option<(Linear, Linear)>,
    pub imu: Option<Gru>,
    pub obs_in: Linear,
    pub obs_cell: Gru,
    pub obs_head: Option<Head>,
    pub pose_in: Option<Linear>,
    pub pose_cell: Option<Gru>,
    pub pose_head: Option<Head>,
    pub reg: [Linear; 2],
    pub reg_t: Linear,
    pub reg_r: Linear,
}

struct Builder {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    rng: rand_chacha::ChaCha20Rng,
}

impl Builder {
    fn glorot(&mut self, name: &str, rows: usize, cols: usize) -> usize {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| self.rng.random_range(-limit..limit))
            .collect();
        self.push(name, Tensor::from_parts(vec![rows, cols], data))
    }

    fn zeros(&mut self, name: &str, n: usize) -> usize {
        self.push(name, Tensor::zeros(&[n]))
    }

    fn push(&mut self, name: &str, t: Tensor) -> usize {
        self.names.push(name.to_string());
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    fn linear(&mut self, name: &str, input: usize, output: usize) -> Linear {
        Linear {
            w: self.glorot(&format!("{name}.w"), input, output),
            b: self.zeros(&format!("{name}.b"), output),
        }
    }

    fn gru(&mut self, name: &str, input: usize, hidden: usize) -> Gru {
        Gru {
            wx: self.glorot(&format!("{name}.wx"), input, 3 * hidden),
            wh: self.glorot(&format!("{name}.wh"), hidden, 3 * hidden),
            bx: self.zeros(&format!("{name}.bx"), 3 * hidden),
            bh: self.zeros(&format!("{name}.bh"), 3 * hidden),
            hidden,
        }
    }

    fn head(&mut self, name: &str, input: usize, output: usize) -> Head {
        Head {
            mu: self.linear(&format!("{name}.mu"), input, output),
            std: self.linear(&format!("{name}.std"), input, output),
        }
    }
}

/// Builds the layer layout and freshly initialized parameters.
///
/// Weights are Glorot-uniform, biases zero. The same config and seed give
/// bit-identical parameters.
pub(crate) fn build(config: &ModelConfig, seed: u64) -> Result<(Architecture, ParamSet)> {
    config.validate()?;
    let mut b = Builder {
        names: Vec::new(),
        tensors: Vec::new(),
        rng: stream(seed, 0, Purpose::Init),
    };
    let h = config.hidden_dim;
    let d = config.latent_dim;
    let k = config.deterministic_dim;

    let vis = config
        .sensors
        .uses_vis()
        .then(|| (b.linear("enc.vis.0", config.vis_dim, h), b.linear("enc.vis.1", h, h)));
    let imu = config
        .sensors
        .uses_imu()
        .then(|| b.gru("enc.imu", config.imu_dim, h));
    let feat = config.feature_len();

    let (obs_in, obs_cell, obs_head, pose_in, pose_cell, pose_head, reg_in) = match config.variant {
        Variant::Full => {
            let pose_len = 6 * config.pose_tile;
            (
                b.linear("obs.in", feat + 2 * d, h),
                b.gru("obs.cell", h, k),
                Some(b.head("obs.head", k, d)),
                Some(b.linear("pose.in", pose_len + 2 * d, h)),
                Some(b.gru("pose.cell", h, k)),
                Some(b.head("pose.head", k, d)),
                d,
            )
        }
        Variant::StochasticOnlyS | Variant::StochasticOnlyD => {
            let pose_len = 6 * config.pose_tile;
            (
                b.linear("obs.in", feat, h),
                b.gru("obs.cell", h, 2 * d),
                None,
                Some(b.linear("pose.in", pose_len, h)),
                Some(b.gru("pose.cell", h, 2 * d)),
                None,
                d,
            )
        }
        Variant::DeterministicBaseline => (
            b.linear("obs.in", feat, h),
            b.gru("obs.cell", h, k),
            None,
            None,
            None,
            None,
            k,
        ),
    };
    let reg = [b.linear("reg.0", reg_in, h), b.linear("reg.1", h, h)];
    let reg_t = b.linear("reg.t", h, 3);
    let reg_r = b.linear("reg.r", h, 3);

    let arch = Architecture {
        vis,
        imu,
        obs_in,
        obs_cell,
        obs_head,
        pose_in,
        pose_cell,
        pose_head,
        reg,
        reg_t,
        reg_r,
    };
    Ok((
        arch,
        ParamSet {
            names: b.names,
            tensors: b.tensors,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::SensorSet;

    #[test]
    fn init_is_seeded_and_biases_are_zero() {
        let config = ModelConfig::default();
        let (_, a) = build(&config, 4).unwrap();
        let (_, b) = build(&config, 4).unwrap();
        let (_, c) = build(&config, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for (name, t) in a.names().iter().zip(a.tensors()) {
            if name.ends_with(".b") || name.ends_with(".bx") || name.ends_with(".bh") {
                assert!(t.data().iter().all(|&v| v == 0.0), "{name}");
            } else {
                let limit = (6.0 / (t.shape()[0] + t.shape()[1]) as f64).sqrt();
                assert!(t.data().iter().all(|v| v.abs() <= limit), "{name}");
            }
        }
    }

    #[test]
    fn sensor_set_controls_encoders() {
        let config = ModelConfig {
            sensors: SensorSet::Vis,
            ..Default::default()
        };
        let (arch, params) = build(&config, 0).unwrap();
        assert!(arch.imu.is_none());
        assert!(params.get("enc.imu.wx").is_none());
        assert_eq!(params.get("obs.in.w").unwrap().shape(), &[64 + 64, 64]);
    }

    #[test]
    fn assign_rejects_wrong_shapes() {
        let (_, mut params) = build(&ModelConfig::default(), 0).unwrap();
        let mut t = params.tensors().to_vec();
        t[0] = Tensor::zeros(&[1]);
        assert!(params.assign(t).is_err());
    }
}
