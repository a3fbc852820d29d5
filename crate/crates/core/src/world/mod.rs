//! Deterministic synthetic odometry world.
//!
//! A world family is fixed by [`WorldConfig::seed`]: it freezes the sensor
//! model (the nonlinear pose feature map and the mixing matrices). Each
//! sequence index then draws its own trajectory, nuisance code and sensor
//! noise from independent streams, so sequences can be generated in any
//! order or in parallel with identical results.
//!
//! Visual observations mix a nonlinear function of the relative pose with a
//! per-sequence nuisance code that carries no pose information. The inertial
//! channel is synthesized from the same motion with independent noise.

mod degrade;
mod io;
mod sensors;
mod trajectory;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::{Pose6, Trajectory};

pub use degrade::{degrade, DegradeKind, DegradeTarget, DEGRADE_STD};
pub use io::{load_dataset, load_datasets, save_dataset, save_datasets, SCHEMA_VERSION};
pub use sensors::{synthesize_observations, SensorModel};
pub use trajectory::generate_trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Road vehicle: forward motion, yaw turns, little pitch and roll.
    Car,
    /// Aerial vehicle: rotation on all three axes, small translations.
    Mav,
    /// No motion at all.
    Static,
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Car => "car",
            Profile::Mav => "mav",
            Profile::Static => "static",
        })
    }
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "car" => Ok(Profile::Car),
            "mav" => Ok(Profile::Mav),
            "static" => Ok(Profile::Static),
            other => Err(Error::Config(format!("unknown profile `{other}`"))),
        }
    }
}

/// Readings per inertial sample: 3 rotation rates and 3 translation second differences.
pub const IMU_DIM: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub profile: Profile,
    /// Frame pairs per sequence.
    pub frames: usize,
    pub vis_dim: usize,
    pub imu_substeps: usize,
    pub imu_dim: usize,
    pub nuisance_dim: usize,
    /// Mean of every nuisance coordinate; moving it shifts observations only.
    pub nuisance_mean: f64,
    pub nuisance_std: f64,
    /// Gain of the nuisance mixing matrix relative to the pose features.
    pub nuisance_gain: f64,
    pub obs_noise_std: f64,
    pub imu_noise_std: f64,
    /// Width of the hidden layer of the frozen pose feature map.
    pub feature_dim: usize,
    /// World-family seed.
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            profile: Profile::Car,
            frames: 100,
            vis_dim: 24,
            imu_substeps: 10,
            imu_dim: IMU_DIM,
            nuisance_dim: 4,
            nuisance_mean: 0.0,
            nuisance_std: 1.0,
            nuisance_gain: 1.0,
            obs_noise_std: 0.05,
            imu_noise_std: 0.05,
            feature_dim: 16,
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("world.{m}")));
        if self.frames < 2 {
            return fail("frames must be at least 2");
        }
        if self.vis_dim == 0 || self.imu_substeps == 0 || self.nuisance_dim == 0 || self.feature_dim == 0 {
            return fail("all dimensions must be at least 1");
        }
        if self.imu_dim != IMU_DIM {
            return fail("imu_dim must be 6 (3 rotation rates + 3 accelerations)");
        }
        if !(self.obs_noise_std >= 0.0 && self.imu_noise_std >= 0.0 && self.nuisance_std >= 0.0) {
            return fail("noise standard deviations must be non-negative");
        }
        if !self.nuisance_mean.is_finite() || !self.nuisance_gain.is_finite() {
            return fail("nuisance_mean and nuisance_gain must be finite");
        }
        Ok(())
    }

    /// Typical magnitude of each relative-pose component; used to normalize
    /// sensor inputs.
    pub fn pose_scale(&self) -> [f64; 6] {
        match self.profile {
            Profile::Car | Profile::Static => [1.0, 0.05, 0.02, 0.01, 0.01, 0.05],
            Profile::Mav => [0.1, 0.1, 0.1, 0.05, 0.05, 0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub profile: Profile,
    pub seed: u64,
    pub index: u64,
    /// `None` for clean data, otherwise e.g. `noisy-vis`.
    pub degradation: Option<String>,
}

/// One generated sequence: ground truth plus per-frame observations.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    pub trajectory: Trajectory,
    /// `frames × vis_dim`, row-major.
    pub vis_obs: Vec<f64>,
    /// `frames × imu_substeps × imu_dim`, row-major.
    pub imu_obs: Vec<f64>,
    pub nuisance: Vec<f64>,
    pub vis_dim: usize,
    pub imu_substeps: usize,
    pub imu_dim: usize,
    pub meta: SequenceMeta,
}

impl SequenceDataset {
    pub fn frames(&self) -> usize {
        self.trajectory.relatives.len()
    }

    pub fn poses(&self) -> &[Pose6] {
        &self.trajectory.relatives
    }

    pub fn vis_row(&self, t: usize) -> &[f64] {
        &self.vis_obs[t * self.vis_dim..(t + 1) * self.vis_dim]
    }

    /// All inertial readings of frame `t`, `imu_substeps × imu_dim`.
    pub fn imu_frame(&self, t: usize) -> &[f64] {
        let n = self.imu_substeps * self.imu_dim;
        &self.imu_obs[t * n..(t + 1) * n]
    }
}

/// Generates sequence `index` of the world family.
pub fn generate_sequence(config: &WorldConfig, model: &SensorModel, index: u64) -> Result<SequenceDataset> {
    let trajectory = generate_trajectory(config, index);
    synthesize_observations(trajectory, config, model, index)
}

/// Generates the sequences `indices` of one world family.
pub fn generate_sequences(
    config: &WorldConfig,
    indices: impl IntoIterator<Item = u64>,
) -> Result<Vec<SequenceDataset>> {
    config.validate()?;
    let model = SensorModel::new(config);
    indices
        .into_iter()
        .map(|i| generate_sequence(config, &model, i))
        .collect()
}
