use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SensorSet {
    #[serde(rename = "vis")]
    Vis,
    #[serde(rename = "imu")]
    Imu,
    #[serde(rename = "vis+imu")]
    VisImu,
}

impl SensorSet {
    pub fn uses_vis(self) -> bool {
        matches!(self, SensorSet::Vis | SensorSet::VisImu)
    }

    pub fn uses_imu(self) -> bool {
        matches!(self, SensorSet::Imu | SensorSet::VisImu)
    }
}

impl fmt::Display for SensorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SensorSet::Vis => "vis",
            SensorSet::Imu => "imu",
            SensorSet::VisImu => "vis+imu",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Deterministic and stochastic states on both transition paths.
    Full,
    /// No deterministic state; each path carries only its own previous sample.
    StochasticOnlyS,
    /// No deterministic state; both paths carry both previous samples.
    StochasticOnlyD,
    /// Observation-level recurrent state feeding the regressor directly.
    DeterministicBaseline,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::StochasticOnlyS,
        Variant::StochasticOnlyD,
        Variant::DeterministicBaseline,
    ];

    pub fn is_stochastic(self) -> bool {
        self != Variant::DeterministicBaseline
    }

    pub fn has_deterministic_state(self) -> bool {
        matches!(self, Variant::Full | Variant::DeterministicBaseline)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::StochasticOnlyS => "stochastic_only_s",
            Variant::StochasticOnlyD => "stochastic_only_d",
            Variant::DeterministicBaseline => "deterministic_baseline",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Stochastic latent size.
    pub latent_dim: usize,
    /// Deterministic recurrent state size.
    pub deterministic_dim: usize,
    pub hidden_dim: usize,
    pub sensors: SensorSet,
    pub variant: Variant,
    /// Weight of the KL bottleneck term.
    pub gamma: f64,
    /// Translation error weight.
    pub alpha: f64,
    /// Rotation error weight.
    pub beta: f64,
    pub min_std: f64,
    pub pose_tile: usize,
    /// Length of one visual observation row.
    pub vis_dim: usize,
    /// Inertial readings per frame and values per reading.
    pub imu_substeps: usize,
    pub imu_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            latent_dim: 32,
            deterministic_dim: 64,
            hidden_dim: 64,
            sensors: SensorSet::VisImu,
            variant: Variant::Full,
            gamma: 0.1,
            alpha: 1.0,
            beta: 100.0,
            min_std: 0.1,
            pose_tile: 8,
            vis_dim: 24,
            imu_substeps: 10,
            imu_dim: 6,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("model.{m}")));
        if self.latent_dim == 0 || self.deterministic_dim == 0 || self.hidden_dim == 0 {
            return fail("latent_dim, deterministic_dim and hidden_dim must be at least 1");
        }
        if !(self.min_std > 0.0) {
            return fail("min_std must be positive");
        }
        if !(self.gamma >= 0.0 && self.alpha >= 0.0 && self.beta >= 0.0) {
            return fail("gamma, alpha and beta must be non-negative");
        }
        if self.pose_tile == 0 {
            return fail("pose_tile must be at least 1");
        }
        if self.sensors.uses_vis() && self.vis_dim == 0 {
            return fail("vis_dim must be at least 1 when the visual sensor is used");
        }
        if self.sensors.uses_imu() && (self.imu_substeps == 0 || self.imu_dim == 0) {
            return fail("imu_substeps and imu_dim must be at least 1 when the inertial sensor is used");
        }
        Ok(())
    }

    /// Length of the fused observation feature.
    pub fn feature_len(&self) -> usize {
        let mut n = 0;
        if self.sensors.uses_vis() {
            n += self.hidden_dim;
        }
        if self.sensors.uses_imu() {
            n += self.hidden_dim;
        }
        n
    }

    /// Whether two configs describe the same parameter layout.
    pub fn same_architecture(&self, other: &ModelConfig) -> bool {
        self.latent_dim == other.latent_dim
            && self.deterministic_dim == other.deterministic_dim
            && self.hidden_dim == other.hidden_dim
            && self.sensors == other.sensors
            && self.variant == other.variant
            && self.pose_tile == other.pose_tile
            && self.vis_dim == other.vis_dim
            && self.imu_substeps == other.imu_substeps
            && self.imu_dim == other.imu_dim
    }
}
