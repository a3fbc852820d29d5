use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SequenceDataset;
use crate::error::{Error, Result};
use crate::rng::{normal, stream, Purpose};

/// Standard deviation of the Gaussian noise used by both degradation kinds.
pub const DEGRADE_STD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegradeKind {
    /// Adds zero-mean Gaussian noise.
    Noisy,
    /// Replaces readings with zero-mean Gaussian noise.
    Missing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegradeTarget {
    Vis,
    Imu,
    Both,
}

impl FromStr for DegradeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noisy" => Ok(DegradeKind::Noisy),
            "missing" => Ok(DegradeKind::Missing),
            other => Err(Error::InvalidInput(format!("unknown degradation kind `{other}`"))),
        }
    }
}

impl FromStr for DegradeTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vis" => Ok(DegradeTarget::Vis),
            "imu" => Ok(DegradeTarget::Imu),
            "both" => Ok(DegradeTarget::Both),
            other => Err(Error::InvalidInput(format!("unknown degradation target `{other}`"))),
        }
    }
}

impl fmt::Display for DegradeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DegradeKind::Noisy => "noisy",
            DegradeKind::Missing => "missing",
        })
    }
}

impl fmt::Display for DegradeTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DegradeTarget::Vis => "vis",
            DegradeTarget::Imu => "imu",
            DegradeTarget::Both => "both",
        })
    }
}

fn apply(values: &mut [f64], kind: DegradeKind, rng: &mut rand_chacha::ChaCha20Rng) {
    for v in values {
        let draw = DEGRADE_STD * normal(rng);
        *v = match kind {
            DegradeKind::Noisy => *v + draw,
            DegradeKind::Missing => draw,
        };
    }
}

/// Corrupts the targeted sensor streams; ground truth and nuisance are untouched.
pub fn degrade(dataset: &SequenceDataset, kind: DegradeKind, target: DegradeTarget) -> SequenceDataset {
    let mut out = dataset.clone();
    let meta = &dataset.meta;
    if matches!(target, DegradeTarget::Vis | DegradeTarget::Both) {
        let mut rng = stream(meta.seed, meta.index, Purpose::Degrade);
        apply(&mut out.vis_obs, kind, &mut rng);
    }
    if matches!(target, DegradeTarget::Imu | DegradeTarget::Both) {
        // separate stream so `imu` and `both` corrupt the inertial channel identically
        let mut rng = stream(meta.seed ^ 0x5eed_1a0, meta.index, Purpose::Degrade);
        apply(&mut out.imu_obs, kind, &mut rng);
    }
    let tag = format!("{kind}-{target}");
    out.meta.degradation = Some(match &dataset.meta.degradation {
        Some(prev) => format!("{prev}+{tag}"),
        None => tag,
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_sequences, WorldConfig};

    fn dataset() -> SequenceDataset {
        let config = WorldConfig {
            frames: 20,
            ..Default::default()
        };
        generate_sequences(&config, [0]).unwrap().remove(0)
    }

    #[test]
    fn untargeted_sensor_untouched() {
        let ds = dataset();
        let out = degrade(&ds, DegradeKind::Noisy, DegradeTarget::Vis);
        assert_eq!(out.imu_obs, ds.imu_obs);
        assert_ne!(out.vis_obs, ds.vis_obs);
        assert_eq!(out.trajectory, ds.trajectory);
        assert_eq!(out.nuisance, ds.nuisance);
        assert_eq!(out.meta.degradation.as_deref(), Some("noisy-vis"));
    }

    #[test]
    fn unknown_kind_or_target_is_an_error() {
        assert!("blurry".parse::<DegradeKind>().is_err());
        assert!("lidar".parse::<DegradeTarget>().is_err());
        assert_eq!("missing".parse::<DegradeKind>().unwrap(), DegradeKind::Missing);
    }

    #[test]
    fn missing_replaces_with_small_noise() {
        let ds = dataset();
        let out = degrade(&ds, DegradeKind::Missing, DegradeTarget::Both);
        let n = out.vis_obs.len() as f64;
        let rms = (out.vis_obs.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        assert!((rms - DEGRADE_STD).abs() < 0.03, "{rms}");
    }
}
