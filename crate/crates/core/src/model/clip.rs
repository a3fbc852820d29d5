use rand_chacha::ChaCha20Rng;

use super::config::ModelConfig;
use crate::autodiff::Tensor;
use crate::error::{invalid, Result};
use crate::rng::normals;
use crate::world::SequenceDataset;

/// A batch of `B` aligned clips of `L` frame pairs, laid out per time step.
///
/// Ground-truth poses are optional so inference can run on clips that carry
/// none; training requires them.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipBatch {
    batch: usize,
    len: usize,
    vis: Option<Vec<Tensor>>,
    imu: Option<Vec<Vec<Tensor>>>,
    poses: Option<Vec<Tensor>>,
    noise: Vec<[Tensor; 2]>,
}

/// Which transition path a noise draw belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Path {
    Obs = 0,
    Pose = 1,
}

impl ClipBatch {
    /// Cuts windows `(sequence, start)` of length `len` out of `datasets`.
    ///
    /// `noise` holds `B·L·2·d` standard normal draws in `[b][t][path][j]` order.
    pub fn from_windows(
        datasets: &[SequenceDataset],
        windows: &[(usize, usize)],
        len: usize,
        config: &ModelConfig,
        noise: &[f64],
        with_poses: bool,
    ) -> Result<Self> {
        let b = windows.len();
        let d = config.latent_dim;
        if b == 0 || len == 0 {
            return Err(invalid("a clip batch needs at least one window of at least one frame"));
        }
        if noise.len() != b * len * 2 * d {
            return Err(invalid(format!(
                "noise holds {} values, expected {}",
                noise.len(),
                b * len * 2 * d
            )));
        }
        for &(s, start) in windows {
            let ds = datasets
                .get(s)
                .ok_or_else(|| invalid(format!("window refers to sequence {s} of {}", datasets.len())))?;
            if start + len > ds.frames() {
                return Err(invalid(format!(
                    "window {start}..{} exceeds the {} frames of sequence {s}",
                    start + len,
                    ds.frames()
                )));
            }
            if config.sensors.uses_vis() && ds.vis_dim != config.vis_dim {
                return Err(invalid(format!(
                    "sequence {s} has vis_dim {}, model expects {}",
                    ds.vis_dim, config.vis_dim
                )));
            }
            if config.sensors.uses_imu()
                && (ds.imu_substeps != config.imu_substeps || ds.imu_dim != config.imu_dim)
            {
                return Err(invalid(format!(
                    "sequence {s} has {}x{} inertial readings, model expects {}x{}",
                    ds.imu_substeps, ds.imu_dim, config.imu_substeps, config.imu_dim
                )));
            }
        }

        let gather = |width: usize, row: &dyn Fn(&SequenceDataset, usize) -> &[f64], t: usize| {
            let mut data = Vec::with_capacity(b * width);
            for &(s, start) in windows {
                data.extend_from_slice(row(&datasets[s], start + t));
            }
            Tensor::from_parts(vec![b, width], data)
        };

        let vis = config.sensors.uses_vis().then(|| {
            (0..len)
                .map(|t| gather(config.vis_dim, &|ds, f| ds.vis_row(f), t))
                .collect()
        });
        let imu = config.sensors.uses_imu().then(|| {
            let w = config.imu_dim;
            (0..len)
                .map(|t| {
                    (0..config.imu_substeps)
                        .map(|k| gather(w, &|ds, f| &ds.imu_frame(f)[k * w..(k + 1) * w], t))
                        .collect()
                })
                .collect()
        });
        let poses = with_poses.then(|| {
            (0..len)
                .map(|t| {
                    let mut data = Vec::with_capacity(b * 6);
                    for &(s, start) in windows {
                        data.extend_from_slice(&datasets[s].poses()[start + t].to_vec6());
                    }
                    Tensor::from_parts(vec![b, 6], data)
                })
                .collect()
        });
        let noise = (0..len)
            .map(|t| {
                std::array::from_fn(|path| {
                    let mut data = Vec::with_capacity(b * d);
                    for i in 0..b {
                        let at = ((i * len + t) * 2 + path) * d;
                        data.extend_from_slice(&noise[at..at + d]);
                    }
                    Tensor::from_parts(vec![b, d], data)
                })
            })
            .collect();
        Ok(ClipBatch {
            batch: b,
            len,
            vis,
            imu,
            poses,
            noise,
        })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn vis(&self, t: usize) -> Option<&Tensor> {
        self.vis.as_ref().map(|v| &v[t])
    }

    pub fn imu(&self, t: usize) -> Option<&[Tensor]> {
        self.imu.as_ref().map(|v| v[t].as_slice())
    }

    pub fn pose(&self, t: usize) -> Option<&Tensor> {
        self.poses.as_ref().map(|v| &v[t])
    }

    pub fn has_poses(&self) -> bool {
        self.poses.is_some()
    }

    pub fn noise(&self, t: usize, path: Path) -> &Tensor {
        &self.noise[t][path as usize]
    }

    /// The same clips without ground truth.
    pub fn without_poses(&self) -> ClipBatch {
        ClipBatch {
            poses: None,
            ..self.clone()
        }
    }

    /// The same clips with every noise draw set to zero.
    pub fn with_zero_noise(&self) -> ClipBatch {
        let noise = self
            .noise
            .iter()
            .map(|pair| pair.clone().map(|n| Tensor::zeros(n.shape())))
            .collect();
        ClipBatch {
            noise,
            ..self.clone()
        }
    }
}

/// Standard normal draws for a batch of `batch` clips of length `len`.
pub fn sample_noise(rng: &mut ChaCha20Rng, batch: usize, len: usize, latent_dim: usize) -> Vec<f64> {
    normals(rng, batch * len * 2 * latent_dim)
}
