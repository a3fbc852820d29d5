use rand_chacha::ChaCha20Rng;

use super::{Profile, WorldConfig};
use crate::rng::{normal, stream, Purpose};
use crate::se3::{integrate, Pose6, Trajectory};

/// Keeps every synthesized pitch far from gimbal lock.
const PITCH_LIMIT: f64 = 1.3;

/// Order-1 autoregressive process with a given stationary mean and std.
struct Ar1 {
    mean: f64,
    coef: f64,
    innovation: f64,
    value: f64,
}

impl Ar1 {
    fn new(rng: &mut ChaCha20Rng, mean: f64, std: f64, coef: f64) -> Self {
        Ar1 {
            mean,
            coef,
            innovation: std * (1.0 - coef * coef).sqrt(),
            value: mean + std * normal(rng),
        }
    }

    fn step(&mut self, rng: &mut ChaCha20Rng) -> f64 {
        let v = self.value;
        self.value = self.mean + self.coef * (self.value - self.mean) + self.innovation * normal(rng);
        v
    }
}

/// Draws the ground-truth motion of sequence `index`.
///
/// Depends only on the world seed, the profile and the frame count, so
/// changing nuisance or noise settings never alters the trajectory.
pub fn generate_trajectory(config: &WorldConfig, index: u64) -> Trajectory {
    let mut rng = stream(config.seed, index, Purpose::Trajectory);
    let n = config.frames;
    let relatives: Vec<Pose6> = match config.profile {
        Profile::Static => vec![Pose6::IDENTITY; n],
        Profile::Car => {
            let mut speed = Ar1::new(&mut rng, 1.0, 0.2, 0.95);
            let mut yaw_rate = Ar1::new(&mut rng, 0.0, 0.05, 0.9);
            (0..n)
                .map(|_| {
                    let v = speed.step(&mut rng).clamp(0.2, 2.0);
                    let w = yaw_rate.step(&mut rng);
                    let lateral = 0.5 * v * w + 0.01 * normal(&mut rng);
                    let vertical = 0.01 * normal(&mut rng);
                    let roll = 0.005 * normal(&mut rng);
                    let pitch = 0.005 * normal(&mut rng);
                    Pose6::new([v, lateral, vertical], [roll, pitch, w])
                })
                .collect()
        }
        Profile::Mav => {
            let mut trans: Vec<Ar1> = (0..3).map(|_| Ar1::new(&mut rng, 0.0, 0.1, 0.9)).collect();
            let mut rot: Vec<Ar1> = (0..3).map(|_| Ar1::new(&mut rng, 0.0, 0.05, 0.9)).collect();
            (0..n)
                .map(|_| {
                    let t = [0, 1, 2].map(|i| trans[i].step(&mut rng));
                    let mut r = [0, 1, 2].map(|i| rot[i].step(&mut rng));
                    r[1] = r[1].clamp(-PITCH_LIMIT, PITCH_LIMIT);
                    Pose6::new(t, r)
                })
                .collect()
        }
    };
    integrate(&relatives)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(profile: Profile, frames: usize) -> WorldConfig {
        WorldConfig {
            profile,
            frames,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn static_profile_has_identity_relatives() {
        let traj = generate_trajectory(&config(Profile::Static, 20), 0);
        assert!(traj.relatives.iter().all(|p| *p == Pose6::IDENTITY));
    }

    #[test]
    fn car_profile_statistics() {
        let traj = generate_trajectory(&config(Profile::Car, 10_000), 0);
        let n = traj.relatives.len() as f64;
        let pitch: Vec<f64> = traj.relatives.iter().map(|p| p.r[1]).collect();
        let mean = pitch.iter().sum::<f64>() / n;
        let std = (pitch.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(std < 0.02, "pitch std {std}");

        let forward = traj.relatives.iter().map(|p| p.t[0].abs()).sum::<f64>() / n;
        let lateral = traj.relatives.iter().map(|p| p.t[1].abs()).sum::<f64>() / n;
        assert!(forward > 5.0 * lateral, "forward {forward} lateral {lateral}");
    }

    #[test]
    fn mav_rotates_on_every_axis() {
        let traj = generate_trajectory(&config(Profile::Mav, 5_000), 0);
        let n = traj.relatives.len() as f64;
        let stds: Vec<f64> = (0..3)
            .map(|i| (traj.relatives.iter().map(|p| p.r[i].powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        let max = stds.iter().cloned().fold(0.0, f64::max);
        let min = stds.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > 0.5 * max, "{stds:?}");
        let trans = (traj.relatives.iter().map(|p| p.t[0].powi(2)).sum::<f64>() / n).sqrt();
        assert!(trans < 0.5);
    }

    #[test]
    fn deterministic_per_seed_and_index() {
        let c = config(Profile::Car, 50);
        assert_eq!(generate_trajectory(&c, 3), generate_trajectory(&c, 3));
        assert_ne!(generate_trajectory(&c, 3), generate_trajectory(&c, 4));
    }

    #[test]
    fn nuisance_settings_do_not_change_motion() {
        let base = config(Profile::Car, 50);
        let shifted = WorldConfig {
            nuisance_mean: 3.0,
            obs_noise_std: 0.5,
            ..base.clone()
        };
        assert_eq!(generate_trajectory(&base, 1), generate_trajectory(&shifted, 1));
    }
}
