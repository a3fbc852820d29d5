//! 6-DOF poses, composition, trajectory integration and RMSE scoring.
//!
//! Euler convention: intrinsic Z-Y-X (yaw, then pitch, then roll), so
//! `R = Rz(yaw) · Ry(pitch) · Rx(roll)`. A [`Pose6`] stores its angles as
//! `[roll, pitch, yaw]` in radians; degrees appear only in reports.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Pitch must stay this far from ±π/2 for Euler extraction.
pub const GIMBAL_MARGIN: f64 = 1e-6;

/// Relative rigid motion: translation in meters and `[roll, pitch, yaw]` in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose6 {
    pub t: [f64; 3],
    pub r: [f64; 3],
}

impl Pose6 {
    pub const IDENTITY: Pose6 = Pose6 {
        t: [0.0; 3],
        r: [0.0; 3],
    };

    pub fn new(t: [f64; 3], r: [f64; 3]) -> Self {
        Pose6 { t, r }
    }

    /// `[tx, ty, tz, roll, pitch, yaw]`
    pub fn to_vec6(&self) -> [f64; 6] {
        [self.t[0], self.t[1], self.t[2], self.r[0], self.r[1], self.r[2]]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Pose6 {
            t: [v[0], v[1], v[2]],
            r: [v[3], v[4], v[5]],
        }
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        homogeneous(&euler_to_matrix(self.r), &Vector3::from(self.t))
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self> {
        let rot = m.fixed_view::<3, 3>(0, 0).into_owned();
        Ok(Pose6 {
            t: [m[(0, 3)], m[(1, 3)], m[(2, 3)]],
            r: matrix_to_euler(&rot)?,
        })
    }

    /// Rotation angle of this pose's rotation, in radians.
    pub fn rotation_angle(&self) -> f64 {
        rotation_angle(&euler_to_matrix(self.r))
    }
}

fn homogeneous(rot: &Matrix3<f64>, t: &Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(rot);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(t);
    m
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

pub fn euler_to_matrix(r: [f64; 3]) -> Matrix3<f64> {
    let (sr, cr) = r[0].sin_cos();
    let (sp, cp) = r[1].sin_cos();
    let (sy, cy) = r[2].sin_cos();
    Matrix3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    )
}

/// Inverse of [`euler_to_matrix`]. Fails inside the gimbal-lock band.
pub fn matrix_to_euler(m: &Matrix3<f64>) -> Result<[f64; 3]> {
    let cos_pitch = (m[(0, 0)] * m[(0, 0)] + m[(1, 0)] * m[(1, 0)]).sqrt();
    let pitch = (-m[(2, 0)]).atan2(cos_pitch);
    if pitch.abs() >= PI / 2.0 - GIMBAL_MARGIN {
        return Err(Error::GimbalLock { pitch });
    }
    let roll = m[(2, 1)].atan2(m[(2, 2)]);
    let yaw = m[(1, 0)].atan2(m[(0, 0)]);
    Ok([wrap_angle(roll), pitch, wrap_angle(yaw)])
}

/// Geodesic rotation angle in `[0, π]`.
pub fn rotation_angle(m: &Matrix3<f64>) -> f64 {
    ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Group composition: `a` followed by `b` in `a`'s frame.
pub fn compose(a: &Pose6, b: &Pose6) -> Result<Pose6> {
    Pose6::from_matrix(&(a.to_matrix() * b.to_matrix()))
}

/// Geodesic rotation distance between two poses, in radians.
pub fn geodesic_distance(a: &Pose6, b: &Pose6) -> f64 {
    let ra = euler_to_matrix(a.r);
    let rb = euler_to_matrix(b.r);
    rotation_angle(&(ra.transpose() * rb))
}

/// World-frame absolute poses and the relative motions between them.
///
/// `absolutes` has one more entry than `relatives`; `relatives[k]` carries
/// `absolutes[k]` to `absolutes[k + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub absolutes: Vec<Matrix4<f64>>,
    pub relatives: Vec<Pose6>,
}

/// Chains relative motions starting from the identity.
pub fn integrate(relatives: &[Pose6]) -> Trajectory {
    let mut absolutes = Vec::with_capacity(relatives.len() + 1);
    let mut current = Matrix4::identity();
    absolutes.push(current);
    for rel in relatives {
        current *= rel.to_matrix();
        absolutes.push(current);
    }
    Trajectory {
        absolutes,
        relatives: relatives.to_vec(),
    }
}

/// Relative motions between consecutive absolute poses.
pub fn relativize(absolutes: &[Matrix4<f64>]) -> Result<Vec<Pose6>> {
    absolutes
        .windows(2)
        .map(|w| {
            let inv = invert_rigid(&w[0]);
            Pose6::from_matrix(&(inv * w[1]))
        })
        .collect()
}

pub fn invert_rigid(m: &Matrix4<f64>) -> Matrix4<f64> {
    let rot_t = m.fixed_view::<3, 3>(0, 0).transpose();
    let t = m.fixed_view::<3, 1>(0, 3).into_owned();
    homogeneous(&rot_t, &(-(rot_t * t)))
}

/// Root-mean-square translation (meters) and Euler-angle (degrees) errors.
///
/// Angular differences are wrapped to `(−π, π]` before squaring.
pub fn rmse(pred: &[Pose6], gt: &[Pose6]) -> Result<(f64, f64)> {
    if pred.is_empty() {
        return Err(invalid("rmse of an empty pose list"));
    }
    if pred.len() != gt.len() {
        return Err(invalid(format!(
            "rmse length mismatch: {} predictions vs {} ground truth",
            pred.len(),
            gt.len()
        )));
    }
    let mut t_sq = 0.0;
    let mut r_sq = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        t_sq += (0..3).map(|i| (p.t[i] - g.t[i]).powi(2)).sum::<f64>();
        r_sq += (0..3).map(|i| wrap_angle(p.r[i] - g.r[i]).powi(2)).sum::<f64>();
    }
    let n = pred.len() as f64;
    Ok(((t_sq / n).sqrt(), (r_sq / n).sqrt().to_degrees()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn angle() -> impl Strategy<Value = f64> {
        -PI + 1e-3..PI
    }

    fn pose() -> impl Strategy<Value = Pose6> {
        (
            prop::array::uniform3(-5.0..5.0f64),
            angle(),
            -1.3..1.3f64,
            angle(),
        )
            .prop_map(|(t, roll, pitch, yaw)| Pose6::new(t, [roll, pitch, yaw]))
    }

    #[test]
    fn zero_euler_is_identity() {
        assert_eq!(euler_to_matrix([0.0; 3]), Matrix3::identity());
    }

    #[test]
    fn quarter_yaw_maps_x_to_y() {
        let v = euler_to_matrix([0.0, 0.0, PI / 2.0]) * Vector3::x();
        assert!((v - Vector3::y()).norm() < 1e-15);
    }

    #[test]
    fn gimbal_lock_is_an_error() {
        let m = euler_to_matrix([0.1, PI / 2.0, 0.2]);
        assert!(matches!(matrix_to_euler(&m), Err(Error::GimbalLock { .. })));
    }

    #[test]
    fn compose_with_identity() {
        let p = Pose6::new([1.0, 2.0, 3.0], [0.1, -0.2, 0.3]);
        let q = compose(&p, &Pose6::IDENTITY).unwrap();
        for i in 0..3 {
            assert!((p.t[i] - q.t[i]).abs() < 1e-12);
            assert!((p.r[i] - q.r[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn two_quarter_turns_make_a_half_turn() {
        let q = Pose6::new([0.0; 3], [0.0, 0.0, PI / 2.0]);
        let h = compose(&q, &q).unwrap();
        assert!((h.r[2].abs() - PI).abs() < 1e-12, "{h:?}");
        assert!(h.r[0].abs() < 1e-12 && h.r[1].abs() < 1e-12);
    }

    #[test]
    fn rmse_examples() {
        let p = [Pose6::new([1.0, 2.0, 3.0], [0.1, 0.2, 0.3])];
        assert_eq!(rmse(&p, &p).unwrap(), (0.0, 0.0));

        let pred = [Pose6::new([3.0, 4.0, 0.0], [0.0; 3])];
        assert_eq!(rmse(&pred, &[Pose6::IDENTITY]).unwrap(), (5.0, 0.0));

        let pred = [Pose6::new([3.0, 0.0, 0.0], [0.0; 3]), Pose6::new([0.0, 4.0, 0.0], [0.0; 3])];
        let gt = [Pose6::IDENTITY; 2];
        let (t, _) = rmse(&pred, &gt).unwrap();
        assert!((t - (25.0f64 / 2.0).sqrt()).abs() < 1e-15);
        assert!((t - 3.5355).abs() < 1e-4);

        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn rmse_wraps_angles() {
        let a = [Pose6::new([0.0; 3], [0.0, 0.0, PI - 0.01])];
        let b = [Pose6::new([0.0; 3], [0.0, 0.0, -PI + 0.01])];
        let (_, r) = rmse(&a, &b).unwrap();
        assert!((r - 0.02f64.to_degrees()).abs() < 1e-9, "{r}");
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn euler_round_trip(roll in angle(), pitch in -PI / 2.0 + 1e-3..PI / 2.0 - 1e-3, yaw in angle()) {
            let back = matrix_to_euler(&euler_to_matrix([roll, pitch, yaw])).unwrap();
            for (a, b) in back.iter().zip([roll, pitch, yaw]) {
                prop_assert!(wrap_angle(a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn rotation_blocks_are_orthonormal(p in pose()) {
            let r = euler_to_matrix(p.r);
            prop_assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn compose_is_associative(a in pose(), b in pose(), c in pose()) {
            let left = (a.to_matrix() * b.to_matrix()) * c.to_matrix();
            let right = a.to_matrix() * (b.to_matrix() * c.to_matrix());
            prop_assert!((left - right).norm() < 1e-9);
        }

        #[test]
        fn rmse_is_permutation_invariant(pairs in prop::collection::vec((pose(), pose()), 1..10), seed in 0usize..100) {
            let (pred, gt): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
            let mut idx: Vec<usize> = (0..pairs.len()).collect();
            idx.rotate_left(seed % pairs.len());
            let pp: Vec<_> = idx.iter().map(|&i| pred[i]).collect();
            let gg: Vec<_> = idx.iter().map(|&i| gt[i]).collect();
            let (t0, r0) = rmse(&pred, &gt).unwrap();
            let (t1, r1) = rmse(&pp, &gg).unwrap();
            prop_assert!((t0 - t1).abs() < 1e-12 && (r0 - r1).abs() < 1e-9);
        }

        #[test]
        fn relativize_then_integrate(rels in prop::collection::vec(pose(), 20)) {
            let traj = integrate(&rels);
            let back = relativize(&traj.absolutes).unwrap();
            let again = integrate(&back);
            for (a, b) in traj.absolutes.iter().zip(&again.absolutes) {
                prop_assert!((a - b).norm() < 1e-8);
            }
        }
    }
}
