use glam::{Mat3, Mat4, Quat, Vec3};

use crate::error::AvatarError;

const RIGID_TOLERANCE: f32 = 1e-5;

/// Inverse of a rigid transform without a general 4×4 inversion.
pub fn rigid_inverse(m: &Mat4) -> Mat4 {
    let r = Mat3::from_mat4(*m).transpose();
    let t = -(r * m.w_axis.truncate());
    Mat4::from_cols(
        r.x_axis.extend(0.0),
        r.y_axis.extend(0.0),
        r.z_axis.extend(0.0),
        t.extend(1.0),
    )
}

/// Checks that `m` is a finite rotation + translation within `RIGID_TOLERANCE`.
pub fn is_rigid(m: &Mat4) -> bool {
    if !m.is_finite() {
        return false;
    }
    let bottom = m.row(3);
    if (bottom - glam::Vec4::W).abs().max_element() > RIGID_TOLERANCE {
        return false;
    }
    let r = Mat3::from_mat4(*m);
    let rtr = r.transpose() * r;
    let err = (rtr.x_axis - Vec3::X)
        .abs()
        .max((rtr.y_axis - Vec3::Y).abs())
        .max((rtr.z_axis - Vec3::Z).abs())
        .max_element();
    err <= RIGID_TOLERANCE && (r.determinant() - 1.0).abs() <= RIGID_TOLERANCE
}

/// Joint hierarchy with bind-pose transforms. Joint 0 is the only root and
/// every parent index precedes its child.
#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    parents: Vec<Option<usize>>,
    inverse_bind: Vec<Mat4>,
    bind_local: Vec<Mat4>,
}

impl Skeleton {
    pub fn new(parents: Vec<Option<usize>>, inverse_bind: Vec<Mat4>) -> Result<Self, AvatarError> {
        if parents.is_empty() {
            return Err(AvatarError::InvalidSkeleton("no joints".into()));
        }
        if parents.len() != inverse_bind.len() {
            return Err(AvatarError::InvalidSkeleton(format!(
                "{} parents but {} inverse bind matrices",
                parents.len(),
                inverse_bind.len()
            )));
        }
        if parents.len() > u16::MAX as usize {
            return Err(AvatarError::InvalidSkeleton("too many joints".into()));
        }
        for (j, parent) in parents.iter().enumerate() {
            match (j, parent) {
                (0, None) => {}
                (0, Some(_)) => {
                    return Err(AvatarError::InvalidSkeleton(
                        "joint 0 must be the root".into(),
                    ))
                }
                (_, None) => {
                    return Err(AvatarError::InvalidSkeleton(format!(
                        "joint {j} is a second root"
                    )))
                }
                (_, Some(p)) if *p >= j => {
                    return Err(AvatarError::InvalidSkeleton(format!(
                        "joint {j} has parent {p}, parents must precede children"
                    )))
                }
                _ => {}
            }
        }
        if let Some(j) = inverse_bind.iter().position(|m| !is_rigid(m)) {
            return Err(AvatarError::InvalidSkeleton(format!(
                "inverse bind matrix of joint {j} is not rigid"
            )));
        }
        let bind_local = parents
            .iter()
            .enumerate()
            .map(|(j, parent)| {
                let bind_world = rigid_inverse(&inverse_bind[j]);
                match parent {
                    None => bind_world,
                    Some(p) => inverse_bind[*p] * bind_world,
                }
            })
            .collect();
        Ok(Skeleton {
            parents,
            inverse_bind,
            bind_local,
        })
    }

    /// Skeleton whose bind frames are pure translations to `joint_positions`.
    pub fn from_joint_positions(
        parents: Vec<Option<usize>>,
        joint_positions: &[Vec3],
    ) -> Result<Self, AvatarError> {
        let inverse_bind = joint_positions
            .iter()
            .map(|p| Mat4::from_translation(-*p))
            .collect();
        Self::new(parents, inverse_bind)
    }

    pub fn joint_count(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parents[joint]
    }

    pub fn inverse_bind(&self) -> &[Mat4] {
        &self.inverse_bind
    }

    /// Bind transform of each joint relative to its parent.
    pub fn bind_local(&self) -> &[Mat4] {
        &self.bind_local
    }

    /// World-space bind position of a joint.
    pub fn bind_position(&self, joint: usize) -> Vec3 {
        rigid_inverse(&self.inverse_bind[joint]).w_axis.truncate()
    }

    /// The bind (rest) pose: identity rotations, zero root translation.
    pub fn bind_pose(&self) -> Pose {
        Pose {
            root_translation: Vec3::ZERO,
            local_rotations: vec![Quat::IDENTITY; self.joint_count()],
        }
    }
}

/// Root translation plus one local rotation per joint, applied on top of the
/// bind-local transform.
#[derive(Clone, Debug, PartialEq)]
pub struct Pose {
    pub root_translation: Vec3,
    pub local_rotations: Vec<Quat>,
}

impl Pose {
    pub fn joint_count(&self) -> usize {
        self.local_rotations.len()
    }
}

/// World transform of every joint: `world[j] = world[parent] · bind_local[j] · R(q_j)`,
/// with the root additionally translated by the pose's root translation.
pub fn forward_kinematics(skel: &Skeleton, pose: &Pose) -> Result<Vec<Mat4>, AvatarError> {
    if pose.joint_count() != skel.joint_count() {
        return Err(AvatarError::JointCountMismatch {
            expected: skel.joint_count(),
            actual: pose.joint_count(),
        });
    }
    let mut world: Vec<Mat4> = Vec::with_capacity(skel.joint_count());
    for j in 0..skel.joint_count() {
        let local = skel.bind_local[j] * Mat4::from_quat(pose.local_rotations[j]);
        let w = match skel.parents[j] {
            None => Mat4::from_translation(pose.root_translation) * local,
            Some(p) => world[p] * local,
        };
        world.push(w);
    }
    Ok(world)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f32::consts::{FRAC_PI_2, FRAC_PI_4};

    fn assert_mat_close(a: &Mat4, b: &Mat4, tol: f32) {
        let d = (*a - *b)
            .to_cols_array()
            .iter()
            .fold(0.0f32, |m, v| m.max(v.abs()));
        assert!(d <= tol, "matrices differ by {d}\n{a}\n{b}");
    }

    #[test]
    fn rejects_bad_hierarchies() {
        let id = Mat4::IDENTITY;
        assert!(Skeleton::new(vec![], vec![]).is_err());
        assert!(Skeleton::new(vec![Some(0)], vec![id]).is_err());
        assert!(Skeleton::new(vec![None, None], vec![id, id]).is_err());
        assert!(Skeleton::new(vec![None, Some(1)], vec![id, id]).is_err());
        assert!(Skeleton::new(vec![None], vec![Mat4::from_scale(Vec3::splat(2.0))]).is_err());
        assert!(Skeleton::new(vec![None, Some(0)], vec![id]).is_err());
    }

    #[test]
    fn bind_pose_consistency() {
        let positions = [
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.2, 0.9, 0.0),
            Vec3::new(0.25, 0.5, 0.1),
            Vec3::new(-0.2, 1.3, 0.0),
        ];
        let skel =
            Skeleton::from_joint_positions(vec![None, Some(0), Some(1), Some(0)], &positions)
                .unwrap();
        let world = forward_kinematics(&skel, &skel.bind_pose()).unwrap();
        for (w, ib) in world.iter().zip(skel.inverse_bind()) {
            assert_mat_close(&(*w * *ib), &Mat4::IDENTITY, 1e-6);
        }
    }

    #[test]
    fn single_joint_rotation_and_translation() {
        let skel = Skeleton::new(vec![None], vec![Mat4::IDENTITY]).unwrap();
        let pose = Pose {
            root_translation: Vec3::new(1.0, 0.0, 0.0),
            local_rotations: vec![Quat::from_rotation_z(FRAC_PI_2)],
        };
        let world = forward_kinematics(&skel, &pose).unwrap();
        // rotate 90° about z then translate by +x, composed by hand
        let oracle = Mat4::from_cols_array_2d(&[
            [0.0, 1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0, 1.0],
        ]);
        assert_mat_close(&world[0], &oracle, 1e-6);
        let p = world[0].transform_point3(Vec3::X);
        assert!((p - Vec3::new(1.0, 1.0, 0.0)).length() < 1e-6);
    }

    #[test]
    fn chain_rotations_compose() {
        let skel = Skeleton::from_joint_positions(
            vec![None, Some(0)],
            &[Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)],
        )
        .unwrap();
        let q = Quat::from_rotation_z(FRAC_PI_4);
        let pose = Pose {
            root_translation: Vec3::ZERO,
            local_rotations: vec![q, q],
        };
        let world = forward_kinematics(&skel, &pose).unwrap();
        let tip_rot = Mat3::from_mat4(world[1]);
        let expected = Mat3::from_rotation_z(FRAC_PI_2);
        assert!((tip_rot.x_axis - expected.x_axis).length() < 1e-6);
        assert!((tip_rot.y_axis - expected.y_axis).length() < 1e-6);
        // sequential matrix products by hand: R45 · T(1,0,0) · R45
        let oracle = Mat4::from_rotation_z(FRAC_PI_4)
            * Mat4::from_translation(Vec3::X)
            * Mat4::from_rotation_z(FRAC_PI_4);
        assert_mat_close(&world[1], &oracle, 1e-6);
    }

    #[test]
    fn joint_count_mismatch() {
        let skel = Skeleton::new(vec![None], vec![Mat4::IDENTITY]).unwrap();
        let pose = Pose {
            root_translation: Vec3::ZERO,
            local_rotations: vec![Quat::IDENTITY; 2],
        };
        assert_eq!(
            forward_kinematics(&skel, &pose),
            Err(AvatarError::JointCountMismatch {
                expected: 1,
                actual: 2
            })
        );
    }

    #[test]
    fn rigid_inverse_roundtrip() {
        let m = Mat4::from_rotation_translation(
            Quat::from_euler(glam::EulerRot::XYZ, 0.3, -1.1, 2.0),
            Vec3::new(0.5, -2.0, 3.0),
        );
        assert!(is_rigid(&m));
        assert_mat_close(&(rigid_inverse(&m) * m), &Mat4::IDENTITY, 1e-6);
    }
}
