//! Skeletons, motion clips, multi-resolution avatar templates and skinning.

mod motion;
mod skeleton;
mod skinning;
pub mod smpl;
mod synth;
mod template;

pub use motion::{generate_synthetic_motion, sample_pose, slerp, MotionClip};
pub use skeleton::{forward_kinematics, is_rigid, rigid_inverse, Pose, Skeleton};
pub use skinning::{
    skin_means, skin_means_into, skin_rotations_into, skinning_matrices, transform_means_into,
};
pub use synth::{generate_synthetic_template, SYNTHETIC_OPACITY};
pub use template::{AvatarTemplate, LodLevel, INFLUENCES};
