//! The 24-joint SMPL-style hierarchy used by the synthetic assets.

use std::f32::consts::PI;

use glam::Vec3;

pub const JOINT_COUNT: usize = 24;

pub const PELVIS: usize = 0;
pub const L_HIP: usize = 1;
pub const R_HIP: usize = 2;
pub const SPINE1: usize = 3;
pub const L_KNEE: usize = 4;
pub const R_KNEE: usize = 5;
pub const SPINE2: usize = 6;
pub const L_ANKLE: usize = 7;
pub const R_ANKLE: usize = 8;
pub const SPINE3: usize = 9;
pub const L_FOOT: usize = 10;
pub const R_FOOT: usize = 11;
pub const NECK: usize = 12;
pub const L_COLLAR: usize = 13;
pub const R_COLLAR: usize = 14;
pub const HEAD: usize = 15;
pub const L_SHOULDER: usize = 16;
pub const R_SHOULDER: usize = 17;
pub const L_ELBOW: usize = 18;
pub const R_ELBOW: usize = 19;
pub const L_WRIST: usize = 20;
pub const R_WRIST: usize = 21;
pub const L_HAND: usize = 22;
pub const R_HAND: usize = 23;

pub const PARENTS: [i16; JOINT_COUNT] = [
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21,
];

/// Rest-pose joint positions in meters; y up, character facing +z, feet on y = 0.
pub const REST_POSITIONS: [[f32; 3]; JOINT_COUNT] = [
    [0.0, 0.93, 0.0],
    [0.09, 0.85, 0.0],
    [-0.09, 0.85, 0.0],
    [0.0, 1.03, 0.0],
    [0.10, 0.48, 0.01],
    [-0.10, 0.48, 0.01],
    [0.0, 1.16, 0.0],
    [0.10, 0.08, -0.02],
    [-0.10, 0.08, -0.02],
    [0.0, 1.22, 0.0],
    [0.11, 0.02, 0.10],
    [-0.11, 0.02, 0.10],
    [0.0, 1.45, 0.0],
    [0.07, 1.38, 0.0],
    [-0.07, 1.38, 0.0],
    [0.0, 1.55, 0.02],
    [0.18, 1.40, 0.0],
    [-0.18, 1.40, 0.0],
    [0.30, 1.16, 0.0],
    [-0.30, 1.16, 0.0],
    [0.40, 0.94, 0.02],
    [-0.40, 0.94, 0.02],
    [0.43, 0.86, 0.03],
    [-0.43, 0.86, 0.03],
];

pub fn rest_position(joint: usize) -> Vec3 {
    Vec3::from_array(REST_POSITIONS[joint])
}

/// Parent of joint `j` in a skeleton of `joint_count` joints built from this
/// layout. Joints past the SMPL set hang off the head.
pub fn parent_of(j: usize) -> Option<usize> {
    if j < JOINT_COUNT {
        usize::try_from(PARENTS[j]).ok()
    } else if j == JOINT_COUNT {
        Some(HEAD)
    } else {
        Some(j - 1)
    }
}

/// Rest position for any joint index, extras stacked above the head.
pub fn position_of(j: usize) -> Vec3 {
    if j < JOINT_COUNT {
        rest_position(j)
    } else {
        rest_position(HEAD) + Vec3::new(0.0, 0.02 * (j - JOINT_COUNT + 1) as f32, 0.0)
    }
}

/// Maps an SMPL joint onto a truncated skeleton by walking up to the nearest
/// ancestor that exists.
pub fn clamp_joint(mut j: usize, joint_count: usize) -> usize {
    while j >= joint_count {
        j = parent_of(j).unwrap_or(PELVIS);
    }
    j
}

/// Walk-cycle channel for well-known joints: (axis, amplitude rad, phase, bias).
pub(crate) fn gait_channel(j: usize) -> Option<(Vec3, f32, f32, f32)> {
    let x = Vec3::X;
    match j {
        L_HIP => Some((x, 0.45, 0.0, 0.0)),
        R_HIP => Some((x, 0.45, PI, 0.0)),
        L_KNEE => Some((x, 0.3, -0.5 * PI, 0.3)),
        R_KNEE => Some((x, 0.3, 0.5 * PI, 0.3)),
        L_SHOULDER => Some((x, 0.35, PI, 0.0)),
        R_SHOULDER => Some((x, 0.35, 0.0, 0.0)),
        L_ELBOW => Some((x, 0.1, PI, -0.3)),
        R_ELBOW => Some((x, 0.1, 0.0, -0.3)),
        SPINE1 => Some((Vec3::Y, 0.06, 0.0, 0.0)),
        _ => None,
    }
}
