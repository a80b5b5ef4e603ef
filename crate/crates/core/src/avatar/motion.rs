use std::f32::consts::TAU;

use glam::{Quat, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::skeleton::Pose;
use super::smpl;
use crate::error::AvatarError;

const QUAT_NORM_TOLERANCE: f32 = 1e-6;

/// A sampled sequence of poses played back at a fixed rate.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionClip {
    fps: f32,
    joint_count: usize,
    frames: Vec<Pose>,
}

impl MotionClip {
    pub fn new(fps: f32, joint_count: usize, frames: Vec<Pose>) -> Result<Self, AvatarError> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(AvatarError::InvalidMotion(format!(
                "fps must be positive, got {fps}"
            )));
        }
        if frames.is_empty() {
            return Err(AvatarError::InvalidMotion("clip has no frames".into()));
        }
        for (k, frame) in frames.iter().enumerate() {
            if frame.joint_count() != joint_count {
                return Err(AvatarError::InvalidMotion(format!(
                    "frame {k} has {} joints, expected {joint_count}",
                    frame.joint_count()
                )));
            }
            if !frame.root_translation.is_finite() {
                return Err(AvatarError::InvalidMotion(format!(
                    "frame {k} has a non-finite root translation"
                )));
            }
            if let Some(j) = frame
                .local_rotations
                .iter()
                .position(|q| !q.is_finite() || (q.length() - 1.0).abs() > QUAT_NORM_TOLERANCE)
            {
                return Err(AvatarError::InvalidMotion(format!(
                    "frame {k} joint {j} rotation is not a unit quaternion"
                )));
            }
        }
        Ok(MotionClip {
            fps,
            joint_count,
            frames,
        })
    }

    pub fn fps(&self) -> f32 {
        self.fps
    }

    pub fn joint_count(&self) -> usize {
        self.joint_count
    }

    pub fn frames(&self) -> &[Pose] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Length of one loop in seconds. The last frame blends back into the first
    /// when wrapping, so a clip of n frames lasts n / fps.
    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 / self.fps as f64
    }
}

/// Shortest-arc spherical interpolation.
pub fn slerp(a: Quat, b: Quat, t: f32) -> Quat {
    let mut dot = a.dot(b);
    let b = if dot < 0.0 {
        dot = -dot;
        -b
    } else {
        b
    };
    if dot > 0.9995 {
        return (a * (1.0 - t) + b * t).normalize();
    }
    let theta = dot.acos();
    let sin_theta = theta.sin();
    let wa = ((1.0 - t) * theta).sin() / sin_theta;
    let wb = (t * theta).sin() / sin_theta;
    (a * wa + b * wb).normalize()
}

fn blend_poses(a: &Pose, b: &Pose, t: f32) -> Pose {
    Pose {
        root_translation: a.root_translation.lerp(b.root_translation, t),
        local_rotations: a
            .local_rotations
            .iter()
            .zip(&b.local_rotations)
            .map(|(qa, qb)| slerp(*qa, *qb, t))
            .collect(),
    }
}

/// Samples the clip at `time` seconds. With `wrap` the clip loops; otherwise it
/// holds the last frame.
pub fn sample_pose(clip: &MotionClip, time: f64, wrap: bool) -> Result<Pose, AvatarError> {
    if !(time >= 0.0 && time.is_finite()) {
        return Err(AvatarError::InvalidTime(time));
    }
    let n = clip.frames.len();
    if n == 1 {
        return Ok(clip.frames[0].clone());
    }
    let fps = clip.fps as f64;
    let (i0, i1, frac) = if wrap {
        let t = time % clip.duration();
        let f = t * fps;
        let i0 = (f.floor() as usize).min(n - 1);
        (i0, (i0 + 1) % n, (f - i0 as f64) as f32)
    } else {
        let f = time * fps;
        if f >= (n - 1) as f64 {
            return Ok(clip.frames[n - 1].clone());
        }
        let i0 = f.floor() as usize;
        (i0, i0 + 1, (f - i0 as f64) as f32)
    };
    if frac <= 0.0 {
        return Ok(clip.frames[i0].clone());
    }
    Ok(blend_poses(&clip.frames[i0], &clip.frames[i1], frac))
}

/// A seeded looping gait-like clip. Joints of the SMPL layout get a coordinated
/// walk cycle; other joints sway with small random sinusoids. Every frequency is
/// an integer number of cycles per loop so the wrap seam is smooth.
pub fn generate_synthetic_motion(
    seed: u64,
    joint_count: usize,
    frame_count: usize,
    fps: f32,
) -> Result<MotionClip, AvatarError> {
    if joint_count == 0 {
        return Err(AvatarError::InvalidMotion(
            "joint count must be at least 1".into(),
        ));
    }
    if frame_count == 0 {
        return Err(AvatarError::InvalidMotion("clip has no frames".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration = frame_count as f32 / fps;
    let cycles = rng.random_range(1..=3) as f32;
    let omega = TAU * cycles / duration;
    let stride = rng.random_range(0.25f32..0.55);
    let phase = rng.random_range(0.0f32..TAU);

    struct Channel {
        axis: Vec3,
        amplitude: f32,
        harmonic: f32,
        phase: f32,
        bias: f32,
    }
    let channels: Vec<Channel> = (0..joint_count)
        .map(|j| {
            let gait = smpl::gait_channel(j);
            match gait {
                Some((axis, amp, ph, bias)) => Channel {
                    axis,
                    amplitude: amp * stride / 0.4,
                    harmonic: 1.0,
                    phase: phase + ph,
                    bias,
                },
                None => {
                    let axis = Vec3::new(
                        rng.random_range(-1.0f32..1.0),
                        rng.random_range(-1.0f32..1.0),
                        rng.random_range(-1.0f32..1.0),
                    )
                    .try_normalize()
                    .unwrap_or(Vec3::X);
                    Channel {
                        axis,
                        amplitude: rng.random_range(0.0f32..0.12),
                        harmonic: rng.random_range(1..=2) as f32,
                        phase: rng.random_range(0.0f32..TAU),
                        bias: 0.0,
                    }
                }
            }
        })
        .collect();
    let bob = rng.random_range(0.005f32..0.025);

    let frames = (0..frame_count)
        .map(|k| {
            let t = k as f32 / fps;
            Pose {
                root_translation: Vec3::new(0.0, bob * (2.0 * omega * t + phase).sin(), 0.0),
                local_rotations: channels
                    .iter()
                    .map(|c| {
                        let angle = c.bias + c.amplitude * (c.harmonic * omega * t + c.phase).sin();
                        Quat::from_axis_angle(c.axis, angle).normalize()
                    })
                    .collect(),
            }
        })
        .collect();
    MotionClip::new(fps, joint_count, frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f32::consts::{FRAC_PI_2, FRAC_PI_4};

    fn two_frame_clip() -> MotionClip {
        let f0 = Pose {
            root_translation: Vec3::ZERO,
            local_rotations: vec![Quat::IDENTITY],
        };
        let f1 = Pose {
            root_translation: Vec3::new(1.0, 0.0, 0.0),
            local_rotations: vec![Quat::from_rotation_z(FRAC_PI_2)],
        };
        MotionClip::new(10.0, 1, vec![f0, f1]).unwrap()
    }

    #[test]
    fn time_zero_is_frame_zero() {
        let clip = two_frame_clip();
        assert_eq!(sample_pose(&clip, 0.0, true).unwrap(), clip.frames()[0]);
        assert_eq!(sample_pose(&clip, 0.0, false).unwrap(), clip.frames()[0]);
    }

    #[test]
    fn halfway_is_slerp_midpoint() {
        let clip = two_frame_clip();
        let p = sample_pose(&clip, 0.05, false).unwrap();
        // closed form: (identity + R90) / |.| = rotation by 45°
        let expected = Quat::from_rotation_z(FRAC_PI_4);
        assert!(p.local_rotations[0].dot(expected).abs() > 1.0 - 1e-5);
        assert!((p.local_rotations[0] - expected).length() < 1e-5);
        assert!((p.root_translation - Vec3::new(0.5, 0.0, 0.0)).length() < 1e-6);
    }

    #[test]
    fn wrap_is_modulo_duration() {
        let clip = generate_synthetic_motion(3, 24, 40, 30.0).unwrap();
        let a = sample_pose(&clip, clip.duration() + 0.1, true).unwrap();
        let b = sample_pose(&clip, 0.1, true).unwrap();
        for (qa, qb) in a.local_rotations.iter().zip(&b.local_rotations) {
            assert!((*qa - *qb).length() < 1e-5);
        }
    }

    #[test]
    fn no_wrap_clamps_to_last_frame() {
        let clip = two_frame_clip();
        assert_eq!(sample_pose(&clip, 100.0, false).unwrap(), clip.frames()[1]);
    }

    #[test]
    fn wrap_final_segment_blends_to_first_frame() {
        let clip = two_frame_clip();
        let p = sample_pose(&clip, 0.15, true).unwrap();
        assert!((p.root_translation.x - 0.5).abs() < 1e-5);
    }

    #[test]
    fn slerp_takes_shortest_arc() {
        let a = Quat::IDENTITY;
        let b = -Quat::from_rotation_z(FRAC_PI_2);
        let m = slerp(a, b, 0.5);
        let expected = Quat::from_rotation_z(FRAC_PI_4);
        assert!(m.dot(expected) > 1.0 - 1e-5);
    }

    #[test]
    fn invalid_clips_rejected() {
        assert!(MotionClip::new(
            0.0,
            1,
            vec![Pose {
                root_translation: Vec3::ZERO,
                local_rotations: vec![Quat::IDENTITY]
            }]
        )
        .is_err());
        assert!(MotionClip::new(30.0, 1, vec![]).is_err());
        assert!(MotionClip::new(
            30.0,
            2,
            vec![Pose {
                root_translation: Vec3::ZERO,
                local_rotations: vec![Quat::IDENTITY]
            }]
        )
        .is_err());
        assert!(sample_pose(&two_frame_clip(), -1.0, true).is_err());
    }

    #[test]
    fn sampling_is_continuous_away_from_seams() {
        let clip = generate_synthetic_motion(9, 24, 60, 30.0).unwrap();
        for k in 0..50 {
            let t = 0.013 + k as f64 * 0.037;
            let a = sample_pose(&clip, t, true).unwrap();
            let b = sample_pose(&clip, t + 1e-5, true).unwrap();
            for (qa, qb) in a.local_rotations.iter().zip(&b.local_rotations) {
                assert!(qa.dot(*qb).abs() > 1.0 - 1e-6);
            }
            assert!((a.root_translation - b.root_translation).length() < 1e-4);
        }
    }

    #[test]
    fn synthetic_motion_is_deterministic() {
        let a = generate_synthetic_motion(5, 24, 30, 30.0).unwrap();
        let b = generate_synthetic_motion(5, 24, 30, 30.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_synthetic_motion(6, 24, 30, 30.0).unwrap());
    }
}
