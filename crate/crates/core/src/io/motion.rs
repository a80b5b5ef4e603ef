//! GSMO: a sampled clip of root translations and local joint rotations.

use std::path::Path;

use super::binary::{check_version, Reader, Writer};
use crate::avatar::{MotionClip, Pose};
use crate::error::FormatError;

pub const MOTION_MAGIC: [u8; 4] = *b"GSMO";
pub const MOTION_VERSION: u32 = 1;

pub fn encode_motion(clip: &MotionClip) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(&MOTION_MAGIC);
    w.u32(MOTION_VERSION);
    w.f32(clip.fps());
    w.u32(clip.frame_count() as u32);
    w.u16(clip.joint_count() as u16);
    for f in clip.frames() {
        w.vec3(f.root_translation);
        f.local_rotations.iter().for_each(|q| w.quat(*q));
    }
    w.buf
}

pub fn decode_motion(bytes: &[u8]) -> Result<MotionClip, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(MOTION_MAGIC)?;
    check_version(r.u32("header")?, MOTION_VERSION)?;
    let fps = r.f32("header")?;
    let frame_count = r.u32("header")? as usize;
    let joints = r.u16("header")? as usize;
    if !(fps.is_finite() && fps > 0.0) {
        return Err(FormatError::Invariant(format!(
            "fps must be positive, got {fps}"
        )));
    }
    if frame_count == 0 {
        return Err(FormatError::Invariant(
            "frame count must be at least 1".into(),
        ));
    }
    if joints == 0 {
        return Err(FormatError::Invariant(
            "joint count must be at least 1".into(),
        ));
    }
    r.ensure(frame_count, 12 + joints * 16, "frames")?;
    let mut frames = Vec::with_capacity(frame_count);
    for fi in 0..frame_count {
        let section = format!("frame {fi}");
        let root_translation = r.vec3(&section)?;
        let local_rotations = (0..joints)
            .map(|_| r.quat(&section))
            .collect::<Result<_, _>>()?;
        frames.push(Pose {
            root_translation,
            local_rotations,
        });
    }
    r.finish()?;
    MotionClip::new(fps, joints, frames).map_err(|e| FormatError::Invariant(e.to_string()))
}

pub fn save_motion(clip: &MotionClip, path: &Path) -> Result<(), FormatError> {
    std::fs::write(path, encode_motion(clip)).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_motion(path: &Path) -> Result<MotionClip, FormatError> {
    let bytes = std::fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_motion(&bytes)
}
