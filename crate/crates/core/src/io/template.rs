//! GSAT: skeleton, skinning and every LoD level of one avatar template.

use std::path::Path;

use glam::Mat4;

use super::binary::{check_version, Reader, Writer};
use crate::avatar::{AvatarTemplate, LodLevel, Skeleton, INFLUENCES};
use crate::error::FormatError;

pub const TEMPLATE_MAGIC: [u8; 4] = *b"GSAT";
pub const TEMPLATE_VERSION: u32 = 1;

pub fn encode_template(t: &AvatarTemplate) -> Vec<u8> {
    let skel = t.skeleton();
    let mut w = Writer::new();
    w.bytes(&TEMPLATE_MAGIC);
    w.u32(TEMPLATE_VERSION);
    w.u16(skel.joint_count() as u16);
    w.u8(t.level_count() as u8);
    for p in skel.parents() {
        w.i16(p.map_or(-1, |p| p as i16));
    }
    for m in skel.inverse_bind() {
        for v in m.transpose().to_cols_array() {
            w.f32(v);
        }
    }
    for level in t.levels() {
        w.u32(level.gaussian_count() as u32);
        level.means.iter().for_each(|v| w.vec3(*v));
        level.rotations.iter().for_each(|q| w.quat(*q));
        level.scales.iter().for_each(|v| w.vec3(*v));
        level.opacities.iter().for_each(|o| w.f32(*o));
        level.colors.iter().for_each(|v| w.vec3(*v));
        level.skin_indices.iter().flatten().for_each(|i| w.u16(*i));
        level.skin_weights.iter().flatten().for_each(|x| w.f32(*x));
    }
    w.buf
}

fn read_level(r: &mut Reader, li: usize) -> Result<LodLevel, FormatError> {
    let n = r.u32(&format!("level {li} count"))? as usize;
    // smallest possible level payload: 3+4+3+1+3 floats, 4 indices, 4 weights
    r.ensure(
        n,
        14 * 4 + INFLUENCES * 2 + INFLUENCES * 4,
        &format!("level {li} arrays"),
    )?;
    let mut level = LodLevel::default();
    let sec = |name: &str| format!("level {li} {name}");
    let s = sec("means");
    level.means = (0..n).map(|_| r.vec3(&s)).collect::<Result<_, _>>()?;
    let s = sec("rotations");
    level.rotations = (0..n).map(|_| r.quat(&s)).collect::<Result<_, _>>()?;
    let s = sec("scales");
    level.scales = (0..n).map(|_| r.vec3(&s)).collect::<Result<_, _>>()?;
    let s = sec("opacities");
    level.opacities = (0..n).map(|_| r.f32(&s)).collect::<Result<_, _>>()?;
    let s = sec("colors");
    level.colors = (0..n).map(|_| r.vec3(&s)).collect::<Result<_, _>>()?;
    let s = sec("skin indices");
    level.skin_indices = (0..n)
        .map(|_| -> Result<[u16; INFLUENCES], FormatError> {
            let mut a = [0u16; INFLUENCES];
            for v in &mut a {
                *v = r.u16(&s)?;
            }
            Ok(a)
        })
        .collect::<Result<_, _>>()?;
    let s = sec("skin weights");
    level.skin_weights = (0..n)
        .map(|_| r.f32s::<INFLUENCES>(&s))
        .collect::<Result<_, _>>()?;
    Ok(level)
}

pub fn decode_template(bytes: &[u8]) -> Result<AvatarTemplate, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(TEMPLATE_MAGIC)?;
    check_version(r.u32("header")?, TEMPLATE_VERSION)?;
    let joints = r.u16("header")? as usize;
    let level_count = r.u8("header")? as usize;
    if joints == 0 {
        return Err(FormatError::Invariant(
            "joint count must be at least 1".into(),
        ));
    }
    if level_count == 0 {
        return Err(FormatError::Invariant(
            "level count must be at least 1".into(),
        ));
    }
    r.ensure(joints, 2, "parents")?;
    let parents = (0..joints)
        .map(|j| match r.i16("parents")? {
            -1 => Ok(None),
            p if p >= 0 => Ok(Some(p as usize)),
            p => Err(FormatError::Invariant(format!(
                "joint {j} has parent index {p}"
            ))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    r.ensure(joints, 64, "inverse binds")?;
    let inverse_bind = (0..joints)
        .map(|_| Ok(Mat4::from_cols_array(&r.f32s::<16>("inverse binds")?).transpose()))
        .collect::<Result<Vec<_>, FormatError>>()?;
    let mut levels = Vec::with_capacity(level_count);
    for li in 0..level_count {
        let mut level = read_level(&mut r, li)?;
        level.renormalize_weights();
        levels.push(level);
    }
    r.finish()?;
    let skeleton =
        Skeleton::new(parents, inverse_bind).map_err(|e| FormatError::Invariant(e.to_string()))?;
    AvatarTemplate::new(skeleton, levels).map_err(|e| FormatError::Invariant(e.to_string()))
}

pub fn save_template(t: &AvatarTemplate, path: &Path) -> Result<(), FormatError> {
    std::fs::write(path, encode_template(t)).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_template(path: &Path) -> Result<AvatarTemplate, FormatError> {
    let bytes = std::fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_template(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::avatar::generate_synthetic_template;

    fn sample() -> AvatarTemplate {
        generate_synthetic_template(11, &[60, 20, 5], 24).unwrap()
    }

    #[test]
    fn round_trip_bytes() {
        let t = sample();
        let a = encode_template(&t);
        let back = decode_template(&a).unwrap();
        assert_eq!(back, t);
        assert_eq!(encode_template(&back), a);
    }

    #[test]
    fn header_layout() {
        let a = encode_template(&sample());
        assert_eq!(&a[0..4], b"GSAT");
        assert_eq!(u32::from_le_bytes(a[4..8].try_into().unwrap()), 1);
        assert_eq!(u16::from_le_bytes(a[8..10].try_into().unwrap()), 24);
        assert_eq!(a[10], 3);
        assert_eq!(i16::from_le_bytes(a[11..13].try_into().unwrap()), -1);
        let expected = 11 + 24 * 2 + 24 * 64 + 3 * 4 + (60 + 20 + 5) * 80;
        assert_eq!(a.len(), expected);
    }

    #[test]
    fn corruption_is_typed() {
        let a = encode_template(&sample());
        let mut bad = a.clone();
        bad[0] = b'X';
        assert!(matches!(
            decode_template(&bad),
            Err(FormatError::BadMagic { .. })
        ));
        let mut bad = a.clone();
        bad[4] = 2;
        assert!(matches!(
            decode_template(&bad),
            Err(FormatError::VersionMismatch {
                expected: 1,
                found: 2
            })
        ));
        let level0 = 11 + 24 * 2 + 24 * 64 + 4;
        match decode_template(&a[..level0 + 60 * 12 + 10]) {
            Err(FormatError::Truncated { section, .. }) => {
                assert!(section.contains("level 0"), "{section}")
            }
            other => panic!("{other:?}"),
        }
        match decode_template(&a[..20]) {
            Err(FormatError::Truncated { section, .. }) => assert_eq!(section, "parents"),
            other => panic!("{other:?}"),
        }
        let mut extra = a.clone();
        extra.push(0);
        assert!(matches!(
            decode_template(&extra),
            Err(FormatError::TrailingBytes(1))
        ));
        let mut bad = a;
        // first opacity of level 0 set to 2.0
        let opacity_at = level0 + 60 * (12 + 16 + 12);
        bad[opacity_at..opacity_at + 4].copy_from_slice(&2.0f32.to_le_bytes());
        assert!(matches!(
            decode_template(&bad),
            Err(FormatError::Invariant(_))
        ));
    }

    #[test]
    fn huge_count_does_not_allocate() {
        let mut a = encode_template(&sample());
        let level0 = 11 + 24 * 2 + 24 * 64;
        a[level0..level0 + 4].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(
            decode_template(&a),
            Err(FormatError::Truncated { .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.gsat");
        let t = sample();
        save_template(&t, &p).unwrap();
        assert_eq!(load_template(&p).unwrap(), t);
        assert!(matches!(
            load_template(&dir.path().join("missing")),
            Err(FormatError::Io { .. })
        ));
    }
}
