//! Linear Blend Skinning of Gaussian means (and optionally rotations).

use glam::{Mat3, Mat4, Quat, Vec3};
use rayon::prelude::*;

use super::template::LodLevel;

/// Gaussians per parallel work item.
const CHUNK: usize = 4096;

/// `world[j] · inverse_bind[j]` for every joint, optionally pre-multiplied by a
/// placement transform.
pub fn skinning_matrices(
    world: &[Mat4],
    inverse_bind: &[Mat4],
    placement: Option<&Mat4>,
) -> Vec<Mat4> {
    world
        .iter()
        .zip(inverse_bind)
        .map(|(w, ib)| match placement {
            Some(root) => *root * (*w * *ib),
            None => *w * *ib,
        })
        .collect()
}

#[inline]
fn skin_point(p: Vec3, idx: &[u16; 4], w: &[f32; 4], mats: &[Mat4]) -> Vec3 {
    let mut out = Vec3::ZERO;
    for k in 0..4 {
        if w[k] != 0.0 {
            out += w[k] * mats[idx[k] as usize].transform_point3(p);
        }
    }
    out
}

/// Posed means `Σₖ wₖ · (world · inverse_bind)[idxₖ] · canonical`.
pub fn skin_means(level: &LodLevel, world: &[Mat4], inverse_bind: &[Mat4]) -> Vec<Vec3> {
    let mats = skinning_matrices(world, inverse_bind, None);
    let mut out = vec![Vec3::ZERO; level.gaussian_count()];
    skin_means_into(level, &mats, &mut out);
    out
}

/// Writes posed means into `out` (length = gaussian count) using precomputed
/// skinning matrices.
pub fn skin_means_into(level: &LodLevel, mats: &[Mat4], out: &mut [Vec3]) {
    assert_eq!(out.len(), level.gaussian_count());
    let body = |(chunk_idx, out): (usize, &mut [Vec3])| {
        let base = chunk_idx * CHUNK;
        for (i, o) in out.iter_mut().enumerate() {
            let g = base + i;
            *o = skin_point(
                level.means[g],
                &level.skin_indices[g],
                &level.skin_weights[g],
                mats,
            );
        }
    };
    if out.len() > 4 * CHUNK {
        out.par_chunks_mut(CHUNK).enumerate().for_each(body);
    } else {
        out.chunks_mut(CHUNK).enumerate().for_each(body);
    }
}

/// Applies one rigid transform to every canonical mean (the bind-pose shortcut).
pub fn transform_means_into(level: &LodLevel, placement: &Mat4, out: &mut [Vec3]) {
    assert_eq!(out.len(), level.gaussian_count());
    for (o, p) in out.iter_mut().zip(&level.means) {
        *o = placement.transform_point3(*p);
    }
}

/// Weight-blended joint rotation composed with each Gaussian's canonical
/// rotation, renormalized.
pub fn skin_rotations_into(level: &LodLevel, mats: &[Mat4], out: &mut [Quat]) {
    assert_eq!(out.len(), level.gaussian_count());
    let joint_rots: Vec<Quat> = mats
        .iter()
        .map(|m| Quat::from_mat3(&Mat3::from_mat4(*m)).normalize())
        .collect();
    for (g, o) in out.iter_mut().enumerate() {
        let idx = &level.skin_indices[g];
        let w = &level.skin_weights[g];
        let reference = joint_rots[idx[0] as usize];
        let mut acc = Quat::from_xyzw(0.0, 0.0, 0.0, 0.0);
        for k in 0..4 {
            if w[k] != 0.0 {
                let mut q = joint_rots[idx[k] as usize];
                if q.dot(reference) < 0.0 {
                    q = -q;
                }
                acc += q * w[k];
            }
        }
        let blended = acc.try_normalize().unwrap_or(Quat::IDENTITY);
        *o = (blended * level.rotations[g]).normalize();
    }
}

trait TryNormalize {
    fn try_normalize(self) -> Option<Quat>;
}

impl TryNormalize for Quat {
    fn try_normalize(self) -> Option<Quat> {
        let len = self.length();
        if len > 1e-12 && len.is_finite() {
            Some(self * (1.0 / len))
        } else {
            None
        }
    }
}
