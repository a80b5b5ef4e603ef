//! Procedural humanoid templates standing in for reconstructed avatars.
//!
//! The body is ten ellipsoids (torso, head, two segments per limb) whose
//! surfaces are sampled by normalizing Gaussian random vectors. Skin weights
//! follow the owning segment and blend into the neighbouring joint near the
//! segment ends.

use glam::{Mat3, Quat, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::skeleton::Skeleton;
use super::smpl::{self, *};
use super::template::{AvatarTemplate, LodLevel};
use crate::error::AvatarError;

/// Opacity shared by every generated Gaussian.
pub const SYNTHETIC_OPACITY: f32 = 0.85;
/// σ relative to the spacing √(area / count) of uniformly spread samples.
const COVERAGE: f32 = 0.9;
/// Period of the detail pattern painted on the surface (meters).
const STRIPE_PERIOD: f32 = 0.06;

#[derive(Clone, Copy)]
enum Weighting {
    /// Blend along the spine by height.
    Spine,
    /// Mostly the head joint, sharing weight with the neck near the base.
    Head,
    /// Segment from `start` to `end`; blends with the parent of `start` and
    /// with `end` near the extremities.
    Segment { start: usize, end: usize },
}

struct Part {
    center: Vec3,
    radii: Vec3,
    orientation: Mat3,
    weighting: Weighting,
    base_color: Vec3,
}

fn segment_part(start: usize, end: usize, radius: f32, overshoot: f32, color: Vec3) -> Part {
    let a = smpl::rest_position(start);
    let b = smpl::rest_position(end);
    let axis = b - a;
    let len = axis.length();
    let dir = axis / len;
    // columns: two perpendicular directions and the segment axis in y
    let helper = if dir.x.abs() < 0.9 { Vec3::X } else { Vec3::Z };
    let u = helper.cross(dir).normalize();
    let v = dir.cross(u);
    Part {
        center: 0.5 * (a + b),
        radii: Vec3::new(radius, 0.5 * len + overshoot, radius),
        orientation: Mat3::from_cols(u, dir, v),
        weighting: Weighting::Segment { start, end },
        base_color: color,
    }
}

fn body_parts(palette: &[Vec3; 4]) -> Vec<Part> {
    let [skin, shirt, pants, sleeve] = *palette;
    vec![
        Part {
            center: Vec3::new(0.0, 1.17, 0.0),
            radii: Vec3::new(0.17, 0.30, 0.11),
            orientation: Mat3::IDENTITY,
            weighting: Weighting::Spine,
            base_color: shirt,
        },
        Part {
            center: Vec3::new(0.0, 1.63, 0.02),
            radii: Vec3::new(0.085, 0.115, 0.10),
            orientation: Mat3::IDENTITY,
            weighting: Weighting::Head,
            base_color: skin,
        },
        segment_part(L_SHOULDER, L_ELBOW, 0.05, 0.03, sleeve),
        segment_part(R_SHOULDER, R_ELBOW, 0.05, 0.03, sleeve),
        segment_part(L_ELBOW, L_HAND, 0.04, 0.03, skin),
        segment_part(R_ELBOW, R_HAND, 0.04, 0.03, skin),
        segment_part(L_HIP, L_KNEE, 0.075, 0.03, pants),
        segment_part(R_HIP, R_KNEE, 0.075, 0.03, pants),
        segment_part(L_KNEE, L_ANKLE, 0.055, 0.05, pants),
        segment_part(R_KNEE, R_ANKLE, 0.055, 0.05, pants),
    ]
}

fn ellipsoid_area(r: Vec3) -> f32 {
    // Knud Thomsen's approximation
    let p = 1.6f32;
    let (a, b, c) = (r.x.powf(p), r.y.powf(p), r.z.powf(p));
    4.0 * std::f32::consts::PI * ((a * b + a * c + b * c) / 3.0).powf(1.0 / p)
}

/// Largest-remainder split of `total` proportionally to `weights`.
fn apportion(total: usize, weights: &[f32]) -> Vec<usize> {
    let sum: f32 = weights.iter().sum();
    let exact: Vec<f64> = weights
        .iter()
        .map(|w| total as f64 * (*w as f64) / sum as f64)
        .collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut remaining = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        counts[i] += 1;
        remaining -= 1;
    }
    counts
}

fn spine_weights(y: f32, jc: usize) -> ([u16; 4], [f32; 4]) {
    const CHAIN: [usize; 5] = [PELVIS, SPINE1, SPINE2, SPINE3, NECK];
    let heights: Vec<f32> = CHAIN.iter().map(|j| smpl::rest_position(*j).y).collect();
    let (a, b, t) = if y <= heights[0] {
        (0, 0, 0.0)
    } else if y >= heights[4] {
        (4, 4, 0.0)
    } else {
        let k = heights.windows(2).position(|w| y < w[1]).unwrap_or(3);
        (k, k + 1, (y - heights[k]) / (heights[k + 1] - heights[k]))
    };
    pair_weights(CHAIN[a], CHAIN[b], t, jc)
}

fn pair_weights(a: usize, b: usize, t: f32, jc: usize) -> ([u16; 4], [f32; 4]) {
    let ja = smpl::clamp_joint(a, jc) as u16;
    let jb = smpl::clamp_joint(b, jc) as u16;
    if ja == jb || t <= 0.0 {
        return ([ja, 0, 0, 0], [1.0, 0.0, 0.0, 0.0]);
    }
    let t = t.min(1.0);
    ([ja, jb, 0, 0], [1.0 - t, t, 0.0, 0.0])
}

fn part_weights(part: &Part, p: Vec3, jc: usize) -> ([u16; 4], [f32; 4]) {
    const BLEND: f32 = 0.15;
    match part.weighting {
        Weighting::Spine => spine_weights(p.y, jc),
        Weighting::Head => {
            let neck_y = smpl::rest_position(NECK).y;
            let head_y = smpl::rest_position(HEAD).y;
            let t = ((p.y - neck_y) / (head_y - neck_y)).clamp(0.0, 1.0);
            // mostly head, neck near the base
            pair_weights(NECK, HEAD, 0.5 + 0.5 * t, jc)
        }
        Weighting::Segment { start, end } => {
            let a = smpl::rest_position(start);
            let b = smpl::rest_position(end);
            let s = ((p - a).dot(b - a) / (b - a).length_squared()).clamp(0.0, 1.0);
            if s < BLEND {
                let parent = smpl::parent_of(start).unwrap_or(PELVIS);
                let w_parent = 0.5 * (BLEND - s) / BLEND;
                pair_weights(start, parent, w_parent, jc)
            } else if s > 1.0 - BLEND {
                let w_end = 0.5 * (s - (1.0 - BLEND)) / BLEND;
                pair_weights(start, end, w_end, jc)
            } else {
                pair_weights(start, start, 0.0, jc)
            }
        }
    }
}

fn template_palette(rng: &mut ChaCha8Rng) -> [Vec3; 4] {
    let mut pick = |lo: f32, hi: f32| {
        Vec3::new(
            rng.random_range(lo..hi),
            rng.random_range(lo..hi),
            rng.random_range(lo..hi),
        )
    };
    let skin_tone = pick(0.35, 0.85);
    let skin = Vec3::new(skin_tone.x, skin_tone.x * 0.78, skin_tone.x * 0.62);
    [skin, pick(0.05, 0.95), pick(0.03, 0.6), pick(0.05, 0.95)]
}

fn skeleton_for(joint_count: usize) -> Result<Skeleton, AvatarError> {
    let parents = (0..joint_count).map(smpl::parent_of).collect();
    let positions: Vec<Vec3> = (0..joint_count).map(smpl::position_of).collect();
    Skeleton::from_joint_positions(parents, &positions)
}

/// Builds a deterministic multi-resolution humanoid. Level `i` holds exactly
/// `level_counts[i]` Gaussians.
pub fn generate_synthetic_template(
    seed: u64,
    level_counts: &[usize],
    joint_count: usize,
) -> Result<AvatarTemplate, AvatarError> {
    if level_counts.is_empty() {
        return Err(AvatarError::InvalidCounts(
            "at least one level is required".into(),
        ));
    }
    if level_counts.contains(&0) {
        return Err(AvatarError::InvalidCounts(
            "every level needs at least one gaussian".into(),
        ));
    }
    if level_counts.windows(2).any(|w| w[1] >= w[0]) {
        return Err(AvatarError::InvalidCounts(format!(
            "counts must be strictly decreasing, got {level_counts:?}"
        )));
    }
    if joint_count == 0 || joint_count > u16::MAX as usize {
        return Err(AvatarError::InvalidCounts(format!(
            "unsupported joint count {joint_count}"
        )));
    }
    let skeleton = skeleton_for(joint_count)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let palette = template_palette(&mut rng);
    let parts = body_parts(&palette);
    let areas: Vec<f32> = parts.iter().map(|p| ellipsoid_area(p.radii)).collect();
    let total_area: f32 = areas.iter().sum();
    let stripe_phase = rng.random_range(0.0f32..std::f32::consts::TAU);
    let stripe_depth = rng.random_range(0.25f32..0.45);

    let levels = level_counts
        .iter()
        .enumerate()
        .map(|(li, &count)| {
            // independent stream per level so levels do not depend on each other
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(li as u64 + 1)),
            );
            let sigma = COVERAGE * (total_area / count as f32).sqrt();
            let per_part = apportion(count, &areas);
            let mut level = LodLevel::default();
            for (part, &n) in parts.iter().zip(&per_part) {
                for _ in 0..n {
                    let dir = loop {
                        let v = Vec3::new(
                            rng.sample(StandardNormal),
                            rng.sample(StandardNormal),
                            rng.sample(StandardNormal),
                        );
                        if let Some(d) = v.try_normalize() {
                            break d;
                        }
                    };
                    let shell = 1.0 - 0.12 * rng.random::<f32>();
                    let local = dir * part.radii * shell;
                    let p = part.center + part.orientation * local;
                    let (idx, w) = part_weights(part, p, joint_count);
                    let pattern = 1.0
                        - stripe_depth
                            * (0.5
                                + 0.5
                                    * (std::f32::consts::TAU * p.y / STRIPE_PERIOD + stripe_phase)
                                        .sin());
                    let noise = Vec3::new(
                        rng.random_range(-0.04f32..0.04),
                        rng.random_range(-0.04f32..0.04),
                        rng.random_range(-0.04f32..0.04),
                    );
                    let color = (part.base_color * pattern + noise).clamp(Vec3::ZERO, Vec3::ONE);
                    let s = sigma * rng.random_range(0.8f32..1.2);
                    level.means.push(p);
                    level.rotations.push(Quat::IDENTITY);
                    level.scales.push(Vec3::splat(s));
                    level.opacities.push(SYNTHETIC_OPACITY);
                    level.colors.push(color);
                    level.skin_indices.push(idx);
                    level.skin_weights.push(w);
                }
            }
            level
        })
        .collect();
    AvatarTemplate::new(skeleton, levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apportion_preserves_total() {
        for total in [1, 7, 10, 3176, 12661] {
            let c = apportion(total, &[3.0, 1.0, 2.5, 0.1]);
            assert_eq!(c.iter().sum::<usize>(), total);
        }
    }

    #[test]
    fn exact_level_counts() {
        let t = generate_synthetic_template(42, &[2000, 300, 40], 24).unwrap();
        assert_eq!(t.level_counts(), vec![2000, 300, 40]);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic_template(7, &[500, 50], 24).unwrap();
        let b = generate_synthetic_template(7, &[500, 50], 24).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_template(8, &[500, 50], 24).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_counts() {
        assert!(generate_synthetic_template(1, &[10, 20], 24).is_err());
        assert!(generate_synthetic_template(1, &[], 24).is_err());
        assert!(generate_synthetic_template(1, &[10, 0], 24).is_err());
        assert!(generate_synthetic_template(1, &[10], 0).is_err());
    }

    #[test]
    fn generic_joint_counts() {
        for jc in [1, 5, 13, 24, 30] {
            let t = generate_synthetic_template(3, &[200, 20], jc).unwrap();
            assert_eq!(t.skeleton().joint_count(), jc);
        }
    }

    #[test]
    fn finer_levels_use_smaller_gaussians() {
        let t = generate_synthetic_template(11, &[4000, 400, 40], 24).unwrap();
        let mean_scale =
            |l: &LodLevel| l.scales.iter().map(|s| s.x).sum::<f32>() / l.gaussian_count() as f32;
        let s: Vec<f32> = t.levels().iter().map(mean_scale).collect();
        assert!(s[0] < s[1] && s[1] < s[2]);
    }
}
