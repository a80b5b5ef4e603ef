use glam::{Mat3, Quat, Vec3};

use super::skeleton::Skeleton;
use crate::error::AvatarError;
use crate::math::covariance_unchecked;

pub const INFLUENCES: usize = 4;

const WEIGHT_SUM_TOLERANCE: f32 = 1e-5;
const QUAT_NORM_TOLERANCE: f32 = 1e-6;

/// One resolution of an avatar: canonical (bind-pose) Gaussians and their
/// skinning data. All arrays have the same length.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LodLevel {
    pub means: Vec<Vec3>,
    pub rotations: Vec<Quat>,
    pub scales: Vec<Vec3>,
    pub opacities: Vec<f32>,
    pub colors: Vec<Vec3>,
    pub skin_indices: Vec<[u16; INFLUENCES]>,
    pub skin_weights: Vec<[f32; INFLUENCES]>,
}

impl LodLevel {
    pub fn gaussian_count(&self) -> usize {
        self.means.len()
    }

    /// Rescales weight tuples whose sum drifted from 1. Tuples with a
    /// non-positive or non-finite sum are left for [`LodLevel::validate`] to reject.
    pub fn renormalize_weights(&mut self) {
        for w in &mut self.skin_weights {
            let sum: f32 = w.iter().sum();
            if sum.is_finite() && sum > 0.0 && (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                for v in w.iter_mut() {
                    *v /= sum;
                }
            }
        }
    }

    pub fn validate(&self, joint_count: usize) -> Result<(), String> {
        let n = self.means.len();
        if n == 0 {
            return Err("level has no gaussians".into());
        }
        let lens = [
            ("rotations", self.rotations.len()),
            ("scales", self.scales.len()),
            ("opacities", self.opacities.len()),
            ("colors", self.colors.len()),
            ("skin_indices", self.skin_indices.len()),
            ("skin_weights", self.skin_weights.len()),
        ];
        for (name, len) in lens {
            if len != n {
                return Err(format!("{name} has {len} entries, means has {n}"));
            }
        }
        for i in 0..n {
            if !self.means[i].is_finite() {
                return Err(format!("gaussian {i}: non-finite mean"));
            }
            let q = self.rotations[i];
            if !q.is_finite() || (q.length() - 1.0).abs() > QUAT_NORM_TOLERANCE {
                return Err(format!("gaussian {i}: rotation is not a unit quaternion"));
            }
            let s = self.scales[i];
            if !s.is_finite() || s.min_element() <= 0.0 {
                return Err(format!("gaussian {i}: scale must be positive"));
            }
            let o = self.opacities[i];
            if !(o > 0.0 && o <= 1.0) {
                return Err(format!("gaussian {i}: opacity {o} outside (0, 1]"));
            }
            let c = self.colors[i];
            if !c.is_finite() || c.min_element() < 0.0 || c.max_element() > 1.0 {
                return Err(format!("gaussian {i}: color outside [0, 1]"));
            }
            if let Some(j) = self.skin_indices[i]
                .iter()
                .find(|&&j| j as usize >= joint_count)
            {
                return Err(format!("gaussian {i}: joint index {j} >= {joint_count}"));
            }
            let w = self.skin_weights[i];
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(format!("gaussian {i}: negative or non-finite skin weight"));
            }
            let sum: f32 = w.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                return Err(format!("gaussian {i}: skin weights sum to {sum}"));
            }
        }
        Ok(())
    }
}

/// A character identity: skeleton plus an ordered set of resolutions, finest
/// first. Immutable once built.
#[derive(Clone, Debug)]
pub struct AvatarTemplate {
    skeleton: Skeleton,
    levels: Vec<LodLevel>,
    covariances: Vec<Vec<Mat3>>,
    bind_center: Vec3,
}

impl PartialEq for AvatarTemplate {
    fn eq(&self, other: &Self) -> bool {
        self.skeleton == other.skeleton && self.levels == other.levels
    }
}

impl AvatarTemplate {
    pub fn new(skeleton: Skeleton, levels: Vec<LodLevel>) -> Result<Self, AvatarError> {
        if levels.is_empty() {
            return Err(AvatarError::InvalidTemplate(
                "template has no levels".into(),
            ));
        }
        if levels.len() > u8::MAX as usize {
            return Err(AvatarError::InvalidTemplate("too many levels".into()));
        }
        for (i, level) in levels.iter().enumerate() {
            level
                .validate(skeleton.joint_count())
                .map_err(|reason| AvatarError::InvalidLevel { level: i, reason })?;
        }
        if let Some(w) = levels
            .windows(2)
            .find(|w| w[1].gaussian_count() >= w[0].gaussian_count())
        {
            return Err(AvatarError::InvalidTemplate(format!(
                "level counts must strictly decrease ({} then {})",
                w[0].gaussian_count(),
                w[1].gaussian_count()
            )));
        }
        let covariances = levels
            .iter()
            .map(|l| {
                l.rotations
                    .iter()
                    .zip(&l.scales)
                    .map(|(q, s)| covariance_unchecked(*q, *s))
                    .collect()
            })
            .collect();
        let finest = &levels[0].means;
        let (lo, hi) = finest.iter().fold(
            (Vec3::splat(f32::MAX), Vec3::splat(f32::MIN)),
            |(lo, hi), p| (lo.min(*p), hi.max(*p)),
        );
        Ok(AvatarTemplate {
            skeleton,
            levels,
            covariances,
            bind_center: 0.5 * (lo + hi),
        })
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn levels(&self) -> &[LodLevel] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> &LodLevel {
        &self.levels[index]
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn level_counts(&self) -> Vec<usize> {
        self.levels.iter().map(LodLevel::gaussian_count).collect()
    }

    pub fn max_gaussian_count(&self) -> usize {
        self.levels[0].gaussian_count()
    }

    /// Canonical-space covariances of a level, derived from its rotations and scales.
    pub fn covariances(&self, level: usize) -> &[Mat3] {
        &self.covariances[level]
    }

    /// Center of the finest level's bounding box in canonical space.
    pub fn bind_center(&self) -> Vec3 {
        self.bind_center
    }

    /// Index of the level holding exactly `count` gaussians.
    pub fn level_with_count(&self, count: usize) -> Option<usize> {
        self.levels.iter().position(|l| l.gaussian_count() == count)
    }
}
