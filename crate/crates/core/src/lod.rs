//! Distance-based level-of-detail selection.
//!
//! Intervals are half-open with each boundary belonging to the coarser level:
//! thresholds (5, 10) map [0, 5) → 0, [5, 10) → 1 and [10, ∞) → 2.

use glam::Vec3;

use crate::error::LodError;

/// Default thresholds in meters.
pub const DEFAULT_THRESHOLDS: [f32; 2] = [5.0, 10.0];

#[derive(Clone, Debug, PartialEq)]
pub struct LodPolicy {
    thresholds: Vec<f32>,
    hysteresis_band: f32,
}

impl Default for LodPolicy {
    fn default() -> Self {
        LodPolicy {
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            hysteresis_band: 0.0,
        }
    }
}

impl LodPolicy {
    pub fn new(thresholds: Vec<f32>, hysteresis_band: f32) -> Result<Self, LodError> {
        if thresholds.iter().any(|t| !t.is_finite() || *t <= 0.0)
            || thresholds.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(LodError::UnsortedThresholds);
        }
        if !(hysteresis_band >= 0.0 && hysteresis_band.is_finite()) {
            return Err(LodError::InvalidBand(hysteresis_band));
        }
        Ok(LodPolicy {
            thresholds,
            hysteresis_band,
        })
    }

    pub fn thresholds(&self) -> &[f32] {
        &self.thresholds
    }

    pub fn hysteresis_band(&self) -> f32 {
        self.hysteresis_band
    }

    pub fn level_count(&self) -> usize {
        self.thresholds.len() + 1
    }
}

/// Level for an instance `distance` meters away. With a hysteresis band and a
/// previous level, every boundary is pushed `band / 2` away from the previous
/// level, so small oscillations around a boundary keep the current level.
pub fn select_lod(policy: &LodPolicy, distance: f32, previous_level: Option<usize>) -> usize {
    let half = 0.5 * policy.hysteresis_band;
    policy
        .thresholds
        .iter()
        .enumerate()
        .filter(|&(i, &t)| {
            let boundary = match previous_level {
                Some(prev) if half > 0.0 => {
                    if i >= prev {
                        t + half
                    } else {
                        t - half
                    }
                }
                _ => t,
            };
            distance >= boundary
        })
        .count()
}

/// Euclidean distance from the camera to an instance root.
pub fn instance_distance(instance_root: Vec3, camera_position: Vec3) -> f32 {
    instance_root.distance(camera_position)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_and_ten_meter_thresholds() {
        let p = LodPolicy::default();
        assert_eq!(select_lod(&p, 4.9, None), 0);
        assert_eq!(select_lod(&p, 5.0, None), 1);
        assert_eq!(select_lod(&p, 7.0, None), 1);
        assert_eq!(select_lod(&p, 10.0, None), 2);
        assert_eq!(select_lod(&p, 12.0, None), 2);
        assert_eq!(select_lod(&p, 0.0, None), 0);
    }

    #[test]
    fn hysteresis_shifts_boundary() {
        let p = LodPolicy::new(vec![5.0, 10.0], 1.0).unwrap();
        assert_eq!(select_lod(&p, 5.3, Some(0)), 0);
        assert_eq!(select_lod(&p, 5.6, Some(0)), 1);
        assert_eq!(select_lod(&p, 4.7, Some(1)), 1);
        assert_eq!(select_lod(&p, 4.4, Some(1)), 0);
        // without a previous level the band is ignored
        assert_eq!(select_lod(&p, 5.3, None), 1);
    }

    #[test]
    fn policy_validation() {
        assert!(LodPolicy::new(vec![10.0, 5.0], 0.0).is_err());
        assert!(LodPolicy::new(vec![5.0, 5.0], 0.0).is_err());
        assert!(LodPolicy::new(vec![5.0], -1.0).is_err());
        assert!(LodPolicy::new(vec![], 0.0).is_ok());
    }

    #[test]
    fn distances() {
        assert_eq!(instance_distance(Vec3::ONE, Vec3::ONE), 0.0);
        assert_eq!(instance_distance(Vec3::ZERO, Vec3::new(3.0, 4.0, 0.0)), 5.0);
    }
}
