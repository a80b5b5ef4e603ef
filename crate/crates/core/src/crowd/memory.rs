//! Byte-exact memory accounting for naive vs shared-attribute instancing.
//!
//! Naive instancing copies every per-Gaussian channel into each character and
//! keeps the loaded template's canonical means as the skinning source. Shared
//! instancing keeps one copy of every channel per resident (template, level)
//! and gives each character only a posed-mean buffer.

use std::collections::BTreeSet;

use crate::crowd::Crowd;

pub const MIB: f64 = 1024.0 * 1024.0;

/// Per-Gaussian byte cost of each attribute channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemoryLayoutModel {
    pub mean: u64,
    pub rotation: u64,
    pub scale: u64,
    pub opacity: u64,
    pub color: u64,
    pub skin_indices: u64,
    pub skin_weights: u64,
    pub fixed_overhead_bytes: u64,
}

impl Default for MemoryLayoutModel {
    fn default() -> Self {
        MemoryLayoutModel {
            mean: 12,
            rotation: 16,
            scale: 12,
            opacity: 4,
            color: 12,
            skin_indices: 8,
            skin_weights: 16,
            fixed_overhead_bytes: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    CanonicalMean,
    PosedMean,
    Rotation,
    Scale,
    Opacity,
    Color,
    SkinIndices,
    SkinWeights,
}

impl Channel {
    pub const ALL: [Channel; 8] = [
        Channel::CanonicalMean,
        Channel::PosedMean,
        Channel::Rotation,
        Channel::Scale,
        Channel::Opacity,
        Channel::Color,
        Channel::SkinIndices,
        Channel::SkinWeights,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::CanonicalMean => "canonical_mean",
            Channel::PosedMean => "posed_mean",
            Channel::Rotation => "rotation",
            Channel::Scale => "scale",
            Channel::Opacity => "opacity",
            Channel::Color => "color",
            Channel::SkinIndices => "skin_indices",
            Channel::SkinWeights => "skin_weights",
        }
    }
}

impl MemoryLayoutModel {
    pub fn validate(&self) -> Result<(), String> {
        let sizes = [
            self.mean,
            self.rotation,
            self.scale,
            self.opacity,
            self.color,
            self.skin_indices,
            self.skin_weights,
        ];
        if sizes.contains(&0) {
            return Err("every channel size must be positive".into());
        }
        Ok(())
    }

    pub fn channel_bytes(&self, c: Channel) -> u64 {
        match c {
            Channel::CanonicalMean | Channel::PosedMean => self.mean,
            Channel::Rotation => self.rotation,
            Channel::Scale => self.scale,
            Channel::Opacity => self.opacity,
            Channel::Color => self.color,
            Channel::SkinIndices => self.skin_indices,
            Channel::SkinWeights => self.skin_weights,
        }
    }

    /// Bytes of one full Gaussian record (80 with the default layout).
    pub fn per_gaussian_bytes(&self) -> u64 {
        self.mean + self.pose_independent_bytes()
    }

    /// Channels that never change with pose.
    pub fn pose_independent_bytes(&self) -> u64 {
        self.rotation
            + self.scale
            + self.opacity
            + self.color
            + self.skin_indices
            + self.skin_weights
    }

    /// Whether channel `c` is stored once per instance in `mode`.
    fn per_instance(c: Channel, mode: MemoryMode) -> bool {
        match (c, mode) {
            (Channel::CanonicalMean, _) => false,
            (Channel::PosedMean, _) => true,
            (_, MemoryMode::Naive) => true,
            (_, MemoryMode::Shared) => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MemoryMode {
    Naive,
    Shared,
}

impl MemoryMode {
    pub fn label(self) -> &'static str {
        match self {
            MemoryMode::Naive => "naive",
            MemoryMode::Shared => "shared",
        }
    }
}

/// One character of a population: which template level it renders.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PopulationEntry {
    pub template_id: usize,
    pub level: usize,
    pub gaussian_count: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChannelBytes {
    pub channel: Channel,
    pub naive: u64,
    pub shared: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryReport {
    pub mode: MemoryMode,
    pub instance_count: usize,
    pub naive_bytes: u64,
    pub shared_bytes: u64,
    pub savings_fraction: f64,
    pub naive_marginal_per_character: f64,
    pub shared_marginal_per_character: f64,
    pub breakdown: Vec<ChannelBytes>,
}

impl MemoryReport {
    pub fn total(&self, mode: MemoryMode) -> u64 {
        match mode {
            MemoryMode::Naive => self.naive_bytes,
            MemoryMode::Shared => self.shared_bytes,
        }
    }

    /// Total bytes of the report's own mode.
    pub fn bytes(&self) -> u64 {
        self.total(self.mode)
    }

    pub fn from_population(
        model: &MemoryLayoutModel,
        population: &[PopulationEntry],
        mode: MemoryMode,
    ) -> Self {
        let instance_gaussians: u64 = population.iter().map(|p| p.gaussian_count).sum();
        let residents: BTreeSet<(usize, usize, u64)> = population
            .iter()
            .map(|p| (p.template_id, p.level, p.gaussian_count))
            .collect();
        let resident_gaussians: u64 = residents.iter().map(|r| r.2).sum();

        let breakdown: Vec<ChannelBytes> = Channel::ALL
            .iter()
            .map(|&c| {
                let size = model.channel_bytes(c);
                let charge = |m: MemoryMode| {
                    if MemoryLayoutModel::per_instance(c, m) {
                        size * instance_gaussians
                    } else {
                        size * resident_gaussians
                    }
                };
                ChannelBytes {
                    channel: c,
                    naive: charge(MemoryMode::Naive),
                    shared: charge(MemoryMode::Shared),
                }
            })
            .collect();
        let naive_bytes =
            model.fixed_overhead_bytes + breakdown.iter().map(|b| b.naive).sum::<u64>();
        let shared_bytes =
            model.fixed_overhead_bytes + breakdown.iter().map(|b| b.shared).sum::<u64>();
        let savings_fraction = if naive_bytes == 0 {
            0.0
        } else {
            1.0 - shared_bytes as f64 / naive_bytes as f64
        };
        let (naive_marginal, shared_marginal) = if population.is_empty() {
            (0.0, 0.0)
        } else {
            let mean_n = instance_gaussians as f64 / population.len() as f64;
            (
                mean_n * model.per_gaussian_bytes() as f64,
                mean_n * model.mean as f64,
            )
        };
        MemoryReport {
            mode,
            instance_count: population.len(),
            naive_bytes,
            shared_bytes,
            savings_fraction,
            naive_marginal_per_character: naive_marginal,
            shared_marginal_per_character: shared_marginal,
            breakdown,
        }
    }
}

/// Memory report for the crowd at its current (active) levels.
pub fn memory_report(crowd: &Crowd, model: &MemoryLayoutModel, mode: MemoryMode) -> MemoryReport {
    MemoryReport::from_population(model, &crowd.population(), mode)
}

/// (naive, shared) bytes for `characters` instances of one template level.
pub fn layout_totals(
    model: &MemoryLayoutModel,
    gaussian_count: u64,
    characters: usize,
) -> (u64, u64) {
    let population = vec![
        PopulationEntry {
            template_id: 0,
            level: 0,
            gaussian_count,
        };
        characters
    ];
    let r = MemoryReport::from_population(model, &population, MemoryMode::Shared);
    (r.naive_bytes, r.shared_bytes)
}

/// `intercept + slope · x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineFit {
    pub intercept: f64,
    pub slope: f64,
}

impl AffineFit {
    pub fn through(p0: (f64, f64), p1: (f64, f64)) -> Self {
        let slope = (p1.1 - p0.1) / (p1.0 - p0.0);
        AffineFit {
            intercept: p0.1 - slope * p0.0,
            slope,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// One measured column entry: total MiB at a character count, both modes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableCell {
    pub characters: usize,
    pub naive_mib: f64,
    pub shared_mib: f64,
}

/// Layout model calibrated against whole-process measurements.
///
/// The fixed overhead absorbs the first cell's residual (identical in both modes
/// when that cell holds one character). Measured per-character growth beyond
/// what the attribute layout explains is carried per mode as
/// `extra_per_character`, so the calibrated curves pass through both cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FittedMemoryModel {
    pub layout: MemoryLayoutModel,
    pub gaussian_count: u64,
    pub first_characters: usize,
    pub naive_extra_per_character: f64,
    pub shared_extra_per_character: f64,
}

impl FittedMemoryModel {
    pub fn fit(
        layout: MemoryLayoutModel,
        gaussian_count: u64,
        first: TableCell,
        last: TableCell,
    ) -> Self {
        let base = MemoryLayoutModel {
            fixed_overhead_bytes: 0,
            ..layout
        };
        let (n0, s0) = layout_totals(&base, gaussian_count, first.characters);
        let (n1, s1) = layout_totals(&base, gaussian_count, last.characters);
        let residual_naive0 = first.naive_mib * MIB - n0 as f64;
        let residual_shared0 = first.shared_mib * MIB - s0 as f64;
        let overhead = (0.5 * (residual_naive0 + residual_shared0)).max(0.0);
        let span = (last.characters - first.characters) as f64;
        let naive_extra = (last.naive_mib * MIB - n1 as f64 - overhead) / span;
        let shared_extra = (last.shared_mib * MIB - s1 as f64 - overhead) / span;
        FittedMemoryModel {
            layout: MemoryLayoutModel {
                fixed_overhead_bytes: overhead.round() as u64,
                ..layout
            },
            gaussian_count,
            first_characters: first.characters,
            naive_extra_per_character: naive_extra,
            shared_extra_per_character: shared_extra,
        }
    }

    /// Predicted total bytes at `characters`.
    pub fn predict(&self, mode: MemoryMode, characters: usize) -> f64 {
        let (n, s) = layout_totals(&self.layout, self.gaussian_count, characters);
        let extra = characters as f64 - self.first_characters as f64;
        match mode {
            MemoryMode::Naive => n as f64 + self.naive_extra_per_character * extra,
            MemoryMode::Shared => s as f64 + self.shared_extra_per_character * extra,
        }
    }

    /// Bytes added per extra character in the calibrated model.
    pub fn marginal_per_character(&self, mode: MemoryMode) -> f64 {
        let n = self.gaussian_count as f64;
        match mode {
            MemoryMode::Naive => {
                n * self.layout.per_gaussian_bytes() as f64 + self.naive_extra_per_character
            }
            MemoryMode::Shared => n * self.layout.mean as f64 + self.shared_extra_per_character,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pop(k: usize, n: u64) -> Vec<PopulationEntry> {
        vec![
            PopulationEntry {
                template_id: 0,
                level: 0,
                gaussian_count: n,
            };
            k
        ]
    }

    #[test]
    fn default_layout_is_80_bytes() {
        let m = MemoryLayoutModel::default();
        assert_eq!(m.per_gaussian_bytes(), 80);
        assert!(m.validate().is_ok());
        assert!(MemoryLayoutModel { color: 0, ..m }.validate().is_err());
    }

    #[test]
    fn hundred_instances_hand_arithmetic() {
        let m = MemoryLayoutModel::default();
        let n = 1000u64;
        let r = MemoryReport::from_population(&m, &pop(100, n), MemoryMode::Shared);
        // naive: 100 full records plus the template's canonical means
        assert_eq!(r.naive_bytes, 100 * 80 * n + 12 * n);
        // shared: one resident template plus one posed buffer per character
        assert_eq!(r.shared_bytes, 80 * n + 100 * 12 * n);
        assert!((r.savings_fraction - (1.0 - 1280.0 / 8012.0)).abs() < 1e-12);
        assert!(r.savings_fraction > 0.84);
    }

    #[test]
    fn single_instance_modes_coincide() {
        let m = MemoryLayoutModel::default();
        let r = MemoryReport::from_population(&m, &pop(1, 500), MemoryMode::Naive);
        assert_eq!(r.naive_bytes, 92 * 500);
        assert_eq!(r.shared_bytes, 92 * 500);
        assert_eq!(r.naive_bytes - r.shared_bytes, 0);
    }

    #[test]
    fn empty_population_is_overhead_only() {
        let m = MemoryLayoutModel {
            fixed_overhead_bytes: 777,
            ..Default::default()
        };
        let r = MemoryReport::from_population(&m, &[], MemoryMode::Shared);
        assert_eq!((r.naive_bytes, r.shared_bytes), (777, 777));
    }

    #[test]
    fn breakdown_sums_to_totals() {
        let m = MemoryLayoutModel::default();
        let mut p = pop(3, 100);
        p.push(PopulationEntry {
            template_id: 1,
            level: 2,
            gaussian_count: 7,
        });
        let r = MemoryReport::from_population(&m, &p, MemoryMode::Naive);
        assert_eq!(
            r.breakdown.iter().map(|b| b.naive).sum::<u64>(),
            r.naive_bytes
        );
        assert_eq!(
            r.breakdown.iter().map(|b| b.shared).sum::<u64>(),
            r.shared_bytes
        );
    }

    #[test]
    fn affine_fit() {
        let f = AffineFit::through((1.0, 567.0), (5000.0, 21_340.0));
        assert!((f.eval(1.0) - 567.0).abs() < 1e-9);
        assert!((f.eval(5000.0) - 21_340.0).abs() < 1e-9);
        assert!((f.slope - 20_773.0 / 4999.0).abs() < 1e-12);
    }
}
