//! Crowd construction and per-frame animation over shared, read-only assets.

mod memory;

pub use memory::{
    layout_totals, memory_report, AffineFit, Channel, ChannelBytes, FittedMemoryModel,
    MemoryLayoutModel, MemoryMode, MemoryReport, PopulationEntry, TableCell, MIB,
};

use std::sync::Arc;

use glam::{Mat4, Quat, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::avatar::{
    forward_kinematics, sample_pose, skin_means_into, skin_rotations_into, skinning_matrices,
    transform_means_into, AvatarTemplate, MotionClip,
};
use crate::error::{AvatarError, CrowdError};
use crate::lod::{instance_distance, select_lod, LodPolicy};
use crate::math::Camera;

/// Jitter radius as a fraction of the cell spacing.
pub const JITTER_FRACTION: f32 = 0.25;
/// Yaw is drawn from ±this range (radians) around facing +z.
pub const YAW_RANGE: f32 = std::f32::consts::FRAC_PI_4;

/// Immutable template and motion store shared by every instance.
#[derive(Debug)]
pub struct AssetStore {
    templates: Vec<AvatarTemplate>,
    motions: Vec<MotionClip>,
}

impl AssetStore {
    pub fn new(
        templates: Vec<AvatarTemplate>,
        motions: Vec<MotionClip>,
    ) -> Result<Self, CrowdError> {
        if templates.is_empty() {
            return Err(CrowdError::MissingAssets("template"));
        }
        if motions.is_empty() {
            return Err(CrowdError::MissingAssets("motion clip"));
        }
        for (ti, t) in templates.iter().enumerate() {
            for (mi, m) in motions.iter().enumerate() {
                if m.joint_count() != t.skeleton().joint_count() {
                    return Err(CrowdError::SkeletonMismatch {
                        template: ti,
                        joints: t.skeleton().joint_count(),
                        motion: mi,
                        motion_joints: m.joint_count(),
                    });
                }
            }
        }
        Ok(AssetStore { templates, motions })
    }

    pub fn templates(&self) -> &[AvatarTemplate] {
        &self.templates
    }

    pub fn motions(&self) -> &[MotionClip] {
        &self.motions
    }
}

/// Rows of the grid recede along −z from z = 0; columns are centered on x = 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridConfig {
    pub rows: usize,
    pub cols: usize,
    pub spacing_m: f32,
}

impl GridConfig {
    pub fn capacity(&self) -> usize {
        self.rows.saturating_mul(self.cols)
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f32, f32) {
        let x = (col as f32 - 0.5 * (self.cols as f32 - 1.0)) * self.spacing_m;
        let z = -(row as f32) * self.spacing_m;
        (x, z)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrowdConfig {
    pub grid: GridConfig,
    pub count: usize,
    pub lod: LodPolicy,
}

/// Ground-plane placement of one character.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Placement {
    pub x: f32,
    pub z: f32,
    pub yaw: f32,
}

impl Placement {
    pub fn matrix(&self) -> Mat4 {
        Mat4::from_rotation_translation(
            Quat::from_rotation_y(self.yaw),
            Vec3::new(self.x, 0.0, self.z),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnimationMode {
    /// Sample the assigned clip and skin every Gaussian.
    Motion,
    /// Bind pose; canonical means are only placed.
    Static,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrowdInstance {
    pub instance_id: u32,
    pub template_id: usize,
    pub placement: Placement,
    pub motion_id: usize,
    /// Seconds added to the global clock before sampling the clip.
    pub motion_phase_offset: f64,
    active_lod: Option<usize>,
    posed_means: Vec<Vec3>,
    posed_rotations: Vec<Quat>,
}

impl CrowdInstance {
    pub fn new(
        instance_id: u32,
        template_id: usize,
        placement: Placement,
        motion_id: usize,
        phase: f64,
    ) -> Self {
        CrowdInstance {
            instance_id,
            template_id,
            placement,
            motion_id,
            motion_phase_offset: phase,
            active_lod: None,
            posed_means: Vec::new(),
            posed_rotations: Vec::new(),
        }
    }

    /// Level chosen by the last update or LoD pass (0 before any).
    pub fn active_lod(&self) -> usize {
        self.active_lod.unwrap_or(0)
    }

    /// World-space posed means of the active level, valid after an update.
    pub fn posed_means(&self) -> &[Vec3] {
        &self.posed_means
    }

    /// Posed rotations, only filled when rotation skinning is enabled.
    pub fn posed_rotations(&self) -> &[Quat] {
        &self.posed_rotations
    }

    /// World position of the template root joint under this placement.
    pub fn root_position(&self, template: &AvatarTemplate) -> Vec3 {
        self.placement
            .matrix()
            .transform_point3(template.skeleton().bind_position(0))
    }
}

#[derive(Clone, Debug)]
pub struct Crowd {
    assets: Arc<AssetStore>,
    instances: Vec<CrowdInstance>,
    policy: LodPolicy,
    lod_override: Option<usize>,
    skin_rotations: bool,
}

impl Crowd {
    /// A crowd from explicit instances (used for single-character renders).
    pub fn from_instances(
        assets: Arc<AssetStore>,
        instances: Vec<CrowdInstance>,
        policy: LodPolicy,
    ) -> Result<Self, CrowdError> {
        for inst in &instances {
            if inst.template_id >= assets.templates.len() {
                return Err(CrowdError::MissingAssets("template"));
            }
            if inst.motion_id >= assets.motions.len() {
                return Err(CrowdError::MissingAssets("motion clip"));
            }
        }
        Ok(Crowd {
            assets,
            instances,
            policy,
            lod_override: None,
            skin_rotations: false,
        })
    }

    pub fn assets(&self) -> &Arc<AssetStore> {
        &self.assets
    }

    pub fn instances(&self) -> &[CrowdInstance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn policy(&self) -> &LodPolicy {
        &self.policy
    }

    pub fn template_of(&self, inst: &CrowdInstance) -> &AvatarTemplate {
        &self.assets.templates[inst.template_id]
    }

    /// Forces every instance onto one level (clamped per template), bypassing
    /// distance selection. Used by the benchmark matrix.
    pub fn set_lod_override(&mut self, level: Option<usize>) {
        self.lod_override = level;
    }

    pub fn lod_override(&self) -> Option<usize> {
        self.lod_override
    }

    /// Also rotate each Gaussian by its blended joint rotation (off by default:
    /// rotations stay at template values).
    pub fn set_skin_rotations(&mut self, enabled: bool) {
        self.skin_rotations = enabled;
        if !enabled {
            for inst in &mut self.instances {
                inst.posed_rotations = Vec::new();
            }
        }
    }

    pub fn skin_rotations(&self) -> bool {
        self.skin_rotations
    }

    fn choose_level(&self, inst: &CrowdInstance, camera: &Camera) -> usize {
        let template = self.template_of(inst);
        let level = match self.lod_override {
            Some(l) => l,
            None => {
                let d = instance_distance(inst.root_position(template), camera.position);
                select_lod(&self.policy, d, inst.active_lod)
            }
        };
        level.min(template.level_count() - 1)
    }

    /// Re-selects every instance's level without posing anything.
    pub fn select_lods(&mut self, camera: &Camera) {
        let levels: Vec<usize> = self
            .instances
            .iter()
            .map(|i| self.choose_level(i, camera))
            .collect();
        for (inst, l) in self.instances.iter_mut().zip(levels) {
            inst.active_lod = Some(l);
        }
    }

    /// Total Gaussians across the active levels.
    pub fn active_gaussian_count(&self) -> usize {
        self.instances
            .iter()
            .map(|i| self.template_of(i).level(i.active_lod()).gaussian_count())
            .sum()
    }

    /// (template, level, gaussian count) per instance at the current levels.
    pub fn population(&self) -> Vec<PopulationEntry> {
        self.instances
            .iter()
            .map(|i| PopulationEntry {
                template_id: i.template_id,
                level: i.active_lod(),
                gaussian_count: self.template_of(i).level(i.active_lod()).gaussian_count() as u64,
            })
            .collect()
    }
}

/// Places `config.count` instances row-major over the grid, front rows first,
/// with seeded template, motion, phase, yaw and in-cell jitter.
pub fn build_crowd(
    config: &CrowdConfig,
    assets: Arc<AssetStore>,
    seed: u64,
) -> Result<Crowd, CrowdError> {
    let grid = config.grid;
    if config.count > grid.capacity() {
        return Err(CrowdError::InsufficientCapacity {
            rows: grid.rows,
            cols: grid.cols,
            count: config.count,
        });
    }
    if !(grid.spacing_m > 0.0 && grid.spacing_m.is_finite()) {
        return Err(CrowdError::InvalidSpacing(grid.spacing_m));
    }
    if config.count > u32::MAX as usize {
        return Err(CrowdError::InsufficientCapacity {
            rows: grid.rows,
            cols: grid.cols,
            count: config.count,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = JITTER_FRACTION * grid.spacing_m;
    let instances = (0..config.count)
        .map(|i| {
            let (row, col) = (i / grid.cols, i % grid.cols);
            let (cx, cz) = grid.cell_center(row, col);
            let template_id = rng.random_range(0..assets.templates.len());
            let motion_id = rng.random_range(0..assets.motions.len());
            let phase = rng.random_range(0.0..assets.motions[motion_id].duration());
            let yaw = rng.random_range(-YAW_RANGE..=YAW_RANGE);
            // uniform in the jitter disc
            let r = jitter * rng.random::<f32>().sqrt();
            let theta = rng.random_range(0.0..std::f32::consts::TAU);
            let placement = Placement {
                x: cx + r * theta.cos(),
                z: cz + r * theta.sin(),
                yaw,
            };
            CrowdInstance::new(i as u32, template_id, placement, motion_id, phase)
        })
        .collect();
    Crowd::from_instances(assets, instances, config.lod.clone())
}

fn resize_buffer<T: Copy>(buf: &mut Vec<T>, len: usize, fill: T) -> Result<(), CrowdError> {
    if len > buf.len() {
        buf.try_reserve(len - buf.len())
            .map_err(|_| CrowdError::OutOfMemory {
                bytes: len * std::mem::size_of::<T>(),
            })?;
    }
    buf.resize(len, fill);
    Ok(())
}

fn update_instance(
    assets: &AssetStore,
    inst: &mut CrowdInstance,
    level_index: usize,
    time: f64,
    mode: AnimationMode,
    skin_rotations: bool,
) -> Result<(), UpdateError> {
    let template = &assets.templates[inst.template_id];
    let level = template.level(level_index);
    let n = level.gaussian_count();
    inst.active_lod = Some(level_index);
    resize_buffer(&mut inst.posed_means, n, Vec3::ZERO)?;
    let root = inst.placement.matrix();
    match mode {
        AnimationMode::Static => {
            transform_means_into(level, &root, &mut inst.posed_means);
            if skin_rotations {
                resize_buffer(&mut inst.posed_rotations, n, Quat::IDENTITY)?;
                let yaw = Quat::from_rotation_y(inst.placement.yaw);
                for (o, q) in inst.posed_rotations.iter_mut().zip(&level.rotations) {
                    *o = (yaw * *q).normalize();
                }
            }
        }
        AnimationMode::Motion => {
            let clip = &assets.motions[inst.motion_id];
            let pose = sample_pose(clip, time + inst.motion_phase_offset, true)?;
            let skel = template.skeleton();
            let world = forward_kinematics(skel, &pose)?;
            let mats = skinning_matrices(&world, skel.inverse_bind(), Some(&root));
            skin_means_into(level, &mats, &mut inst.posed_means);
            if skin_rotations {
                resize_buffer(&mut inst.posed_rotations, n, Quat::IDENTITY)?;
                skin_rotations_into(level, &mats, &mut inst.posed_rotations);
            }
        }
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum UpdateError {
    #[error(transparent)]
    Crowd(#[from] CrowdError),
    #[error(transparent)]
    Avatar(#[from] AvatarError),
}

/// Re-selects LoD, samples poses and skins every instance at `time` seconds.
pub fn update_crowd(
    crowd: &mut Crowd,
    camera: &Camera,
    time: f64,
    mode: AnimationMode,
) -> Result<(), UpdateError> {
    let levels: Vec<usize> = crowd
        .instances
        .iter()
        .map(|i| crowd.choose_level(i, camera))
        .collect();
    let assets = Arc::clone(&crowd.assets);
    let skin_rotations = crowd.skin_rotations;
    crowd
        .instances
        .par_iter_mut()
        .zip(levels.into_par_iter())
        .try_for_each(|(inst, level)| {
            update_instance(&assets, inst, level, time, mode, skin_rotations)
        })
}
