//! Frame-time benchmark matrix and the memory grid over character counts.

use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use crate::crowd::{
    build_crowd, AnimationMode, AssetStore, CrowdConfig, GridConfig, MemoryLayoutModel, MemoryMode,
    MemoryReport, PopulationEntry, UpdateError,
};
use crate::error::{BenchError, CrowdError};
use crate::lod::LodPolicy;
use crate::math::Camera;
use crate::render::{render_frame_timed, RenderSettings, SplatRecord, StageTimings};

/// Character counts of the default benchmark and memory tables.
pub const TABLE_CHARACTERS: [usize; 5] = [1, 100, 400, 1_000, 5_000];

/// Instance counts × gaussian counts × motion flags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchMatrix {
    pub characters: Vec<usize>,
    /// Empty means level 0 of the first template.
    pub gaussians: Vec<usize>,
    pub motion: Vec<bool>,
}

impl Default for BenchMatrix {
    fn default() -> Self {
        BenchMatrix {
            characters: TABLE_CHARACTERS.to_vec(),
            gaussians: Vec::new(),
            motion: vec![false, true],
        }
    }
}

fn parse_list<T>(
    key: &str,
    value: &str,
    f: impl Fn(&str) -> Option<T>,
) -> Result<Vec<T>, BenchError> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .map(|v| f(v).ok_or_else(|| BenchError::InvalidMatrix(format!("`{key}`: bad value `{v}`"))))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(BenchError::InvalidMatrix(format!("`{key}` is empty")));
    }
    Ok(items)
}

/// `chars=1,100;gaussians=3176;motion=on,off`. `chars` is required; other
/// keys default to [`BenchMatrix::default`].
impl FromStr for BenchMatrix {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        let mut characters = None;
        let mut gaussians = None;
        let mut motion = None;
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| {
                BenchError::InvalidMatrix(format!("expected key=value, got `{part}`"))
            })?;
            let key = key.trim();
            let slot_taken = match key {
                "chars" | "characters" => characters
                    .replace(parse_list(key, value, |v| v.parse::<usize>().ok())?)
                    .is_some(),
                "gaussians" => gaussians
                    .replace(parse_list(key, value, |v| {
                        v.parse::<usize>().ok().filter(|n| *n > 0)
                    })?)
                    .is_some(),
                "motion" => motion
                    .replace(parse_list(key, value, |v| match v {
                        "on" | "true" | "1" => Some(true),
                        "off" | "false" | "0" => Some(false),
                        _ => None,
                    })?)
                    .is_some(),
                other => return Err(BenchError::InvalidMatrix(format!("unknown key `{other}`"))),
            };
            if slot_taken {
                return Err(BenchError::InvalidMatrix(format!("duplicate key `{key}`")));
            }
        }
        let defaults = BenchMatrix::default();
        Ok(BenchMatrix {
            characters: characters
                .ok_or_else(|| BenchError::InvalidMatrix("missing `chars`".into()))?,
            gaussians: gaussians.unwrap_or(defaults.gaussians),
            motion: motion.unwrap_or(defaults.motion),
        })
    }
}

/// Everything a benchmark cell needs besides its matrix coordinates.
#[derive(Clone, Debug)]
pub struct BenchScene {
    pub assets: Arc<AssetStore>,
    pub spacing_m: f32,
    pub camera: Camera,
    pub settings: RenderSettings,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchOptions {
    pub warmup_frames: usize,
    pub timed_frames: usize,
    /// Cells whose working-set estimate exceeds this are skipped.
    pub memory_budget_bytes: Option<u64>,
    pub start_time: f64,
    pub frame_dt: f64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            warmup_frames: 5,
            timed_frames: 30,
            memory_budget_bytes: None,
            start_time: 0.0,
            frame_dt: 1.0 / 30.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub label: String,
    pub gaussians: usize,
    pub characters: usize,
    pub motion: bool,
    pub update_ms: f64,
    pub gather_ms: f64,
    pub sort_ms: f64,
    pub rasterize_ms: f64,
    pub total_ms: f64,
    pub fps: f64,
    pub splat_count: usize,
    /// Set when the cell could not run.
    pub skipped: Option<String>,
}

pub fn row_label(gaussians: usize, motion: bool) -> String {
    format!(
        "{gaussians} ({})",
        if motion { "w/ motion" } else { "w/o motion" }
    )
}

impl BenchReport {
    fn skipped(gaussians: usize, characters: usize, motion: bool, reason: String) -> Self {
        BenchReport {
            label: row_label(gaussians, motion),
            gaussians,
            characters,
            motion,
            update_ms: 0.0,
            gather_ms: 0.0,
            sort_ms: 0.0,
            rasterize_ms: 0.0,
            total_ms: 0.0,
            fps: 0.0,
            splat_count: 0,
            skipped: Some(reason),
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Near-square grid just large enough for `count` instances.
pub fn bench_grid(count: usize, spacing_m: f32) -> GridConfig {
    let cols = ((count as f64).sqrt().ceil() as usize).max(1);
    GridConfig {
        rows: count.div_ceil(cols).max(1),
        cols,
        spacing_m,
    }
}

/// Rough peak working set of one frame with `splats` Gaussians in flight.
pub fn estimate_frame_bytes(splats: u64) -> u64 {
    let per = 12 + std::mem::size_of::<SplatRecord>() as u64 + 2 * 4;
    splats.saturating_mul(per)
}

fn level_for_count(assets: &AssetStore, gaussians: usize) -> Result<usize, BenchError> {
    let first = assets
        .templates()
        .first()
        .ok_or_else(|| BenchError::InvalidMatrix("scene has no templates".into()))?;
    let level = first
        .level_with_count(gaussians)
        .ok_or(BenchError::UnknownGaussianCount(gaussians))?;
    let uniform = assets
        .templates()
        .iter()
        .all(|t| level < t.level_count() && t.level(level).gaussian_count() == gaussians);
    if !uniform {
        return Err(BenchError::UnknownGaussianCount(gaussians));
    }
    Ok(level)
}

fn run_cell(
    scene: &BenchScene,
    options: &BenchOptions,
    level: usize,
    gaussians: usize,
    characters: usize,
    motion: bool,
) -> Result<BenchReport, BenchError> {
    let demand = estimate_frame_bytes(gaussians as u64 * characters as u64);
    if let Some(budget) = options.memory_budget_bytes {
        if demand > budget {
            return Ok(BenchReport::skipped(
                gaussians,
                characters,
                motion,
                format!("estimated {demand} bytes exceeds budget of {budget}"),
            ));
        }
    }
    let config = CrowdConfig {
        grid: bench_grid(characters, scene.spacing_m),
        count: characters,
        lod: LodPolicy::default(),
    };
    let mut crowd = build_crowd(&config, Arc::clone(&scene.assets), scene.seed)
        .map_err(|e| BenchError::InvalidMatrix(e.to_string()))?;
    crowd.set_lod_override(Some(level));
    let mode = if motion {
        AnimationMode::Motion
    } else {
        AnimationMode::Static
    };
    let mut samples: Vec<StageTimings> = Vec::with_capacity(options.timed_frames);
    for i in 0..options.warmup_frames + options.timed_frames {
        let t = options.start_time + i as f64 * options.frame_dt;
        match render_frame_timed(&mut crowd, &scene.camera, t, &scene.settings, mode) {
            Ok((_, timing)) if i >= options.warmup_frames => samples.push(timing),
            Ok(_) => {}
            Err(UpdateError::Crowd(e @ CrowdError::OutOfMemory { .. })) => {
                return Ok(BenchReport::skipped(
                    gaussians,
                    characters,
                    motion,
                    e.to_string(),
                ));
            }
            Err(e) => return Err(BenchError::InvalidMatrix(e.to_string())),
        }
    }
    let stage =
        |f: fn(&StageTimings) -> Duration| median(samples.iter().map(|s| ms(f(s))).collect());
    let total_ms = stage(StageTimings::total);
    let mut counts: Vec<usize> = samples.iter().map(|s| s.splat_count).collect();
    counts.sort_unstable();
    Ok(BenchReport {
        label: row_label(gaussians, motion),
        gaussians,
        characters,
        motion,
        update_ms: stage(|s| s.update),
        gather_ms: stage(|s| s.gather),
        sort_ms: stage(|s| s.sort),
        rasterize_ms: stage(|s| s.rasterize),
        total_ms,
        fps: if total_ms > 0.0 {
            1000.0 / total_ms
        } else {
            0.0
        },
        splat_count: counts.get(counts.len() / 2).copied().unwrap_or(0),
        skipped: None,
    })
}

/// Runs every cell, gaussians outermost, then motion flag, then characters.
pub fn run_benchmark(
    matrix: &BenchMatrix,
    scene: &BenchScene,
    options: &BenchOptions,
) -> Result<Vec<BenchReport>, BenchError> {
    if matrix.characters.is_empty() || matrix.motion.is_empty() {
        return Err(BenchError::InvalidMatrix("matrix has no cells".into()));
    }
    let gaussians = if matrix.gaussians.is_empty() {
        let first = scene
            .assets
            .templates()
            .first()
            .ok_or_else(|| BenchError::InvalidMatrix("scene has no templates".into()))?;
        vec![first.level(0).gaussian_count()]
    } else {
        matrix.gaussians.clone()
    };
    let mut out = Vec::new();
    for &g in &gaussians {
        let level = level_for_count(&scene.assets, g)?;
        for &motion in &matrix.motion {
            for &k in &matrix.characters {
                let report = run_cell(scene, options, level, g, k, motion)?;
                if let Some(reason) = &report.skipped {
                    log::warn!("skipped {} with {k} characters: {reason}", report.label);
                }
                out.push(report);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryGridRow {
    pub label: String,
    pub gaussian_count: usize,
    pub mode: MemoryMode,
    /// One total per entry of [`MemoryGrid::characters`].
    pub bytes: Vec<u64>,
}

/// Memory totals per (gaussian count, mode) row and character column.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryGrid {
    pub characters: Vec<usize>,
    pub rows: Vec<MemoryGridRow>,
}

/// Crowds of each character count, all forced to one level at a time, with
/// templates assigned as [`build_crowd`] would.
pub fn memory_grid(
    assets: &Arc<AssetStore>,
    spacing_m: f32,
    seed: u64,
    model: &MemoryLayoutModel,
    characters: &[usize],
    modes: &[MemoryMode],
) -> Result<MemoryGrid, CrowdError> {
    let first = assets
        .templates()
        .first()
        .ok_or(CrowdError::MissingAssets("template"))?;
    let mut populations = Vec::with_capacity(characters.len());
    for &k in characters {
        let config = CrowdConfig {
            grid: bench_grid(k, spacing_m),
            count: k,
            lod: LodPolicy::default(),
        };
        let crowd = build_crowd(&config, Arc::clone(assets), seed)?;
        populations.push(
            crowd
                .instances()
                .iter()
                .map(|i| i.template_id)
                .collect::<Vec<_>>(),
        );
    }
    let mut rows = Vec::new();
    for level in 0..first.level_count() {
        let count = first.level(level).gaussian_count();
        for &mode in modes {
            let bytes = populations
                .iter()
                .map(|templates| {
                    let entries: Vec<PopulationEntry> = templates
                        .iter()
                        .map(|&t| {
                            let tpl = &assets.templates()[t];
                            let l = level.min(tpl.level_count() - 1);
                            PopulationEntry {
                                template_id: t,
                                level: l,
                                gaussian_count: tpl.level(l).gaussian_count() as u64,
                            }
                        })
                        .collect();
                    MemoryReport::from_population(model, &entries, mode).total(mode)
                })
                .collect();
            rows.push(MemoryGridRow {
                label: format!(
                    "{count}{}",
                    if mode == MemoryMode::Shared {
                        " (shared)"
                    } else {
                        ""
                    }
                ),
                gaussian_count: count,
                mode,
                bytes,
            });
        }
    }
    Ok(MemoryGrid {
        characters: characters.to_vec(),
        rows,
    })
}
