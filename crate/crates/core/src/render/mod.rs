//! Deterministic tile-based software rasterizer.
//!
//! Splats are globally sorted front to back on (depth, instance, gaussian),
//! binned to every tile their 3σ rectangle touches, and composited per pixel
//! with early termination once transmittance falls under the floor. Each tile
//! row is owned by one worker, so output is independent of the thread count.

mod pool;

pub use pool::with_threads;

use std::time::{Duration, Instant};

use glam::{Mat3, Quat, Vec2, Vec3};
use rayon::prelude::*;

use crate::avatar::AvatarTemplate;
use crate::crowd::{update_crowd, AnimationMode, Crowd, Placement, UpdateError};
use crate::math::{eval_alpha, AlphaLimits, Camera, Projector, Splat2D, ALPHA_CUTOFF, ALPHA_MAX};

/// Splats per binning work item.
const BIN_CHUNK: usize = 1 << 15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderSettings {
    pub tile_size: u32,
    pub background: Vec3,
    pub alpha_cutoff: f32,
    pub transmittance_floor: f32,
    /// Worker threads; 0 uses the global pool.
    pub thread_count: usize,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            tile_size: 16,
            background: Vec3::ZERO,
            alpha_cutoff: ALPHA_CUTOFF,
            transmittance_floor: 1e-4,
            thread_count: 0,
        }
    }
}

impl RenderSettings {
    pub fn validate(&self) -> Result<(), String> {
        if self.tile_size == 0 {
            return Err("tile size must be at least 1".into());
        }
        if !(self.alpha_cutoff > 0.0 && self.alpha_cutoff < 1.0) {
            return Err("alpha cutoff must lie in (0, 1)".into());
        }
        if !(self.transmittance_floor > 0.0 && self.transmittance_floor < 1.0) {
            return Err("transmittance floor must lie in (0, 1)".into());
        }
        if !self.background.is_finite() || self.background.min_element() < 0.0 {
            return Err("background must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn alpha_limits(&self) -> AlphaLimits {
        AlphaLimits {
            max: ALPHA_MAX,
            cutoff: self.alpha_cutoff,
        }
    }
}

/// Linear RGB image, row-major from the top-left pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Framebuffer {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<Vec3>,
}

impl Framebuffer {
    pub fn filled(width: u32, height: u32, color: Vec3) -> Self {
        Framebuffer {
            width,
            height,
            pixels: vec![color; width as usize * height as usize],
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> Vec3 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }
}

/// A projected splat and its stable identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplatRecord {
    pub splat: Splat2D,
    pub instance_id: u32,
    pub gaussian_index: u32,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplatFrame {
    pub records: Vec<SplatRecord>,
}

impl SplatFrame {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn project_level(
    proj: &Projector,
    template: &AvatarTemplate,
    level_index: usize,
    means: &[Vec3],
    rotations: &[Quat],
    yaw: f32,
    instance_id: u32,
) -> Vec<SplatRecord> {
    let level = template.level(level_index);
    let covs = template.covariances(level_index);
    let frame = Mat3::from_rotation_y(yaw);
    let skinned_rotations = rotations.len() == means.len();
    means
        .iter()
        .enumerate()
        .filter_map(|(g, mean)| {
            let splat = if skinned_rotations {
                let cov = crate::math::covariance_unchecked(rotations[g], level.scales[g]);
                proj.project(
                    *mean,
                    &cov,
                    &Mat3::IDENTITY,
                    level.colors[g],
                    level.opacities[g],
                )
            } else {
                proj.project(*mean, &covs[g], &frame, level.colors[g], level.opacities[g])
            }?;
            Some(SplatRecord {
                splat,
                instance_id,
                gaussian_index: g as u32,
            })
        })
        .collect()
}

/// Projects the active level of every instance. The crowd must already be
/// updated for the frame being drawn.
pub fn gather_splats(crowd: &Crowd, camera: &Camera) -> SplatFrame {
    let proj = camera.projector();
    let per_instance: Vec<Vec<SplatRecord>> = crowd
        .instances()
        .par_iter()
        .map(|inst| {
            let template = crowd.template_of(inst);
            project_level(
                &proj,
                template,
                inst.active_lod(),
                inst.posed_means(),
                inst.posed_rotations(),
                inst.placement.yaw,
                inst.instance_id,
            )
        })
        .collect();
    let total = per_instance.iter().map(Vec::len).sum();
    let mut records = Vec::with_capacity(total);
    for v in per_instance {
        records.extend(v);
    }
    SplatFrame { records }
}

/// Projects one template level in its bind pose at `placement`.
pub fn gather_template_level(
    template: &AvatarTemplate,
    level: usize,
    placement: Placement,
    camera: &Camera,
) -> SplatFrame {
    let m = placement.matrix();
    let means: Vec<Vec3> = template
        .level(level)
        .means
        .iter()
        .map(|p| m.transform_point3(*p))
        .collect();
    SplatFrame {
        records: project_level(
            &camera.projector(),
            template,
            level,
            &means,
            &[],
            placement.yaw,
            0,
        ),
    }
}

/// Total order used for compositing: ascending depth, then instance, then gaussian.
pub fn splat_order(a: &SplatRecord, b: &SplatRecord) -> std::cmp::Ordering {
    a.splat
        .depth
        .total_cmp(&b.splat.depth)
        .then(a.instance_id.cmp(&b.instance_id))
        .then(a.gaussian_index.cmp(&b.gaussian_index))
}

pub fn sort_splats(mut frame: SplatFrame) -> SplatFrame {
    frame.records.par_sort_unstable_by(splat_order);
    frame
}

/// Alpha of a splat at a pixel center: zero outside its 3σ rectangle.
#[inline]
pub fn splat_alpha(s: &Splat2D, pixel_center: Vec2, limits: AlphaLimits) -> f32 {
    if !s.covers(pixel_center) {
        return 0.0;
    }
    eval_alpha(s, pixel_center, limits)
}

/// Inclusive pixel range whose centers fall inside `[lo, hi]`, clamped to `size`.
fn covered_pixels(lo: f32, hi: f32, size: u32) -> Option<(u32, u32)> {
    let first = (lo - 0.5).ceil().max(0.0);
    let last = (hi - 0.5).floor().min(size as f32 - 1.0);
    if !(first <= last) {
        return None;
    }
    Some((first as u32, last as u32))
}

struct TileGrid {
    tile: u32,
    tiles_x: u32,
    tiles_y: u32,
}

impl TileGrid {
    fn tile_range(&self, s: &Splat2D, width: u32, height: u32) -> Option<(u32, u32, u32, u32)> {
        let (x0, x1) = covered_pixels(s.mean_px.x - s.extent.x, s.mean_px.x + s.extent.x, width)?;
        let (y0, y1) = covered_pixels(s.mean_px.y - s.extent.y, s.mean_px.y + s.extent.y, height)?;
        Some((
            x0 / self.tile,
            x1 / self.tile,
            y0 / self.tile,
            y1 / self.tile,
        ))
    }
}

fn bin_splats(frame: &SplatFrame, grid: &TileGrid, width: u32, height: u32) -> Vec<Vec<u32>> {
    let tile_count = (grid.tiles_x * grid.tiles_y) as usize;
    let chunked: Vec<Vec<Vec<u32>>> = frame
        .records
        .par_chunks(BIN_CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut bins = vec![Vec::new(); tile_count];
            for (k, rec) in chunk.iter().enumerate() {
                let Some((tx0, tx1, ty0, ty1)) = grid.tile_range(&rec.splat, width, height) else {
                    continue;
                };
                let idx = (ci * BIN_CHUNK + k) as u32;
                for ty in ty0..=ty1 {
                    for tx in tx0..=tx1 {
                        bins[(ty * grid.tiles_x + tx) as usize].push(idx);
                    }
                }
            }
            bins
        })
        .collect();
    if chunked.len() == 1 {
        return chunked.into_iter().next().unwrap_or_default();
    }
    (0..tile_count)
        .into_par_iter()
        .map(|t| {
            let len = chunked.iter().map(|c| c[t].len()).sum();
            let mut merged = Vec::with_capacity(len);
            for c in &chunked {
                merged.extend_from_slice(&c[t]);
            }
            merged
        })
        .collect()
}

/// Front-to-back compositing of a sorted list at one pixel center. Returns the
/// accumulated color and the final transmittance (before the background).
#[inline]
pub fn composite_pixel<'a, I>(
    splats: I,
    pixel_center: Vec2,
    settings: &RenderSettings,
) -> (Vec3, f32)
where
    I: IntoIterator<Item = &'a Splat2D>,
{
    let limits = settings.alpha_limits();
    let mut color = Vec3::ZERO;
    let mut transmittance = 1.0f32;
    for s in splats {
        let alpha = splat_alpha(s, pixel_center, limits);
        if alpha == 0.0 {
            continue;
        }
        color += s.color * (alpha * transmittance);
        transmittance *= 1.0 - alpha;
        if transmittance < settings.transmittance_floor {
            break;
        }
    }
    (color, transmittance)
}

/// Rasterizes a sorted frame.
pub fn rasterize(
    frame: &SplatFrame,
    settings: &RenderSettings,
    width: u32,
    height: u32,
) -> Framebuffer {
    let mut fb = Framebuffer::filled(width, height, settings.background);
    if width == 0 || height == 0 {
        return fb;
    }
    let tile = settings.tile_size.max(1);
    let grid = TileGrid {
        tile,
        tiles_x: width.div_ceil(tile),
        tiles_y: height.div_ceil(tile),
    };
    if frame.is_empty() {
        return fb;
    }
    let bins = bin_splats(frame, &grid, width, height);
    let band_len = (tile * width) as usize;
    let limits = settings.alpha_limits();
    fb.pixels
        .par_chunks_mut(band_len)
        .enumerate()
        .for_each_init(
            || (Vec::<Splat2D>::new(), Vec::<u32>::new()),
            |(local, row_list), (ty, band)| {
                let rows = band.len() / width as usize;
                for tx in 0..grid.tiles_x {
                    let list = &bins[(ty as u32 * grid.tiles_x + tx) as usize];
                    if list.is_empty() {
                        continue;
                    }
                    local.clear();
                    local.extend(list.iter().map(|&i| frame.records[i as usize].splat));
                    let x0 = tx * tile;
                    let x1 = (x0 + tile).min(width);
                    for row in 0..rows {
                        let cy = (ty as u32 * tile + row as u32) as f32 + 0.5;
                        row_list.clear();
                        row_list.extend((0..local.len() as u32).filter(|&k| {
                            (cy - local[k as usize].mean_px.y).abs() <= local[k as usize].extent.y
                        }));
                        let out = &mut band[row * width as usize..][..width as usize];
                        if row_list.is_empty() {
                            continue;
                        }
                        for x in x0..x1 {
                            let center = Vec2::new(x as f32 + 0.5, cy);
                            let mut color = Vec3::ZERO;
                            let mut transmittance = 1.0f32;
                            for &k in row_list.iter() {
                                let s = &local[k as usize];
                                if (center.x - s.mean_px.x).abs() > s.extent.x {
                                    continue;
                                }
                                let alpha = eval_alpha(s, center, limits);
                                if alpha == 0.0 {
                                    continue;
                                }
                                color += s.color * (alpha * transmittance);
                                transmittance *= 1.0 - alpha;
                                if transmittance < settings.transmittance_floor {
                                    break;
                                }
                            }
                            out[x as usize] = color + settings.background * transmittance;
                        }
                    }
                }
            },
        );
    fb
}

/// Wall-clock cost of each pipeline stage for one frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub update: Duration,
    pub gather: Duration,
    pub sort: Duration,
    pub rasterize: Duration,
    pub splat_count: usize,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.update + self.gather + self.sort + self.rasterize
    }
}

/// update → gather → sort → rasterize, timing every stage.
pub fn render_frame_timed(
    crowd: &mut Crowd,
    camera: &Camera,
    time: f64,
    settings: &RenderSettings,
    mode: AnimationMode,
) -> Result<(Framebuffer, StageTimings), UpdateError> {
    with_threads(settings.thread_count, || {
        let t0 = Instant::now();
        update_crowd(crowd, camera, time, mode)?;
        let t1 = Instant::now();
        let frame = gather_splats(crowd, camera);
        let t2 = Instant::now();
        let frame = sort_splats(frame);
        let t3 = Instant::now();
        let fb = rasterize(&frame, settings, camera.width, camera.height);
        let t4 = Instant::now();
        Ok((
            fb,
            StageTimings {
                update: t1 - t0,
                gather: t2 - t1,
                sort: t3 - t2,
                rasterize: t4 - t3,
                splat_count: frame.len(),
            },
        ))
    })
}

pub fn render_frame(
    crowd: &mut Crowd,
    camera: &Camera,
    time: f64,
    settings: &RenderSettings,
    mode: AnimationMode,
) -> Result<Framebuffer, UpdateError> {
    render_frame_timed(crowd, camera, time, settings, mode).map(|(fb, _)| fb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Cov2;

    fn splat(x: f32, y: f32, var: f32, depth: f32, color: Vec3, opacity: f32) -> Splat2D {
        Splat2D::new(
            Vec2::new(x, y),
            Cov2 {
                xx: var,
                xy: 0.0,
                yy: var,
            },
            depth,
            color,
            opacity,
        )
        .unwrap()
    }

    fn rec(s: Splat2D, instance_id: u32, gaussian_index: u32) -> SplatRecord {
        SplatRecord {
            splat: s,
            instance_id,
            gaussian_index,
        }
    }

    #[test]
    fn empty_frame_is_background() {
        let settings = RenderSettings {
            background: Vec3::new(0.1, 0.2, 0.3),
            ..Default::default()
        };
        let fb = rasterize(&SplatFrame::default(), &settings, 17, 9);
        assert!(fb.pixels.iter().all(|p| *p == settings.background));
    }

    #[test]
    fn sort_by_depth_then_ids() {
        let a = rec(splat(0.0, 0.0, 1.0, 2.0, Vec3::ONE, 1.0), 0, 0);
        let b = rec(splat(0.0, 0.0, 1.0, 1.0, Vec3::ONE, 1.0), 0, 1);
        let out = sort_splats(SplatFrame {
            records: vec![a, b],
        });
        assert_eq!(out.records[0].splat.depth, 1.0);
        let c = rec(splat(0.0, 0.0, 1.0, 1.0, Vec3::ONE, 1.0), 7, 0);
        let d = rec(splat(0.0, 0.0, 1.0, 1.0, Vec3::ONE, 1.0), 3, 0);
        let out = sort_splats(SplatFrame {
            records: vec![c, d],
        });
        assert_eq!(out.records[0].instance_id, 3);
        assert_eq!(out.records[1].instance_id, 7);
    }

    #[test]
    fn single_clamped_splat() {
        let settings = RenderSettings::default();
        let s = splat(4.5, 4.5, 4.0, 1.0, Vec3::ONE, 1.0);
        let fb = rasterize(
            &SplatFrame {
                records: vec![rec(s, 0, 0)],
            },
            &settings,
            9,
            9,
        );
        let c = fb.pixel(4, 4);
        assert!((c - Vec3::splat(0.99)).abs().max_element() < 1e-6);
    }

    #[test]
    fn two_layer_compositing() {
        let settings = RenderSettings {
            background: Vec3::new(0.0, 1.0, 0.0),
            ..Default::default()
        };
        let red = splat(2.5, 2.5, 1.0, 1.0, Vec3::X, 0.5);
        let blue = splat(2.5, 2.5, 1.0, 2.0, Vec3::Z, 0.5);
        let frame = sort_splats(SplatFrame {
            records: vec![rec(blue, 1, 0), rec(red, 0, 0)],
        });
        let fb = rasterize(&frame, &settings, 5, 5);
        let c = fb.pixel(2, 2);
        let expected = Vec3::new(0.5, 0.25, 0.25);
        assert!((c - expected).abs().max_element() < 1e-6, "{c}");
    }

    #[test]
    fn covered_pixel_ranges() {
        assert_eq!(covered_pixels(0.0, 1.0, 10), Some((0, 0)));
        assert_eq!(covered_pixels(0.6, 1.4, 10), None);
        assert_eq!(covered_pixels(-50.0, 3.5, 10), Some((0, 3)));
        assert_eq!(covered_pixels(8.0, 500.0, 10), Some((8, 9)));
        assert_eq!(covered_pixels(20.0, 30.0, 10), None);
    }
}
