//! Image quality metrics and the distance/LoD quality sweep.

use glam::Vec3;

use crate::avatar::AvatarTemplate;
use crate::crowd::Placement;
use crate::error::MetricError;
use crate::math::Camera;
use crate::render::{
    gather_template_level, rasterize, sort_splats, with_threads, Framebuffer, RenderSettings,
};

/// Reported for identical images instead of infinity.
pub const PSNR_CAP: f64 = 99.0;

pub const DEFAULT_DISTANCES: [f32; 4] = [1.9, 3.0, 5.0, 10.0];

/// Mean squared error over every channel of every pixel.
pub fn mse(a: &Framebuffer, b: &Framebuffer) -> Result<f64, MetricError> {
    if a.width != b.width || a.height != b.height {
        return Err(MetricError::DimensionMismatch(
            a.width, a.height, b.width, b.height,
        ));
    }
    if a.pixels.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(p, q)| {
            let d = (*p - *q).as_dvec3();
            d.dot(d)
        })
        .sum();
    Ok(sum / (3 * a.pixels.len()) as f64)
}

/// PSNR in dB with a peak value of 1.0, capped at [`PSNR_CAP`].
pub fn psnr(a: &Framebuffer, b: &Framebuffer) -> Result<f64, MetricError> {
    let e = mse(a, b)?;
    if e == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / e).log10()).min(PSNR_CAP))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QualityRow {
    pub distance_m: f32,
    pub level: usize,
    pub gaussian_count: usize,
    pub psnr_db: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct QualityTable {
    pub rows: Vec<QualityRow>,
}

impl QualityTable {
    pub fn psnr(&self, distance_m: f32, level: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.distance_m == distance_m && r.level == level)
            .map(|r| r.psnr_db)
    }
}

/// Camera `distance` meters in front of the template's bind center, looking
/// back at it, with the prototype's intrinsics.
pub fn sweep_camera(
    template: &AvatarTemplate,
    distance: f32,
    prototype: &Camera,
) -> Result<Camera, MetricError> {
    let target = template.bind_center();
    let mut cam = Camera::look_at(
        target + Vec3::Z * distance,
        target,
        prototype.fov_y_deg,
        prototype.width,
        prototype.height,
    )
    .map_err(|e| MetricError::InvalidSweep(e.to_string()))?;
    cam.near = prototype.near;
    Ok(cam)
}

pub fn render_template_level(
    template: &AvatarTemplate,
    level: usize,
    camera: &Camera,
    settings: &RenderSettings,
) -> Framebuffer {
    with_threads(settings.thread_count, || {
        let frame = sort_splats(gather_template_level(
            template,
            level,
            Placement::default(),
            camera,
        ));
        rasterize(&frame, settings, camera.width, camera.height)
    })
}

/// Renders every level at every distance and scores it against level 0 at
/// the same distance.
pub fn lod_quality_sweep(
    template: &AvatarTemplate,
    distances: &[f32],
    prototype: &Camera,
    settings: &RenderSettings,
) -> Result<QualityTable, MetricError> {
    if template.level_count() < 2 {
        return Err(MetricError::TooFewLevels(template.level_count()));
    }
    if distances.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(MetricError::InvalidSweep(
            "distances must be finite and positive".into(),
        ));
    }
    let mut rows = Vec::with_capacity(distances.len() * template.level_count());
    for &d in distances {
        let cam = sweep_camera(template, d, prototype)?;
        let reference = render_template_level(template, 0, &cam, settings);
        for level in 0..template.level_count() {
            let psnr_db = if level == 0 {
                PSNR_CAP
            } else {
                psnr(
                    &render_template_level(template, level, &cam, settings),
                    &reference,
                )?
            };
            rows.push(QualityRow {
                distance_m: d,
                level,
                gaussian_count: template.level(level).gaussian_count(),
                psnr_db,
            });
        }
    }
    Ok(QualityTable { rows })
}
