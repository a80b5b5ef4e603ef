//! Gaussian primitive math: 3D covariance, EWA projection to screen space and
//! per-pixel alpha falloff.
//!
//! Camera space follows the usual splatting convention: +x right, +y down,
//! +z forward. World space is y-up.

use glam::{Mat3, Quat, Vec2, Vec3};

use crate::error::MathError;

/// Added to both diagonal entries of every projected covariance (pixels²).
pub const LOW_PASS_DILATION: f32 = 0.3;
/// Upper clamp for per-splat alpha.
pub const ALPHA_MAX: f32 = 0.99;
/// Alphas below this contribute nothing.
pub const ALPHA_CUTOFF: f32 = 1.0 / 255.0;
/// Half-extent of a splat's screen rectangle, in standard deviations.
pub const EXTENT_SIGMAS: f32 = 3.0;

const QUAT_NORM_TOLERANCE: f32 = 1e-6;

/// One anisotropic 3D Gaussian in world space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian3D {
    pub mean: Vec3,
    pub rotation: Quat,
    pub scale: Vec3,
    pub opacity: f32,
    pub color: Vec3,
}

impl Gaussian3D {
    pub fn validate(&self) -> Result<(), MathError> {
        check_finite3(self.mean)?;
        check_rotation(self.rotation)?;
        check_scale(self.scale)?;
        if !(self.opacity > 0.0 && self.opacity <= 1.0) {
            return Err(MathError::InvalidOpacity(self.opacity));
        }
        if !self.color.is_finite()
            || self.color.min_element() < 0.0
            || self.color.max_element() > 1.0
        {
            return Err(MathError::InvalidColor);
        }
        Ok(())
    }

    pub fn covariance(&self) -> Result<Mat3, MathError> {
        build_covariance(self.rotation, self.scale)
    }
}

/// Σ = R·S·Sᵀ·Rᵀ.
pub fn build_covariance(rotation: Quat, scale: Vec3) -> Result<Mat3, MathError> {
    check_rotation(rotation)?;
    check_scale(scale)?;
    Ok(covariance_unchecked(rotation, scale))
}

#[inline]
pub(crate) fn covariance_unchecked(rotation: Quat, scale: Vec3) -> Mat3 {
    let m = Mat3::from_quat(rotation) * Mat3::from_diagonal(scale);
    m * m.transpose()
}

fn check_finite3(v: Vec3) -> Result<(), MathError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(MathError::NonFinite)
    }
}

fn check_rotation(q: Quat) -> Result<(), MathError> {
    if !q.is_finite() {
        return Err(MathError::NonFinite);
    }
    let norm = q.length();
    if (norm - 1.0).abs() > QUAT_NORM_TOLERANCE {
        return Err(MathError::NotNormalized(norm));
    }
    Ok(())
}

fn check_scale(s: Vec3) -> Result<(), MathError> {
    check_finite3(s)?;
    if s.min_element() <= 0.0 {
        return Err(MathError::InvalidScale);
    }
    Ok(())
}

/// Pinhole camera with square pixels and the principal point at the image center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    /// Rotation taking camera-space vectors to world space.
    pub orientation: Quat,
    pub fov_y_deg: f32,
    pub width: u32,
    pub height: u32,
    pub near: f32,
}

impl Camera {
    pub const DEFAULT_NEAR: f32 = 0.01;

    /// Camera at `position` looking at `target` with world +y as up.
    pub fn look_at(
        position: Vec3,
        target: Vec3,
        fov_y_deg: f32,
        width: u32,
        height: u32,
    ) -> Result<Self, MathError> {
        check_finite3(position)?;
        check_finite3(target)?;
        let forward = (target - position).normalize_or_zero();
        if forward == Vec3::ZERO {
            return Err(MathError::DegenerateCamera(
                "look-at target equals position",
            ));
        }
        let mut right = forward.cross(Vec3::Y);
        if right.length_squared() < 1e-12 {
            // looking straight up or down
            right = forward.cross(Vec3::Z);
        }
        let right = right.normalize();
        let down = forward.cross(right);
        let orientation = Quat::from_mat3(&Mat3::from_cols(right, down, forward)).normalize();
        let cam = Camera {
            position,
            orientation,
            fov_y_deg,
            width,
            height,
            near: Self::DEFAULT_NEAR,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), MathError> {
        check_finite3(self.position)?;
        check_rotation(self.orientation)?;
        if self.width == 0 || self.height == 0 {
            return Err(MathError::DegenerateCamera(
                "image size must be at least 1x1",
            ));
        }
        if !(self.near > 0.0 && self.near.is_finite()) {
            return Err(MathError::DegenerateCamera("near plane must be positive"));
        }
        if !(self.fov_y_deg > 0.0 && self.fov_y_deg < 180.0) {
            return Err(MathError::DegenerateCamera(
                "vertical fov must lie in (0, 180) degrees",
            ));
        }
        Ok(())
    }

    /// World-to-view rotation W.
    pub fn world_to_view(&self) -> Mat3 {
        Mat3::from_quat(self.orientation).transpose()
    }

    pub fn to_view(&self, p: Vec3) -> Vec3 {
        self.world_to_view() * (p - self.position)
    }

    /// Focal length in pixels (identical on both axes).
    pub fn focal_px(&self) -> f32 {
        0.5 * self.height as f32 / (0.5 * self.fov_y_deg.to_radians()).tan()
    }

    pub fn principal_point(&self) -> Vec2 {
        Vec2::new(0.5 * self.width as f32, 0.5 * self.height as f32)
    }

    pub fn forward(&self) -> Vec3 {
        self.orientation * Vec3::Z
    }

    /// All per-frame constants the projection needs.
    pub fn projector(&self) -> Projector {
        Projector {
            position: self.position,
            world_to_view: self.world_to_view(),
            focal: self.focal_px(),
            center: self.principal_point(),
            near: self.near,
            width: self.width as f32,
            height: self.height as f32,
        }
    }
}

/// Symmetric 2×2 matrix stored as (xx, xy, yy).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cov2 {
    pub xx: f32,
    pub xy: f32,
    pub yy: f32,
}

impl Cov2 {
    pub fn det(&self) -> f32 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn inverse(&self) -> Option<Cov2> {
        let det = self.det();
        if !(det > 0.0) || !det.is_finite() {
            return None;
        }
        let inv = 1.0 / det;
        Some(Cov2 {
            xx: self.yy * inv,
            xy: -self.xy * inv,
            yy: self.xx * inv,
        })
    }

    #[inline]
    pub fn quad_form(&self, d: Vec2) -> f32 {
        self.xx * d.x * d.x + 2.0 * self.xy * d.x * d.y + self.yy * d.y * d.y
    }
}

/// Screen-space footprint of one projected Gaussian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Splat2D {
    pub mean_px: Vec2,
    /// Dilated 2D covariance (pixels²).
    pub cov2d: Cov2,
    /// Inverse of `cov2d`.
    pub conic: Cov2,
    /// Half-size of the 3σ screen rectangle.
    pub extent: Vec2,
    pub depth: f32,
    pub color: Vec3,
    pub opacity: f32,
}

impl Splat2D {
    /// Builds a splat from an already-dilated covariance. Returns `None` when the
    /// covariance is not positive definite.
    pub fn new(mean_px: Vec2, cov2d: Cov2, depth: f32, color: Vec3, opacity: f32) -> Option<Self> {
        let conic = cov2d.inverse()?;
        let extent = Vec2::new(cov2d.xx.sqrt(), cov2d.yy.sqrt()) * EXTENT_SIGMAS;
        Some(Splat2D {
            mean_px,
            cov2d,
            conic,
            extent,
            depth,
            color,
            opacity,
        })
    }

    /// Whether `p` lies inside the closed 3σ rectangle.
    #[inline]
    pub fn covers(&self, p: Vec2) -> bool {
        let d = (p - self.mean_px).abs();
        d.x <= self.extent.x && d.y <= self.extent.y
    }
}

/// Per-frame projection constants derived from a [`Camera`].
#[derive(Clone, Copy, Debug)]
pub struct Projector {
    pub position: Vec3,
    pub world_to_view: Mat3,
    pub focal: f32,
    pub center: Vec2,
    pub near: f32,
    pub width: f32,
    pub height: f32,
}

impl Projector {
    /// Projects a Gaussian whose covariance `cov` is expressed in a frame related
    /// to world space by the rotation `frame_to_world`. Passing the identity means
    /// `cov` is already in world space.
    #[inline]
    pub fn project(
        &self,
        mean_world: Vec3,
        cov: &Mat3,
        frame_to_world: &Mat3,
        color: Vec3,
        opacity: f32,
    ) -> Option<Splat2D> {
        let t = self.world_to_view * (mean_world - self.position);
        if !(t.z > self.near) {
            return None;
        }
        let inv_z = 1.0 / t.z;
        let f = self.focal;
        let mean_px = Vec2::new(f * t.x * inv_z, f * t.y * inv_z) + self.center;

        // Rows of J·W·frame_to_world, J being the perspective Jacobian at t.
        let view_from_frame = self.world_to_view * *frame_to_world;
        let rows = view_from_frame.transpose();
        let j0 = Vec3::new(f * inv_z, 0.0, -f * t.x * inv_z * inv_z);
        let j1 = Vec3::new(0.0, f * inv_z, -f * t.y * inv_z * inv_z);
        let a = rows * j0;
        let b = rows * j1;
        let sa = *cov * a;
        let sb = *cov * b;
        let cov2d = Cov2 {
            xx: a.dot(sa) + LOW_PASS_DILATION,
            xy: a.dot(sb),
            yy: b.dot(sb) + LOW_PASS_DILATION,
        };
        let splat = Splat2D::new(mean_px, cov2d, t.z, color, opacity)?;
        let lo = splat.mean_px - splat.extent;
        let hi = splat.mean_px + splat.extent;
        if hi.x < 0.0 || hi.y < 0.0 || lo.x > self.width || lo.y > self.height {
            return None;
        }
        Some(splat)
    }
}

/// Projects one Gaussian with the local-affine perspective approximation.
/// `Ok(None)` means the Gaussian was culled.
pub fn project_gaussian(g: &Gaussian3D, cam: &Camera) -> Result<Option<Splat2D>, MathError> {
    g.validate()?;
    cam.validate()?;
    let cov = g.covariance()?;
    Ok(cam
        .projector()
        .project(g.mean, &cov, &Mat3::IDENTITY, g.color, g.opacity))
}

/// Clamp and cutoff applied by [`eval_alpha`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaLimits {
    pub max: f32,
    pub cutoff: f32,
}

impl Default for AlphaLimits {
    fn default() -> Self {
        AlphaLimits {
            max: ALPHA_MAX,
            cutoff: ALPHA_CUTOFF,
        }
    }
}

/// α = min(max, opacity · exp(−½ dᵀ Σ⁻¹ d)), zero below the cutoff.
#[inline]
pub fn eval_alpha(s: &Splat2D, pixel_center: Vec2, limits: AlphaLimits) -> f32 {
    let d = pixel_center - s.mean_px;
    let power = -0.5 * s.conic.quad_form(d);
    if power > 0.0 {
        return 0.0;
    }
    let alpha = (s.opacity * power.exp()).min(limits.max);
    if alpha < limits.cutoff {
        0.0
    } else {
        alpha
    }
}
