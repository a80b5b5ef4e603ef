//! 8-bit sRGB image output.

use std::path::Path;

use crate::error::OutputError;
use crate::render::Framebuffer;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    /// Binary portable pixmap (P6, max value 255).
    Ppm,
    Png,
}

impl ImageFormat {
    /// From the file extension; anything but `.png` is PPM.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("png") => ImageFormat::Png,
            _ => ImageFormat::Ppm,
        }
    }
}

/// Linear → 8-bit sRGB, rounding half away from zero.
pub fn srgb_encode(linear: f32) -> u8 {
    let c = if linear.is_nan() {
        0.0
    } else {
        linear.clamp(0.0, 1.0)
    };
    let v = if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    };
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Interleaved RGB bytes, top row first.
pub fn to_srgb8(fb: &Framebuffer) -> Vec<u8> {
    fb.pixels
        .iter()
        .flat_map(|p| [srgb_encode(p.x), srgb_encode(p.y), srgb_encode(p.z)])
        .collect()
}

pub fn encode_ppm(fb: &Framebuffer) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", fb.width, fb.height).into_bytes();
    out.extend(to_srgb8(fb));
    out
}

pub fn encode_png(fb: &Framebuffer) -> Result<Vec<u8>, OutputError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, fb.width, fb.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_source_srgb(png::SrgbRenderingIntent::Perceptual);
        let mut w = enc
            .write_header()
            .map_err(|e| OutputError::Png(e.to_string()))?;
        w.write_image_data(&to_srgb8(fb))
            .map_err(|e| OutputError::Png(e.to_string()))?;
        w.finish().map_err(|e| OutputError::Png(e.to_string()))?;
    }
    Ok(out)
}

pub fn write_image(fb: &Framebuffer, path: &Path, format: ImageFormat) -> Result<(), OutputError> {
    let bytes = match format {
        ImageFormat::Ppm => encode_ppm(fb),
        ImageFormat::Png => encode_png(fb)?,
    };
    std::fs::write(path, bytes).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}
