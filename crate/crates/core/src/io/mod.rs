//! Asset containers, scene configuration, images and reports.

mod binary;
mod image;
mod motion;
mod report;
mod scene;
mod template;

pub use image::{encode_png, encode_ppm, srgb_encode, to_srgb8, write_image, ImageFormat};
pub use motion::{
    decode_motion, encode_motion, load_motion, save_motion, MOTION_MAGIC, MOTION_VERSION,
};
pub use report::{export_report, format_report, parse_bench_report, Tabular};
pub use scene::{
    load_scene_config, parse_scene_config, CameraConfig, SceneConfig, DEFAULT_CAMERA_POSITION,
    DEFAULT_CAMERA_TARGET, DEFAULT_FOV_Y_DEG, DEFAULT_HEIGHT, DEFAULT_WIDTH,
};
pub use template::{
    decode_template, encode_template, load_template, save_template, TEMPLATE_MAGIC,
    TEMPLATE_VERSION,
};

use std::path::Path;

use crate::crowd::AssetStore;
use crate::error::{AssetError, FormatError};

fn with_path<T>(path: &Path, r: Result<T, FormatError>) -> Result<T, AssetError> {
    r.map_err(|source| match source {
        FormatError::Io { path, source } => AssetError::Load {
            path: path.clone(),
            source: FormatError::Io { path, source },
        },
        source => AssetError::Load {
            path: path.to_path_buf(),
            source,
        },
    })
}

/// Loads every template and motion a scene names.
pub fn load_scene_assets(config: &SceneConfig) -> Result<AssetStore, AssetError> {
    let templates = config
        .templates
        .iter()
        .map(|p| with_path(p, load_template(p)))
        .collect::<Result<Vec<_>, _>>()?;
    let motions = config
        .motions
        .iter()
        .map(|p| with_path(p, load_motion(p)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AssetStore::new(templates, motions)?)
}
