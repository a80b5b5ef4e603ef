//! TOML scene description.
//!
//! ```toml
//! templates = ["assets/t00.gsat"]        # required, relative to this file
//! motions = ["assets/m00.gsmo"]          # required
//!
//! [grid]                                 # required
//! rows = 50
//! cols = 70
//! spacing_m = 1.5
//!
//! [crowd]
//! count = 3500                           # required
//! seed = 0                               # default 0
//!
//! [camera]                               # every key optional
//! position = [0.0, 1.6, 3.0]
//! look_at = [0.0, 1.0, -10.0]
//! fov_y_deg = 60.0
//! width = 1280
//! height = 720
//!
//! [lod]
//! thresholds_m = [5.0, 10.0]
//! hysteresis_m = 0.0
//!
//! [render]
//! background_rgb = [0.0, 0.0, 0.0]
//! tile_size = 16
//! ```
//!
//! Unknown keys are collected as warnings.

use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use glam::Vec3;
use toml::{Table, Value};

use crate::crowd::{CrowdConfig, GridConfig};
use crate::error::ConfigError;
use crate::lod::{LodPolicy, DEFAULT_THRESHOLDS};
use crate::math::Camera;
use crate::render::RenderSettings;

pub const DEFAULT_CAMERA_POSITION: Vec3 = Vec3::new(0.0, 1.6, 3.0);
pub const DEFAULT_CAMERA_TARGET: Vec3 = Vec3::new(0.0, 1.0, -10.0);
pub const DEFAULT_FOV_Y_DEG: f32 = 60.0;
pub const DEFAULT_WIDTH: u32 = 1280;
pub const DEFAULT_HEIGHT: u32 = 720;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraConfig {
    pub position: Vec3,
    pub look_at: Vec3,
    pub fov_y_deg: f32,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig {
            position: DEFAULT_CAMERA_POSITION,
            look_at: DEFAULT_CAMERA_TARGET,
            fov_y_deg: DEFAULT_FOV_Y_DEG,
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneConfig {
    /// Resolved against the config file's directory.
    pub templates: Vec<PathBuf>,
    pub motions: Vec<PathBuf>,
    pub grid: GridConfig,
    pub count: usize,
    pub seed: u64,
    pub camera: CameraConfig,
    pub lod: LodPolicy,
    pub render: RenderSettings,
    /// Unrecognized keys, as dotted paths.
    pub unknown_keys: Vec<String>,
}

impl SceneConfig {
    pub fn camera(&self) -> Camera {
        let c = &self.camera;
        // validated at parse time
        Camera::look_at(c.position, c.look_at, c.fov_y_deg, c.width, c.height)
            .expect("validated camera")
    }

    pub fn crowd_config(&self) -> CrowdConfig {
        CrowdConfig {
            grid: self.grid,
            count: self.count,
            lod: self.lod.clone(),
        }
    }
}

struct Section<'a> {
    prefix: String,
    table: &'a Table,
    known: &'static [&'static str],
}

impl<'a> Section<'a> {
    fn new(prefix: &str, table: &'a Table, known: &'static [&'static str]) -> Self {
        Section {
            prefix: prefix.to_string(),
            table,
            known,
        }
    }

    fn key(&self, k: &str) -> String {
        if self.prefix.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.prefix)
        }
    }

    fn unknown(&self, out: &mut Vec<String>) {
        for k in self.table.keys() {
            if !self.known.contains(&k.as_str()) {
                out.push(self.key(k));
            }
        }
    }

    fn mismatch(&self, k: &str, expected: &str, got: &Value) -> ConfigError {
        ConfigError::TypeMismatch {
            key: self.key(k),
            message: format!("expected {expected}, found {}", got.type_str()),
        }
    }

    fn invalid(&self, k: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::InvalidValue {
            key: self.key(k),
            message: message.into(),
        }
    }

    fn required<T>(&self, k: &str, v: Result<Option<T>, ConfigError>) -> Result<T, ConfigError> {
        v?.ok_or_else(|| ConfigError::MissingKey(self.key(k)))
    }

    fn table(&self, k: &str) -> Result<Option<&'a Table>, ConfigError> {
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(Some(t)),
            Some(v) => Err(self.mismatch(k, "table", v)),
        }
    }

    fn integer(&self, k: &str) -> Result<Option<i64>, ConfigError> {
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::Integer(i)) => Ok(Some(*i)),
            Some(v) => Err(self.mismatch(k, "integer", v)),
        }
    }

    fn unsigned(&self, k: &str) -> Result<Option<u64>, ConfigError> {
        self.integer(k)?
            .map(|i| {
                u64::try_from(i)
                    .map_err(|_| self.invalid(k, format!("must be non-negative, got {i}")))
            })
            .transpose()
    }

    fn float(&self, k: &str) -> Result<Option<f32>, ConfigError> {
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(*f as f32)),
            Some(Value::Integer(i)) => Ok(Some(*i as f32)),
            Some(v) => Err(self.mismatch(k, "number", v)),
        }
    }

    fn floats(&self, k: &str) -> Result<Option<Vec<f32>>, ConfigError> {
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Float(f) => Ok(*f as f32),
                    Value::Integer(i) => Ok(*i as f32),
                    other => Err(self.mismatch(k, "array of numbers", other)),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(v) => Err(self.mismatch(k, "array of numbers", v)),
        }
    }

    fn vec3(&self, k: &str) -> Result<Option<Vec3>, ConfigError> {
        match self.floats(k)? {
            None => Ok(None),
            Some(v) if v.len() == 3 => Ok(Some(Vec3::from_slice(&v))),
            Some(v) => Err(self.invalid(k, format!("expected 3 components, found {}", v.len()))),
        }
    }

    fn strings(&self, k: &str) -> Result<Option<Vec<String>>, ConfigError> {
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    other => Err(self.mismatch(k, "array of strings", other)),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(v) => Err(self.mismatch(k, "array of strings", v)),
        }
    }
}

const ROOT_KEYS: &[&str] = &[
    "templates",
    "motions",
    "grid",
    "camera",
    "lod",
    "crowd",
    "render",
];
const GRID_KEYS: &[&str] = &["rows", "cols", "spacing_m"];
const CAMERA_KEYS: &[&str] = &["position", "look_at", "fov_y_deg", "width", "height"];
const LOD_KEYS: &[&str] = &["thresholds_m", "hysteresis_m"];
const CROWD_KEYS: &[&str] = &["count", "seed"];
const RENDER_KEYS: &[&str] = &["background_rgb", "tile_size"];

static EMPTY: LazyLock<Table> = LazyLock::new(Table::new);

fn sub<'a>(
    parent: &Section<'a>,
    k: &str,
    known: &'static [&'static str],
    required: bool,
) -> Result<Section<'a>, ConfigError> {
    let t = match parent.table(k)? {
        Some(t) => t,
        None if required => return Err(ConfigError::MissingKey(parent.key(k))),
        None => &EMPTY,
    };
    Ok(Section::new(&parent.key(k), t, known))
}

fn paths(root: &Section, k: &str, base: &Path) -> Result<Vec<PathBuf>, ConfigError> {
    let list = root.required(k, root.strings(k))?;
    if list.is_empty() {
        return Err(root.invalid(k, "needs at least one entry"));
    }
    Ok(list.into_iter().map(|p| base.join(p)).collect())
}

fn to_u32(s: &Section, k: &str, v: u64) -> Result<u32, ConfigError> {
    u32::try_from(v).map_err(|_| s.invalid(k, format!("{v} is too large")))
}

/// Parses a scene document; relative asset paths are joined to `base_dir`.
pub fn parse_scene_config(text: &str, base_dir: &Path) -> Result<SceneConfig, ConfigError> {
    let doc: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    let root = Section::new("", &doc, ROOT_KEYS);
    let mut unknown_keys = Vec::new();
    root.unknown(&mut unknown_keys);

    let templates = paths(&root, "templates", base_dir)?;
    let motions = paths(&root, "motions", base_dir)?;

    let g = sub(&root, "grid", GRID_KEYS, true)?;
    g.unknown(&mut unknown_keys);
    let grid = GridConfig {
        rows: g.required("rows", g.unsigned("rows"))? as usize,
        cols: g.required("cols", g.unsigned("cols"))? as usize,
        spacing_m: g.required("spacing_m", g.float("spacing_m"))?,
    };
    if !(grid.spacing_m.is_finite() && grid.spacing_m > 0.0) {
        return Err(g.invalid("spacing_m", "must be finite and positive"));
    }

    let c = sub(&root, "crowd", CROWD_KEYS, true)?;
    c.unknown(&mut unknown_keys);
    let count = c.required("count", c.unsigned("count"))? as usize;
    let seed = c.unsigned("seed")?.unwrap_or(0);
    if count > grid.capacity() {
        return Err(ConfigError::Capacity {
            rows: grid.rows,
            cols: grid.cols,
            count,
        });
    }

    let cam = sub(&root, "camera", CAMERA_KEYS, false)?;
    cam.unknown(&mut unknown_keys);
    let defaults = CameraConfig::default();
    let camera = CameraConfig {
        position: cam.vec3("position")?.unwrap_or(defaults.position),
        look_at: cam.vec3("look_at")?.unwrap_or(defaults.look_at),
        fov_y_deg: cam.float("fov_y_deg")?.unwrap_or(defaults.fov_y_deg),
        width: cam
            .unsigned("width")?
            .map(|v| to_u32(&cam, "width", v))
            .transpose()?
            .unwrap_or(defaults.width),
        height: cam
            .unsigned("height")?
            .map(|v| to_u32(&cam, "height", v))
            .transpose()?
            .unwrap_or(defaults.height),
    };
    Camera::look_at(
        camera.position,
        camera.look_at,
        camera.fov_y_deg,
        camera.width,
        camera.height,
    )
    .map_err(|e| ConfigError::InvalidValue {
        key: "camera".into(),
        message: e.to_string(),
    })?;

    let l = sub(&root, "lod", LOD_KEYS, false)?;
    l.unknown(&mut unknown_keys);
    let thresholds = l
        .floats("thresholds_m")?
        .unwrap_or_else(|| DEFAULT_THRESHOLDS.to_vec());
    let band = l.float("hysteresis_m")?.unwrap_or(0.0);
    let lod =
        LodPolicy::new(thresholds, band).map_err(|e| l.invalid("thresholds_m", e.to_string()))?;

    let r = sub(&root, "render", RENDER_KEYS, false)?;
    r.unknown(&mut unknown_keys);
    let mut render = RenderSettings::default();
    if let Some(bg) = r.vec3("background_rgb")? {
        render.background = bg;
    }
    if let Some(ts) = r.unsigned("tile_size")? {
        render.tile_size = to_u32(&r, "tile_size", ts)?;
    }
    render.validate().map_err(|m| ConfigError::InvalidValue {
        key: "render".into(),
        message: m,
    })?;

    for k in &unknown_keys {
        log::warn!("unknown scene key `{k}` ignored");
    }
    Ok(SceneConfig {
        templates,
        motions,
        grid,
        count,
        seed,
        camera,
        lod,
        render,
        unknown_keys,
    })
}

pub fn load_scene_config(path: &Path) -> Result<SceneConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scene_config(&text, base)
}
