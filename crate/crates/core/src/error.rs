use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MathError {
    #[error("non-finite input")]
    NonFinite,
    #[error("quaternion is not normalized (norm {0})")]
    NotNormalized(f32),
    #[error("scale components must be strictly positive")]
    InvalidScale,
    #[error("opacity {0} outside (0, 1]")]
    InvalidOpacity(f32),
    #[error("color components must lie in [0, 1]")]
    InvalidColor,
    #[error("invalid camera: {0}")]
    DegenerateCamera(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AvatarError {
    #[error("joint count mismatch: expected {expected}, got {actual}")]
    JointCountMismatch { expected: usize, actual: usize },
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
    #[error("invalid LoD level {level}: {reason}")]
    InvalidLevel { level: usize, reason: String },
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("invalid motion clip: {0}")]
    InvalidMotion(String),
    #[error("invalid level counts: {0}")]
    InvalidCounts(String),
    #[error("time must be finite and non-negative, got {0}")]
    InvalidTime(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LodError {
    #[error("LoD thresholds must be finite, positive and strictly ascending")]
    UnsortedThresholds,
    #[error("hysteresis band must be finite and non-negative, got {0}")]
    InvalidBand(f32),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrowdError {
    #[error("grid of {rows}x{cols} cells cannot hold {count} instances")]
    InsufficientCapacity {
        rows: usize,
        cols: usize,
        count: usize,
    },
    #[error("crowd needs at least one {0}")]
    MissingAssets(&'static str),
    #[error("template {template} has {joints} joints but motion {motion} has {motion_joints}")]
    SkeletonMismatch {
        template: usize,
        joints: usize,
        motion: usize,
        motion_joints: usize,
    },
    #[error("invalid grid spacing {0}")]
    InvalidSpacing(f32),
    #[error("allocation of {bytes} bytes for posed buffers failed")]
    OutOfMemory { bytes: usize },
}

/// Failures while decoding the binary asset containers.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("file truncated in section `{section}` at byte {offset}")]
    Truncated { section: String, offset: usize },
    #[error("{0} trailing bytes after the last section")]
    TrailingBytes(usize),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A scene's assets could not be loaded or do not fit together.
#[derive(Debug, Error)]
pub enum AssetError {
    #[error("{path}: {source}")]
    Load {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error(transparent)]
    Store(#[from] CrowdError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("type mismatch at `{key}`: {message}")]
    TypeMismatch { key: String, message: String },
    #[error("invalid value at `{key}`: {message}")]
    InvalidValue { key: String, message: String },
    #[error("grid of {rows}x{cols} cells cannot hold {count} instances")]
    Capacity {
        rows: usize,
        cols: usize,
        count: usize,
    },
}

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("png encoding failed: {0}")]
    Png(String),
    #[error("csv encoding failed: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("quality sweep needs a template with at least 2 levels, got {0}")]
    TooFewLevels(usize),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("invalid benchmark matrix: {0}")]
    InvalidMatrix(String),
    #[error("no template level has {0} gaussians")]
    UnknownGaussianCount(usize),
    #[error("invalid benchmark report: {0}")]
    InvalidReport(String),
}
