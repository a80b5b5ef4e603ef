//! Crowd rendering with skinned, multi-resolution 3D Gaussian avatars.

// `!(x > 0.0)` style checks are kept so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod avatar;
pub mod bench;
pub mod crowd;
pub mod error;
pub mod io;
pub mod lod;
pub mod math;
pub mod metrics;
pub mod render;
