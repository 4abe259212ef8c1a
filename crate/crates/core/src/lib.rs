//! Tooling that turns sparse reconstructions of photo collections into
//! novel-view-synthesis pairs: model IO, camera geometry, monocular depth
//! alignment, depth-based warping with validity masks, pair mining and masked
//! reconstruction metrics.

pub mod align;
pub mod camera;
pub mod colmap;
pub mod depth;
pub mod error;
pub mod geometry;
pub mod keypoints;
pub mod metrics;
pub mod pairs;
pub mod timestamp;
pub mod warp;

pub use error::{Error, Result};
