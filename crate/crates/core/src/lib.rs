//! Metric depth for monocular endoscopy.
//!
//! A relative (scale-ambiguous) depth map becomes metric once a cylindrical
//! instrument shaft of known radius is visible: its silhouette fixes the
//! shaft's 3-D axis, ray casting against that axis gives metric depths along
//! the shaft, and an affine fit against the relative depth at the same pixels
//! converts the whole frame.

pub mod geometry;
pub mod pose;
pub mod raster;
pub mod fusion;
pub mod stats;
pub mod scale;
pub mod evaluation;
pub mod synthetic;
