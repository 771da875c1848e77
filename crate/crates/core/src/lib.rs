//! Handcrafted color and texture descriptors for fish-eye freshness grading.
//!
//! The crate is organised bottom-up:
//!
//! * [`raster`] and [`colorspace`] turn 8-bit BGR images into channel planes
//!   (BGR, 8-bit scaled HSV and CIELAB).
//! * [`color_features`] and [`texture`] compute the descriptor families
//!   (color statistics, variance ratios, percentiles, histograms, LBP, GLCM).
//! * [`segmentation`] localises the circular eye region by radial scanning.
//! * [`fusion`] holds the FS1..FS17 registry and composes descriptor blocks.
//! * [`dataset`] ingests labelled image folders, splits them and persists
//!   feature matrices.
//! * [`classify`] trains and evaluates KNN, logistic regression, MLP,
//!   random forest and extra-trees models.

pub mod classify;
pub mod color_features;
pub mod colorspace;
pub mod dataset;
pub mod error;
pub mod fusion;
pub mod raster;
pub mod segmentation;
pub mod synthetic;
pub mod texture;

pub use error::{Error, Result};
pub use raster::{ChannelPlane, RasterImage};
