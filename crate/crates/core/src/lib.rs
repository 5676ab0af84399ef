//! Fundus image preprocessing for diabetic-retinopathy classification:
//! border cropping, downscaling, padding and tiling, round-trip image quality
//! evaluation of downscalers, dataset manifests and splits, and binary DR
//! metrics.

pub mod dataset;
pub mod error;
pub mod harness;
pub mod image;
pub mod io;
pub mod iqa;
pub mod metrics;
pub mod pipeline;
pub mod resample;

pub use error::{Error, Result};
pub use image::Image;
