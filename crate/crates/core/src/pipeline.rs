//! Per-image preprocessing: crop borders, downscale, pad to a fixed canvas
//! and optionally cut into quadrants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{
    crop_borders, fit_to, pad_to, tile_quadrants, CropBox, Image, Quadrants, DEFAULT_CROP_THRESHOLD,
};
use crate::resample::{downscale, Algorithm, ResampleSpec};

pub const DEFAULT_TARGET: usize = 600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub crop_threshold: f64,
    pub downscale: ResampleSpec,
    pub target_width: usize,
    pub target_height: usize,
    pub pad_fill: u8,
    /// Center-crop downscaled images larger than the target instead of
    /// failing.
    pub center_crop: bool,
    pub tile: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            crop_threshold: DEFAULT_CROP_THRESHOLD,
            downscale: ResampleSpec::new(Algorithm::Lanczos),
            target_width: DEFAULT_TARGET,
            target_height: DEFAULT_TARGET,
            pad_fill: 0,
            center_crop: false,
            tile: false,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.downscale.algorithm != Algorithm::External {
            self.downscale.validate()?;
        }
        if !self.crop_threshold.is_finite() || self.crop_threshold < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "crop threshold must be a non-negative number, got {}",
                self.crop_threshold
            )));
        }
        if self.target_width == 0 || self.target_height == 0 {
            return Err(Error::InvalidSpec("target size must be positive".into()));
        }
        if self.tile
            && (!self.target_width.is_multiple_of(2) || !self.target_height.is_multiple_of(2))
        {
            return Err(Error::InvalidSpec(format!(
                "tiling needs an even target size, got {}x{}",
                self.target_width, self.target_height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub image: Image,
    pub crop_box: CropBox,
    pub downscaled_dims: (usize, usize),
    pub offset_x: usize,
    pub offset_y: usize,
    pub tiles: Option<Quadrants>,
}

/// Crop, downscale, pad and (optionally) tile one image.
pub fn preprocess_one(image: &Image, config: &PreprocessConfig) -> Result<Preprocessed> {
    config.validate()?;
    if config.downscale.algorithm == Algorithm::External {
        return Err(Error::InvalidSpec(
            "external downscales are finished with finish_preprocess".into(),
        ));
    }
    let (cropped, crop_box) = crop_borders(image, config.crop_threshold)?;
    let small = downscale(&cropped, &config.downscale)?;
    finish_preprocess(&small, crop_box, config)
}

/// Pad and tile an already downscaled image.
pub fn finish_preprocess(
    small: &Image,
    crop_box: CropBox,
    config: &PreprocessConfig,
) -> Result<Preprocessed> {
    let (tw, th) = (config.target_width, config.target_height);
    let padded = if config.center_crop {
        fit_to(small, tw, th, config.pad_fill)?
    } else {
        pad_to(small, tw, th, config.pad_fill)?
    };
    let tiles = if config.tile {
        Some(tile_quadrants(&padded.image)?)
    } else {
        None
    };
    Ok(Preprocessed {
        image: padded.image,
        crop_box,
        downscaled_dims: small.dimensions(),
        offset_x: padded.offset_x,
        offset_y: padded.offset_y,
        tiles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(canvas: usize, diameter: usize) -> Image {
        let r = diameter as f64 / 2.0;
        let c = canvas as f64 / 2.0;
        let mut data = vec![0u8; canvas * canvas * 3];
        for y in 0..canvas {
            for x in 0..canvas {
                let dx = x as f64 + 0.5 - c;
                let dy = y as f64 + 0.5 - c;
                if dx * dx + dy * dy <= r * r {
                    let i = (y * canvas + x) * 3;
                    data[i..i + 3].copy_from_slice(&[180, 90, 40]);
                }
            }
        }
        Image::from_u8(canvas, canvas, 3, data).unwrap()
    }

    #[test]
    fn small_disc_reaches_target() {
        let cfg = PreprocessConfig {
            target_width: 20,
            target_height: 20,
            tile: true,
            ..Default::default()
        };
        let out = preprocess_one(&disc(200, 120), &cfg).unwrap();
        assert_eq!(out.image.dimensions(), (20, 20));
        let (w, h) = out.downscaled_dims;
        assert_eq!(out.offset_x, (20 - w) / 2);
        assert_eq!(out.offset_y, (20 - h) / 2);
        assert_eq!(out.tiles.unwrap().stitch().unwrap(), out.image);
    }

    #[test]
    fn oversize_needs_center_crop() {
        let mut cfg = PreprocessConfig {
            target_width: 10,
            target_height: 10,
            ..Default::default()
        };
        let img = disc(200, 160);
        assert!(matches!(
            preprocess_one(&img, &cfg),
            Err(Error::Oversize { .. })
        ));
        cfg.center_crop = true;
        assert_eq!(
            preprocess_one(&img, &cfg).unwrap().image.dimensions(),
            (10, 10)
        );
    }

    #[test]
    fn config_checks() {
        let cfg = PreprocessConfig {
            target_width: 11,
            tile: true,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = PreprocessConfig {
            crop_threshold: -1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = PreprocessConfig {
            downscale: ResampleSpec::external("x"),
            ..Default::default()
        };
        assert!(preprocess_one(&disc(16, 8), &cfg).is_err());
        assert!(matches!(
            preprocess_one(
                &Image::filled(16, 16, 3, 0).unwrap(),
                &PreprocessConfig::default()
            ),
            Err(Error::FullyBackground { .. })
        ));
    }
}
