//! Optional TOML config file. Every key mirrors a command-line flag; values
//! given on the command line take precedence.
//!
//! ```toml
//! workers = 4
//!
//! [preprocess]
//! algorithm = "lanczos"
//! tile = true
//!
//! [roundtrip]
//! algos = ["nearest", "bilinear", "bicubic", "lanczos", "rdip"]
//! ssim_dynamic_range = 255
//! ```

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub workers: Option<usize>,
    #[serde(default)]
    pub preprocess: PreprocessFile,
    #[serde(default)]
    pub roundtrip: RoundtripFile,
    #[serde(default)]
    pub split: SplitFile,
    #[serde(default)]
    pub tile: TileFile,
    #[serde(default)]
    pub metrics: MetricsFile,
    #[serde(default)]
    pub psnr: PsnrFile,
    #[serde(default)]
    pub ssim: SsimFile,
}

/// Resampling keys shared by `preprocess` and `roundtrip`.
#[derive(Debug, Default, Clone)]
pub struct ResampleFile {
    pub scale: Option<u32>,
    pub lanczos_taps: Option<u32>,
    pub rdip_lambda: Option<f64>,
    pub rdip_epsilon: Option<f64>,
    pub antialias: Option<bool>,
    pub external_dir: Option<PathBuf>,
}

macro_rules! resample_keys {
    ($t:ty) => {
        impl $t {
            pub fn resample(&self) -> ResampleFile {
                ResampleFile {
                    scale: self.scale,
                    lanczos_taps: self.lanczos_taps,
                    rdip_lambda: self.rdip_lambda,
                    rdip_epsilon: self.rdip_epsilon,
                    antialias: self.antialias,
                    external_dir: self.external_dir.clone(),
                }
            }
        }
    };
}

resample_keys!(PreprocessFile);
resample_keys!(RoundtripFile);

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessFile {
    pub manifest: Option<PathBuf>,
    pub source: Option<String>,
    pub out: Option<PathBuf>,
    pub algorithm: Option<String>,
    pub crop_threshold: Option<f64>,
    pub target_width: Option<usize>,
    pub target_height: Option<usize>,
    pub pad_fill: Option<u8>,
    pub center_crop: Option<bool>,
    pub tile: Option<bool>,
    pub scale: Option<u32>,
    pub lanczos_taps: Option<u32>,
    pub rdip_lambda: Option<f64>,
    pub rdip_epsilon: Option<f64>,
    pub antialias: Option<bool>,
    pub external_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundtripFile {
    pub manifest: Option<PathBuf>,
    pub source: Option<String>,
    pub out: Option<PathBuf>,
    pub algos: Option<Vec<String>>,
    pub upscale_taps: Option<u32>,
    pub ssim_window: Option<usize>,
    pub ssim_stride: Option<usize>,
    pub ssim_dynamic_range: Option<f64>,
    pub psnr_peak: Option<f64>,
    pub scale: Option<u32>,
    pub lanczos_taps: Option<u32>,
    pub rdip_lambda: Option<f64>,
    pub rdip_epsilon: Option<f64>,
    pub antialias: Option<bool>,
    pub external_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFile {
    pub inputs: Option<Vec<String>>,
    pub out: Option<PathBuf>,
    pub test_frac: Option<f64>,
    pub val_frac: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileFile {
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsFile {
    pub predictions: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsnrFile {
    pub peak: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsimFile {
    pub window: Option<usize>,
    pub stride: Option<usize>,
    pub dynamic_range: Option<f64>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
    }
}

/// Command-line value, then config-file value, then `default`.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Like [`pick`] for a required setting.
pub fn require<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    flag.or(file).with_context(|| {
        format!("--{name} is required (on the command line or in the config file)")
    })
}
