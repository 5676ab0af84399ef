//! Integer-factor downscaling and Lanczos upscaling.
//!
//! All separable resamplers share one coordinate convention: output sample
//! `i` of an axis resampled by `ratio = in / out` sits at source coordinate
//! `(i + 0.5) * ratio - 0.5`. Downscaling stretches the kernel support by the
//! scale factor (anti-aliasing) unless [`ResampleSpec::antialias`] is off.
//! Taps that fall outside the image are clamped to the nearest edge sample,
//! and weights are normalized to sum to one for every output sample.
//!
//! Contributions are accumulated in pairs mirrored about the sample centre,
//! so resampling a mirrored image gives exactly the mirrored result.

pub mod external;
pub mod kernel;
mod rdip;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
pub use kernel::{kernel_weight, Kernel};
pub use rdip::{box_downscale, rdip_downscale};

pub const DEFAULT_SCALE: u32 = 8;
pub const DEFAULT_LANCZOS_TAPS: u32 = 4;
pub const DEFAULT_RDIP_LAMBDA: f64 = 1.0;
pub const DEFAULT_RDIP_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Nearest,
    Bilinear,
    Bicubic,
    Lanczos,
    Rdip,
    External,
}

impl Algorithm {
    pub const NATIVE: [Algorithm; 5] = [
        Algorithm::Nearest,
        Algorithm::Bilinear,
        Algorithm::Bicubic,
        Algorithm::Lanczos,
        Algorithm::Rdip,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Nearest => "nearest",
            Algorithm::Bilinear => "bilinear",
            Algorithm::Bicubic => "bicubic",
            Algorithm::Lanczos => "lanczos",
            Algorithm::Rdip => "rdip",
            Algorithm::External => "external",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nearest" | "nn" => Ok(Algorithm::Nearest),
            "bilinear" => Ok(Algorithm::Bilinear),
            "bicubic" => Ok(Algorithm::Bicubic),
            "lanczos" => Ok(Algorithm::Lanczos),
            "rdip" => Ok(Algorithm::Rdip),
            "external" | "lid" => Ok(Algorithm::External),
            other => Err(Error::InvalidSpec(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// A downscaling algorithm together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleSpec {
    pub algorithm: Algorithm,
    pub scale: u32,
    pub lanczos_taps: u32,
    pub rdip_lambda: f64,
    pub rdip_epsilon: f64,
    /// Stretch the kernel support by the scale factor when downscaling.
    /// Off gives plain interpolation at the sample positions.
    pub antialias: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub external_dir: Option<PathBuf>,
}

impl ResampleSpec {
    pub fn new(algorithm: Algorithm) -> Self {
        ResampleSpec {
            algorithm,
            scale: DEFAULT_SCALE,
            lanczos_taps: DEFAULT_LANCZOS_TAPS,
            rdip_lambda: DEFAULT_RDIP_LAMBDA,
            rdip_epsilon: DEFAULT_RDIP_EPSILON,
            antialias: true,
            external_dir: None,
        }
    }

    pub fn with_scale(mut self, scale: u32) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_lanczos_taps(mut self, taps: u32) -> Self {
        self.lanczos_taps = taps;
        self
    }

    pub fn with_rdip(mut self, lambda: f64, epsilon: f64) -> Self {
        self.rdip_lambda = lambda;
        self.rdip_epsilon = epsilon;
        self
    }

    pub fn external(dir: impl Into<PathBuf>) -> Self {
        let mut spec = ResampleSpec::new(Algorithm::External);
        spec.external_dir = Some(dir.into());
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale < 1 {
            return Err(Error::InvalidSpec("scale must be at least 1".into()));
        }
        if ![4, 6, 8].contains(&self.lanczos_taps) {
            return Err(Error::InvalidSpec(format!(
                "lanczos taps must be 4, 6 or 8, got {}",
                self.lanczos_taps
            )));
        }
        if !(self.rdip_lambda >= 0.0 && self.rdip_lambda.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "rdip lambda must be a finite non-negative number, got {}",
                self.rdip_lambda
            )));
        }
        if !(self.rdip_epsilon > 0.0 && self.rdip_epsilon.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "rdip epsilon must be positive, got {}",
                self.rdip_epsilon
            )));
        }
        if self.algorithm == Algorithm::Rdip && self.scale < 2 {
            return Err(Error::InvalidSpec(
                "rdip needs a scale of at least 2".into(),
            ));
        }
        if self.algorithm == Algorithm::External && self.external_dir.is_none() {
            return Err(Error::InvalidSpec(
                "external algorithm needs a source directory".into(),
            ));
        }
        Ok(())
    }

    /// Report label: the algorithm name, with the tap count for non-default
    /// Lanczos windows (`lanczos6`, `lanczos8`).
    pub fn label(&self) -> String {
        match self.algorithm {
            Algorithm::Lanczos if self.lanczos_taps != DEFAULT_LANCZOS_TAPS => {
                format!("lanczos{}", self.lanczos_taps)
            }
            a => a.name().to_string(),
        }
    }
}

/// Output size of an integer-factor downscale.
pub fn downscaled_dims(width: usize, height: usize, scale: u32) -> (usize, usize) {
    let s = scale as usize;
    (width.div_ceil(s), height.div_ceil(s))
}

/// Weighted source taps for one output sample. Each entry holds taps at
/// equal distance from the centre; entries run from the outermost inward.
#[derive(Debug, Clone, PartialEq)]
struct Taps(Vec<[(usize, f64); 2]>);

impl Taps {
    #[inline]
    fn apply(&self, src: &[f64], stride: usize, offset: usize) -> f64 {
        let mut acc = 0.0;
        for &[(ja, wa), (jb, wb)] in &self.0 {
            acc += wa * src[ja * stride + offset] + wb * src[jb * stride + offset];
        }
        acc
    }
}

#[derive(Debug, Clone, Copy)]
enum AxisFilter {
    Nearest,
    Kernel { kernel: Kernel, stretch: f64 },
}

/// Builds the taps of every output sample along one axis.
fn axis_taps(
    in_len: usize,
    out_len: usize,
    center_of: impl Fn(usize) -> f64,
    filter: AxisFilter,
) -> Vec<Taps> {
    let last = (in_len - 1) as f64;
    let clamp = |j: f64| j.clamp(0.0, last) as usize;
    (0..out_len)
        .map(|i| {
            let c = center_of(i);
            match filter {
                AxisFilter::Nearest => {
                    // ties round up
                    let j = clamp((c + 0.5).floor());
                    Taps(vec![[(j, 1.0), (j, 0.0)]])
                }
                AxisFilter::Kernel { kernel, stretch } => {
                    let radius = kernel.support() * stretch;
                    let lo = (c - radius).ceil() as i64;
                    let hi = (c + radius).floor() as i64;
                    let mut taps: Vec<(f64, f64, usize)> = (lo..=hi)
                        .filter_map(|j| {
                            let j = j as f64;
                            let d = (j - c).abs();
                            let w = kernel.weight(d / stretch);
                            (w != 0.0).then_some((d, w, clamp(j)))
                        })
                        .collect();
                    // outermost first; within a distance, leftmost first
                    taps.sort_by(|a, b| b.0.total_cmp(&a.0));
                    let mut groups: Vec<[(usize, f64); 2]> = Vec::with_capacity(taps.len());
                    let mut k = 0;
                    while k < taps.len() {
                        let (d, w, j) = taps[k];
                        if k + 1 < taps.len() && taps[k + 1].0 == d {
                            let (_, w2, j2) = taps[k + 1];
                            groups.push([(j, w), (j2, w2)]);
                            k += 2;
                        } else {
                            groups.push([(j, w), (j, 0.0)]);
                            k += 1;
                        }
                    }
                    let total: f64 = groups.iter().fold(0.0, |acc, g| acc + (g[0].1 + g[1].1));
                    for g in &mut groups {
                        g[0].1 /= total;
                        g[1].1 /= total;
                    }
                    Taps(groups)
                }
            }
        })
        .collect()
}

/// Separable resampling to `out_w` x `out_h`.
fn resample_separable(
    image: &Image,
    out_w: usize,
    out_h: usize,
    x_taps: &[Taps],
    y_taps: &[Taps],
) -> Image {
    let (w, h, c) = (image.width(), image.height(), image.channels());

    // horizontal pass: w x h -> out_w x h
    let mut mid = vec![0.0f64; out_w * h * c];
    mid.par_chunks_mut(out_w * c)
        .enumerate()
        .for_each(|(y, out_row)| {
            let row: Vec<f64> = (0..w * c).map(|k| image.native_at(y * w * c + k)).collect();
            for (ox, taps) in x_taps.iter().enumerate() {
                for ch in 0..c {
                    out_row[ox * c + ch] = taps.apply(&row, c, ch);
                }
            }
        });

    // vertical pass: out_w x h -> out_w x out_h
    let row_len = out_w * c;
    let mut out = vec![0.0f64; out_w * out_h * c];
    out.par_chunks_mut(row_len)
        .zip(y_taps.par_iter())
        .for_each(|(out_row, taps)| {
            // same per-sample accumulation order as Taps::apply
            for &[(ja, wa), (jb, wb)] in &taps.0 {
                let ra = &mid[ja * row_len..(ja + 1) * row_len];
                let rb = &mid[jb * row_len..(jb + 1) * row_len];
                for ((v, &a), &b) in out_row.iter_mut().zip(ra).zip(rb) {
                    *v += wa * a + wb * b;
                }
            }
        });

    Image::from_native_values(out_w, out_h, c, image.kind(), &out)
}

fn downscale_center(scale: f64) -> impl Fn(usize) -> f64 {
    move |i| (i as f64 + 0.5) * scale - 0.5
}

/// Downscales by the integer factor in `spec` with one of the native
/// algorithms. The output is `ceil(w / s)` x `ceil(h / s)`.
pub fn downscale(image: &Image, spec: &ResampleSpec) -> Result<Image> {
    spec.validate()?;
    let s = spec.scale;
    let kernel = match spec.algorithm {
        Algorithm::Nearest => None,
        Algorithm::Bilinear => Some(Kernel::Triangle),
        Algorithm::Bicubic => Some(Kernel::bicubic()),
        Algorithm::Lanczos => Some(Kernel::lanczos_taps(spec.lanczos_taps)),
        Algorithm::Rdip => return rdip_downscale(image, s, spec.rdip_lambda, spec.rdip_epsilon),
        Algorithm::External => {
            return Err(Error::InvalidSpec(
                "external downscales are imported with resample::external, not computed".into(),
            ))
        }
    };
    let filter = match kernel {
        None => AxisFilter::Nearest,
        Some(kernel) => AxisFilter::Kernel {
            kernel,
            stretch: if spec.antialias { s as f64 } else { 1.0 },
        },
    };
    let (w, h) = image.dimensions();
    let (ow, oh) = downscaled_dims(w, h, s);
    let x_taps = axis_taps(w, ow, downscale_center(s as f64), filter);
    let y_taps = axis_taps(h, oh, downscale_center(s as f64), filter);
    Ok(resample_separable(image, ow, oh, &x_taps, &y_taps))
}

/// Upscales by an integer factor with a Lanczos window of `taps` taps
/// (unstretched support, i.e. interpolation).
pub fn upscale_lanczos(image: &Image, scale: u32, taps: u32) -> Result<Image> {
    if scale < 1 {
        return Err(Error::InvalidSpec(
            "upscale factor must be at least 1".into(),
        ));
    }
    if ![4, 6, 8].contains(&taps) {
        return Err(Error::InvalidSpec(format!(
            "lanczos taps must be 4, 6 or 8, got {taps}"
        )));
    }
    let s = scale as usize;
    let (w, h) = image.dimensions();
    let (ow, oh) = (w * s, h * s);
    let filter = AxisFilter::Kernel {
        kernel: Kernel::lanczos_taps(taps),
        stretch: 1.0,
    };
    let center = move |i: usize| (i as f64 + 0.5) / scale as f64 - 0.5;
    let x_taps = axis_taps(w, ow, center, filter);
    let y_taps = axis_taps(h, oh, center, filter);
    Ok(resample_separable(image, ow, oh, &x_taps, &y_taps))
}

/// Upscales with the 4-tap (`a = 2`) Lanczos kernel.
pub fn upscale_lanczos4(image: &Image, scale: u32) -> Result<Image> {
    upscale_lanczos(image, scale, 4)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: usize, h: usize, data: Vec<u8>) -> Image {
        Image::from_u8(w, h, 1, data).unwrap()
    }

    #[test]
    fn bilinear_2x2_average() {
        let img = gray(2, 2, vec![10, 20, 30, 40]);
        let out = downscale(&img, &ResampleSpec::new(Algorithm::Bilinear).with_scale(2)).unwrap();
        assert_eq!(out.as_u8().unwrap(), &[25]);
    }

    #[test]
    fn nearest_picks_rounded_centre() {
        let data: Vec<u8> = (0..64).collect();
        let img = gray(8, 8, data);
        let out = downscale(&img, &ResampleSpec::new(Algorithm::Nearest)).unwrap();
        // centre (3.5, 3.5) rounds up to (4, 4)
        assert_eq!(out.as_u8().unwrap(), &[4 * 8 + 4]);
    }

    #[test]
    fn output_dims_round_up() {
        let img = Image::filled(17, 9, 3, 1).unwrap();
        for alg in Algorithm::NATIVE {
            let out = downscale(&img, &ResampleSpec::new(alg)).unwrap();
            assert_eq!(out.dimensions(), (3, 2), "{alg}");
            assert_eq!(out.channels(), 3);
        }
    }

    #[test]
    fn constant_images_stay_constant() {
        let img = Image::filled(37, 21, 3, 77).unwrap();
        for alg in Algorithm::NATIVE {
            for s in [2, 4, 8] {
                let out = downscale(&img, &ResampleSpec::new(alg).with_scale(s)).unwrap();
                assert!(out.as_u8().unwrap().iter().all(|&v| v == 77), "{alg} x{s}");
            }
        }
        let up = upscale_lanczos4(&img, 8).unwrap();
        assert!(up.as_u8().unwrap().iter().all(|&v| v == 77));
    }

    #[test]
    fn upscale_identity_and_single_pixel() {
        let data: Vec<u8> = (0..48).map(|i| (i * 37 % 256) as u8).collect();
        let img = Image::from_u8(4, 4, 3, data).unwrap();
        assert_eq!(upscale_lanczos4(&img, 1).unwrap(), img);

        let one = gray(1, 1, vec![200]);
        let up = upscale_lanczos4(&one, 8).unwrap();
        assert_eq!(up.dimensions(), (8, 8));
        assert!(up.as_u8().unwrap().iter().all(|&v| v == 200));
    }

    #[test]
    fn clamps_overshoot() {
        // a sharp step makes Lanczos and bicubic ring beyond [0, 255]
        let mut d = vec![0u8; 32 * 4];
        for y in 0..4 {
            for x in 16..32 {
                d[y * 32 + x] = 255;
            }
        }
        let img = gray(32, 4, d);
        let up = upscale_lanczos4(&img, 4).unwrap();
        assert_eq!(up.dimensions(), (128, 16));
        let real = upscale_lanczos4(&img.to_real(), 4).unwrap();
        assert!(real
            .as_real()
            .unwrap()
            .iter()
            .all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn real_images_stay_real() {
        let img = Image::filled(16, 16, 1, 128).unwrap().to_real();
        let out = downscale(&img, &ResampleSpec::new(Algorithm::Bicubic).with_scale(4)).unwrap();
        assert!(out.as_real().is_some());
        assert!(out
            .as_real()
            .unwrap()
            .iter()
            .all(|&v| (v - 128.0 / 255.0).abs() < 1e-6));
    }

    #[test]
    fn spec_validation() {
        let img = Image::filled(8, 8, 1, 0).unwrap();
        assert!(downscale(&img, &ResampleSpec::new(Algorithm::Nearest).with_scale(0)).is_err());
        assert!(downscale(
            &img,
            &ResampleSpec::new(Algorithm::Lanczos).with_lanczos_taps(5)
        )
        .is_err());
        assert!(downscale(&img, &ResampleSpec::new(Algorithm::Rdip).with_scale(1)).is_err());
        assert!(downscale(
            &img,
            &ResampleSpec::new(Algorithm::Rdip).with_rdip(1.0, 0.0)
        )
        .is_err());
        assert!(downscale(&img, &ResampleSpec::external("/tmp")).is_err());
        assert!(ResampleSpec::new(Algorithm::External).validate().is_err());
    }

    #[test]
    fn labels_and_parsing() {
        assert_eq!(ResampleSpec::new(Algorithm::Lanczos).label(), "lanczos");
        assert_eq!(
            ResampleSpec::new(Algorithm::Lanczos)
                .with_lanczos_taps(8)
                .label(),
            "lanczos8"
        );
        assert_eq!("Bicubic".parse::<Algorithm>().unwrap(), Algorithm::Bicubic);
        assert!("area".parse::<Algorithm>().is_err());
    }

    #[test]
    fn interpolation_only_mode_narrows_support() {
        let taps = axis_taps(
            16,
            2,
            downscale_center(8.0),
            AxisFilter::Kernel {
                kernel: Kernel::Triangle,
                stretch: 1.0,
            },
        );
        // centre 3.5: only samples 3 and 4 contribute, half each
        assert_eq!(taps[0].0, vec![[(3, 0.5), (4, 0.5)]]);
    }
}
