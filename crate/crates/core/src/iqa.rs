//! Full-reference image quality: MSE, PSNR and sliding-window SSIM.
//!
//! All metrics work on the 8-bit scale (real images are multiplied by 255).
//! MSE and PSNR pool every channel; SSIM is evaluated per channel and the
//! channel scores are averaged.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::image::Image;

pub const DEFAULT_PEAK: f64 = 255.0;

fn check_same_shape(x: &Image, y: &Image) -> Result<()> {
    if x.dimensions() != y.dimensions() || x.channels() != y.channels() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            x.width(),
            x.height(),
            x.channels(),
            y.width(),
            y.height(),
            y.channels()
        )));
    }
    Ok(())
}

/// Mean squared difference over all samples, in 8-bit units.
pub fn mse(x: &Image, y: &Image) -> Result<f64> {
    check_same_shape(x, y)?;
    let n = x.samples().len();
    let sum = match (x.as_u8(), y.as_u8()) {
        (Some(a), Some(b)) => a
            .iter()
            .zip(b)
            .map(|(&p, &q)| {
                let d = p as i64 - q as i64;
                (d * d) as u64
            })
            .sum::<u64>() as f64,
        _ => {
            let mut acc = NeumaierSum::default();
            for i in 0..n {
                let d = x.level_at(i) - y.level_at(i);
                acc.add(d * d);
            }
            acc.total()
        }
    };
    Ok(sum / n as f64)
}

/// Peak signal-to-noise ratio in decibels. Identical images give
/// [`Psnr::INFINITE`].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Psnr(pub f64);

impl Psnr {
    pub const INFINITE: Psnr = Psnr(f64::INFINITY);

    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else if let Some(p) = f.precision() {
            write!(f, "{:.*}", p, self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Psnr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Psnr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Psnr(v)),
            Raw::Text(t) if t == "inf" => Ok(Psnr::INFINITE),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid PSNR {t:?}"))),
        }
    }
}

/// `10 log10(peak^2 / MSE)`.
pub fn psnr(x: &Image, y: &Image, peak: f64) -> Result<Psnr> {
    if peak.is_nan() || peak <= 0.0 {
        return Err(Error::InvalidSpec(format!(
            "PSNR peak must be positive, got {peak}"
        )));
    }
    let m = mse(x, y)?;
    Ok(psnr_from_mse(m, peak))
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> Psnr {
    if mse == 0.0 {
        Psnr::INFINITE
    } else {
        Psnr(10.0 * (peak * peak / mse).log10())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub stride: usize,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range `L` of the samples.
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 8,
            stride: 1,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::InvalidSsimParams("window must be at least 2".into()));
        }
        if self.stride < 1 {
            return Err(Error::InvalidSsimParams("stride must be at least 1".into()));
        }
        if self.dynamic_range.is_nan() || self.dynamic_range <= 0.0 {
            return Err(Error::InvalidSsimParams(
                "dynamic range must be positive".into(),
            ));
        }
        if !(self.c1() > 0.0 && self.c2() > 0.0) {
            return Err(Error::InvalidSsimParams(
                "k1 and k2 must be non-zero".into(),
            ));
        }
        Ok(())
    }
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// SSIM of one window from its raw sums.
#[inline]
fn window_ssim(n: f64, sums: &[f64; 5], c1: f64, c2: f64) -> f64 {
    let [sx, sy, sxx, syy, sxy] = *sums;
    let mx = sx / n;
    let my = sy / n;
    let nn = n * n;
    let vx = (n * sxx - sx * sx) / nn;
    let vy = (n * syy - sy * sy) / nn;
    let cov = (n * sxy - sx * sy) / nn;
    ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

// window rows handled per parallel task
const ROW_BLOCK: usize = 16;

fn ssim_channel(x: &Image, y: &Image, ch: usize, p: &SsimParams) -> f64 {
    let (w, h, c) = (x.width(), x.height(), x.channels());
    let win = p.window;
    let (c1, c2) = (p.c1(), p.c2());
    let n = (win * win) as f64;
    let ys: Vec<usize> = (0..=h - win).step_by(p.stride).collect();
    let xs: Vec<usize> = (0..=w - win).step_by(p.stride).collect();

    let row_sums: Vec<f64> = ys
        .par_chunks(ROW_BLOCK)
        .flat_map_iter(|block| {
            // per-column sums of x, y, x^2, y^2, xy over the window rows
            let mut cols = vec![[0.0f64; 5]; w];
            let add_row = |cols: &mut [[f64; 5]], row: usize, sign: f64| {
                for (xi, col) in cols.iter_mut().enumerate() {
                    let i = (row * w + xi) * c + ch;
                    let (a, b) = (x.level_at(i), y.level_at(i));
                    col[0] += sign * a;
                    col[1] += sign * b;
                    col[2] += sign * a * a;
                    col[3] += sign * b * b;
                    col[4] += sign * a * b;
                }
            };
            let mut out = Vec::with_capacity(block.len());
            let mut prev: Option<usize> = None;
            for &y0 in block {
                match prev {
                    Some(py) if y0 - py < win => {
                        for r in py..y0 {
                            add_row(&mut cols, r, -1.0);
                        }
                        for r in py + win..y0 + win {
                            add_row(&mut cols, r, 1.0);
                        }
                    }
                    _ => {
                        for col in cols.iter_mut() {
                            *col = [0.0; 5];
                        }
                        for r in y0..y0 + win {
                            add_row(&mut cols, r, 1.0);
                        }
                    }
                }
                prev = Some(y0);

                let mut acc = NeumaierSum::default();
                for &x0 in &xs {
                    let mut s = [0.0f64; 5];
                    for col in &cols[x0..x0 + win] {
                        for k in 0..5 {
                            s[k] += col[k];
                        }
                    }
                    acc.add(window_ssim(n, &s, c1, c2));
                }
                out.push(acc.total());
            }
            out
        })
        .collect();

    let mut total = NeumaierSum::default();
    for v in row_sums {
        total.add(v);
    }
    total.total() / (xs.len() * ys.len()) as f64
}

/// Mean SSIM over all `window x window` positions (moved by `stride`),
/// averaged over channels.
pub fn ssim(x: &Image, y: &Image, params: &SsimParams) -> Result<f64> {
    params.validate()?;
    check_same_shape(x, y)?;
    let (w, h) = x.dimensions();
    if w < params.window || h < params.window {
        return Err(Error::SmallerThanWindow {
            width: w,
            height: h,
            window: params.window,
        });
    }
    let c = x.channels();
    let total: f64 = (0..c).map(|ch| ssim_channel(x, y, ch, params)).sum();
    Ok(total / c as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: usize, h: usize, data: Vec<u8>) -> Image {
        Image::from_u8(w, h, 1, data).unwrap()
    }

    #[test]
    fn mse_cases() {
        let a = Image::filled(4, 3, 3, 10).unwrap();
        let b = Image::filled(4, 3, 3, 11).unwrap();
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(mse(&a, &b).unwrap(), 1.0);
        let z = Image::filled(4, 3, 3, 0).unwrap();
        let f = Image::filled(4, 3, 3, 255).unwrap();
        assert_eq!(mse(&z, &f).unwrap(), 65025.0);
        assert_eq!(mse(&z.to_real(), &f.to_real()).unwrap(), 65025.0);
        assert!(mse(&a, &Image::filled(4, 3, 1, 10).unwrap()).is_err());
    }

    #[test]
    fn psnr_cases() {
        let a = Image::filled(4, 4, 1, 10).unwrap();
        let b = Image::filled(4, 4, 1, 11).unwrap();
        assert!(psnr(&a, &a, 255.0).unwrap().is_infinite());
        let v = psnr(&a, &b, 255.0).unwrap().value();
        assert!((v - 48.130_803_608_679_1).abs() < 1e-9);
        let z = Image::filled(4, 4, 1, 0).unwrap();
        let f = Image::filled(4, 4, 1, 255).unwrap();
        assert_eq!(psnr(&z, &f, 255.0).unwrap().value(), 0.0);
        assert!(psnr(&a, &b, 0.0).is_err());
    }

    #[test]
    fn psnr_serializes_infinity_as_text() {
        assert_eq!(serde_json::to_string(&Psnr::INFINITE).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&Psnr(1.5)).unwrap(), "1.5");
        let back: Psnr = serde_json::from_str("\"inf\"").unwrap();
        assert!(back.is_infinite());
        assert_eq!(format!("{:.2}", Psnr(1.2345)), "1.23");
        assert_eq!(format!("{:.2}", Psnr::INFINITE), "inf");
    }

    #[test]
    fn ssim_identity_is_exactly_one() {
        let data: Vec<u8> = (0..20 * 13 * 3).map(|i| (i * 97 % 256) as u8).collect();
        let a = Image::from_u8(20, 13, 3, data).unwrap();
        assert_eq!(ssim(&a, &a, &SsimParams::default()).unwrap(), 1.0);
    }

    #[test]
    fn ssim_single_window() {
        let a = gray(8, 8, (0..64).collect());
        let b = gray(8, 8, (0..64).map(|v| 63 - v).collect());
        let s = ssim(&a, &b, &SsimParams::default()).unwrap();
        // one window: equal means and variances, covariance = -variance
        let n = 64.0;
        let mean = 31.5;
        let var = (0..64).map(|v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        let p = SsimParams::default();
        let expected = ((2.0 * mean * mean + p.c1()) * (-2.0 * var + p.c2()))
            / ((2.0 * mean * mean + p.c1()) * (2.0 * var + p.c2()));
        assert!((s - expected).abs() < 1e-12);
    }

    #[test]
    fn ssim_errors() {
        let a = gray(7, 9, vec![0; 63]);
        assert!(matches!(
            ssim(&a, &a, &SsimParams::default()),
            Err(Error::SmallerThanWindow { .. })
        ));
        let b = gray(9, 9, vec![0; 81]);
        let c = gray(9, 10, vec![0; 90]);
        assert!(ssim(&b, &c, &SsimParams::default()).is_err());
        let bad = SsimParams {
            window: 1,
            ..SsimParams::default()
        };
        assert!(ssim(&b, &b, &bad).is_err());
    }

    #[test]
    fn ssim_literal_l7_is_supported() {
        let a = gray(9, 9, (0..81).map(|v| v as u8).collect());
        let b = gray(9, 9, (0..81).map(|v| (v as u8) / 2).collect());
        let p = SsimParams {
            dynamic_range: 7.0,
            ..SsimParams::default()
        };
        let s7 = ssim(&a, &b, &p).unwrap();
        let s255 = ssim(&a, &b, &SsimParams::default()).unwrap();
        assert!(s7.is_finite() && s255.is_finite());
        assert_ne!(s7, s255);
    }

    #[test]
    fn strided_windows() {
        let data: Vec<u8> = (0..32 * 32).map(|i| (i * 13 % 256) as u8).collect();
        let a = gray(32, 32, data.clone());
        let b = gray(32, 32, data.iter().map(|v| v / 3).collect());
        for stride in [1, 3, 8, 11] {
            let p = SsimParams {
                stride,
                ..SsimParams::default()
            };
            let s = ssim(&a, &b, &p).unwrap();
            assert!((-1.0..=1.0).contains(&s));
        }
    }
}
