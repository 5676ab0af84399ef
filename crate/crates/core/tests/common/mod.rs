//! Independent reference implementations and image generators shared by the
//! integration tests. The oracles use direct 2-D summation and closed-form
//! kernels, not the library's separable code paths.
#![allow(dead_code)]

use fundus_core::image::Image;
use fundus_core::resample::Algorithm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> Image {
    let data = (0..w * h * c).map(|_| rng.gen::<u8>()).collect();
    Image::from_u8(w, h, c, data).unwrap()
}

pub fn constant_image(w: usize, h: usize, c: usize, v: u8) -> Image {
    Image::filled(w, h, c, v).unwrap()
}

/// White noise blurred by a Gaussian of standard deviation `sigma`, then
/// stretched to the full 8-bit range.
pub fn smooth_noise(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize, sigma: f64) -> Image {
    let radius = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let ksum: f64 = kernel.iter().sum();
    let mut out = vec![0u8; w * h * c];
    for ch in 0..c {
        let noise: Vec<f64> = (0..w * h).map(|_| rng.gen::<f64>()).collect();
        let blur = |src: &[f64], horizontal: bool| -> Vec<f64> {
            let mut dst = vec![0.0; w * h];
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for (k, &kv) in kernel.iter().enumerate() {
                        let d = k as i64 - radius;
                        let (sx, sy) = if horizontal {
                            ((x as i64 + d).clamp(0, w as i64 - 1) as usize, y)
                        } else {
                            (x, (y as i64 + d).clamp(0, h as i64 - 1) as usize)
                        };
                        acc += kv * src[sy * w + sx];
                    }
                    dst[y * w + x] = acc / ksum;
                }
            }
            dst
        };
        let b = blur(&blur(&noise, true), false);
        let lo = b.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = b.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (i, v) in b.iter().enumerate() {
            out[i * c + ch] = ((v - lo) / (hi - lo) * 255.0).round() as u8;
        }
    }
    Image::from_u8(w, h, c, out).unwrap()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Closed-form kernels: triangle, Keys cubic with a = -0.5, Lanczos with
/// `lobes` lobes.
pub fn oracle_kernel(algorithm: Algorithm, lobes: f64, x: f64) -> f64 {
    let x = x.abs();
    match algorithm {
        Algorithm::Bilinear => (1.0 - x).max(0.0),
        Algorithm::Bicubic => {
            if x < 1.0 {
                1.5 * x.powi(3) - 2.5 * x.powi(2) + 1.0
            } else if x < 2.0 {
                -0.5 * x.powi(3) + 2.5 * x.powi(2) - 4.0 * x + 2.0
            } else {
                0.0
            }
        }
        Algorithm::Lanczos => {
            if x < lobes {
                sinc(x) * sinc(x / lobes)
            } else {
                0.0
            }
        }
        _ => unreachable!(),
    }
}

fn support(algorithm: Algorithm, lobes: f64) -> f64 {
    match algorithm {
        Algorithm::Bilinear => 1.0,
        Algorithm::Bicubic => 2.0,
        Algorithm::Lanczos => lobes,
        _ => unreachable!(),
    }
}

fn round_clamp(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Direct 2-D resampling of an 8-bit image onto an `ow x oh` grid whose
/// sample `i` maps to source coordinate `center(i)`. The kernel support is
/// widened by `stretch`; out-of-range taps read the nearest edge pixel.
pub fn oracle_resample(
    img: &Image,
    algorithm: Algorithm,
    lobes: f64,
    stretch: f64,
    ow: usize,
    oh: usize,
    center: impl Fn(usize) -> f64,
) -> Vec<u8> {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let data = img.as_u8().unwrap();
    let mut out = Vec::with_capacity(ow * oh * c);
    let r = support(algorithm, lobes) * stretch;
    for oy in 0..oh {
        let cy = center(oy);
        for ox in 0..ow {
            let cx = center(ox);
            let mut num = vec![0.0; c];
            let mut den = 0.0;
            for sy in (cy - r).floor() as i64..=(cy + r).ceil() as i64 {
                let wy = oracle_kernel(algorithm, lobes, (sy as f64 - cy) / stretch);
                for sx in (cx - r).floor() as i64..=(cx + r).ceil() as i64 {
                    let wx = oracle_kernel(algorithm, lobes, (sx as f64 - cx) / stretch);
                    let wgt = wx * wy;
                    if wgt == 0.0 {
                        continue;
                    }
                    let px = sx.clamp(0, w as i64 - 1) as usize;
                    let py = sy.clamp(0, h as i64 - 1) as usize;
                    for (ch, n) in num.iter_mut().enumerate() {
                        *n += wgt * data[(py * w + px) * c + ch] as f64;
                    }
                    den += wgt;
                }
            }
            out.extend(num.iter().map(|n| round_clamp(n / den)));
        }
    }
    out
}

/// Reference for one of the native downscalers at integer factor `s`.
pub fn oracle_downscale(img: &Image, algorithm: Algorithm, s: usize, lobes: f64) -> Vec<u8> {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let (ow, oh) = (w.div_ceil(s), h.div_ceil(s));
    let center = |i: usize| (i as f64 + 0.5) * s as f64 - 0.5;
    let data = img.as_u8().unwrap();
    match algorithm {
        Algorithm::Nearest => {
            let pick = |i: usize, n: usize| ((center(i) + 0.5).floor() as usize).min(n - 1);
            let mut out = Vec::new();
            for oy in 0..oh {
                for ox in 0..ow {
                    let (x, y) = (pick(ox, w), pick(oy, h));
                    out.extend_from_slice(&data[(y * w + x) * c..(y * w + x + 1) * c]);
                }
            }
            out
        }
        Algorithm::Rdip => oracle_rdip(img, s, 1.0, 1e-6),
        _ => oracle_resample(img, algorithm, lobes, s as f64, ow, oh, center),
    }
}

/// Lanczos interpolation upscale by integer factor `s`.
pub fn oracle_upscale(img: &Image, s: usize, lobes: f64) -> Vec<u8> {
    let (ow, oh) = (img.width() * s, img.height() * s);
    oracle_resample(img, Algorithm::Lanczos, lobes, 1.0, ow, oh, |i| {
        (i as f64 + 0.5) / s as f64 - 0.5
    })
}

/// Patch-weighted mean: weight `|I - mean(I)|^lambda + eps` where `I` is the
/// per-pixel channel mean.
pub fn oracle_rdip(img: &Image, s: usize, lambda: f64, eps: f64) -> Vec<u8> {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let data = img.as_u8().unwrap();
    let mut out = Vec::new();
    for by in (0..h).step_by(s) {
        for bx in (0..w).step_by(s) {
            let pixels: Vec<(usize, usize)> = (by..(by + s).min(h))
                .flat_map(|y| (bx..(bx + s).min(w)).map(move |x| (x, y)))
                .collect();
            let intensity = |&(x, y): &(usize, usize)| {
                (0..c)
                    .map(|ch| data[(y * w + x) * c + ch] as f64)
                    .sum::<f64>()
                    / c as f64
            };
            let mean = pixels.iter().map(intensity).sum::<f64>() / pixels.len() as f64;
            let weights: Vec<f64> = pixels
                .iter()
                .map(|p| (intensity(p) - mean).abs().powf(lambda) + eps)
                .collect();
            let total: f64 = weights.iter().sum();
            for ch in 0..c {
                let v: f64 = pixels
                    .iter()
                    .zip(&weights)
                    .map(|(&(x, y), wt)| wt * data[(y * w + x) * c + ch] as f64)
                    .sum();
                out.push(round_clamp(v / total));
            }
        }
    }
    out
}

/// Plain per-patch mean.
pub fn oracle_box(img: &Image, s: usize) -> Vec<u8> {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let data = img.as_u8().unwrap();
    let mut out = Vec::new();
    for by in (0..h).step_by(s) {
        for bx in (0..w).step_by(s) {
            for ch in 0..c {
                let mut sum = 0.0;
                let mut n = 0.0;
                for y in by..(by + s).min(h) {
                    for x in bx..(bx + s).min(w) {
                        sum += data[(y * w + x) * c + ch] as f64;
                        n += 1.0;
                    }
                }
                out.push(round_clamp(sum / n));
            }
        }
    }
    out
}

/// Mean over windows of the textbook SSIM formula, with two-pass window
/// statistics, averaged over channels.
pub fn oracle_ssim(x: &Image, y: &Image, win: usize, stride: usize, l: f64) -> f64 {
    let (w, h, c) = (x.width(), x.height(), x.channels());
    let (a, b) = (x.as_u8().unwrap(), y.as_u8().unwrap());
    let c1 = (0.01 * l) * (0.01 * l);
    let c2 = (0.03 * l) * (0.03 * l);
    let mut per_channel = 0.0;
    for ch in 0..c {
        let mut sum = 0.0;
        let mut count = 0.0;
        for y0 in (0..=h - win).step_by(stride) {
            for x0 in (0..=w - win).step_by(stride) {
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for yy in y0..y0 + win {
                    for xx in x0..x0 + win {
                        xs.push(a[(yy * w + xx) * c + ch] as f64);
                        ys.push(b[(yy * w + xx) * c + ch] as f64);
                    }
                }
                let n = xs.len() as f64;
                let mx = xs.iter().sum::<f64>() / n;
                let my = ys.iter().sum::<f64>() / n;
                let vx = xs.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n;
                let vy = ys.iter().map(|v| (v - my).powi(2)).sum::<f64>() / n;
                let cov = xs
                    .iter()
                    .zip(&ys)
                    .map(|(p, q)| (p - mx) * (q - my))
                    .sum::<f64>()
                    / n;
                sum += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1.0;
            }
        }
        per_channel += sum / count;
    }
    per_channel / c as f64
}

pub fn max_abs_diff(a: &[u8], b: &[u8]) -> u8 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(p, q)| p.abs_diff(*q))
        .max()
        .unwrap_or(0)
}
