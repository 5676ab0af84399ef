//! Detail-preserving patch downscaling.
//!
//! Each output pixel is a weighted mean over its `s x s` source patch
//! (patches at the right/bottom edge are truncated to the image). A pixel's
//! weight grows with how far its intensity lies from the patch's box-filtered
//! value:
//!
//! ```text
//! w(p) = |I(p) - B|^lambda + epsilon,     out = sum w(p) x(p) / sum w(p)
//! ```
//!
//! `I` is the channel-mean intensity on the 8-bit scale and `B` its patch
//! mean, so one weight is shared by all channels and `epsilon` is measured in
//! 8-bit levels.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;

use super::downscaled_dims;

/// Pixels of one patch, grouped so each entry holds a pixel and its mirror
/// within the same patch row. Sums taken group by group are unchanged when
/// the image is mirrored.
struct Patch {
    values: Vec<f64>,
    levels: Vec<f64>,
    groups: Vec<(usize, Option<usize>)>,
    channels: usize,
}

impl Patch {
    fn len(&self) -> usize {
        self.levels.len()
    }

    fn sum(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.groups.iter().fold(0.0, |acc, &(a, b)| match b {
            Some(b) => acc + (f(a) + f(b)),
            None => acc + f(a),
        })
    }

    fn value(&self, pixel: usize, ch: usize) -> f64 {
        self.values[pixel * self.channels + ch]
    }
}

fn patch_downscale(image: &Image, scale: u32, pixel: impl Fn(&Patch, &mut [f64]) + Sync) -> Image {
    let (w, h, c) = (image.width(), image.height(), image.channels());
    let s = scale as usize;
    let (ow, oh) = downscaled_dims(w, h, scale);
    let mut out = vec![0.0f64; ow * oh * c];
    out.par_chunks_mut(ow * c)
        .enumerate()
        .for_each(|(oy, out_row)| {
            let y0 = oy * s;
            let y1 = (y0 + s).min(h);
            let mut patch = Patch {
                values: Vec::with_capacity(s * s * c),
                levels: Vec::with_capacity(s * s),
                groups: Vec::with_capacity(s * s),
                channels: c,
            };
            for ox in 0..ow {
                let x0 = ox * s;
                let x1 = (x0 + s).min(w);
                patch.values.clear();
                patch.levels.clear();
                patch.groups.clear();
                for y in y0..y1 {
                    let row_start = patch.levels.len();
                    for x in x0..x1 {
                        let base = image.index(x, y, 0);
                        let mut sum = 0.0;
                        for ch in 0..c {
                            patch.values.push(image.native_at(base + ch));
                            sum += image.level_at(base + ch);
                        }
                        patch.levels.push(sum / c as f64);
                    }
                    let (mut l, mut r) = (row_start, patch.levels.len() - 1);
                    while l < r {
                        patch.groups.push((l, Some(r)));
                        l += 1;
                        r -= 1;
                    }
                    if l == r {
                        patch.groups.push((l, None));
                    }
                }
                pixel(&patch, &mut out_row[ox * c..(ox + 1) * c]);
            }
        });
    Image::from_native_values(ow, oh, c, image.kind(), &out)
}

/// Plain patch mean over each `s x s` block.
pub fn box_downscale(image: &Image, scale: u32) -> Result<Image> {
    if scale < 1 {
        return Err(Error::InvalidSpec("scale must be at least 1".into()));
    }
    Ok(patch_downscale(image, scale, |patch, out| {
        let n = patch.len() as f64;
        for (ch, o) in out.iter_mut().enumerate() {
            *o = patch.sum(|p| patch.value(p, ch)) / n;
        }
    }))
}

/// Detail-preserving downscale with deviation exponent `lambda` and weight
/// floor `epsilon`.
pub fn rdip_downscale(image: &Image, scale: u32, lambda: f64, epsilon: f64) -> Result<Image> {
    if scale < 2 {
        return Err(Error::InvalidSpec(
            "rdip needs a scale of at least 2".into(),
        ));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "rdip lambda must be a finite non-negative number, got {lambda}"
        )));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "rdip epsilon must be positive, got {epsilon}"
        )));
    }
    Ok(patch_downscale(image, scale, |patch, out| {
        let mean = patch.sum(|p| patch.levels[p]) / patch.len() as f64;
        let weights: Vec<f64> = patch
            .levels
            .iter()
            .map(|&l| (l - mean).abs().powf(lambda) + epsilon)
            .collect();
        let total = patch.sum(|p| weights[p]);
        for (ch, o) in out.iter_mut().enumerate() {
            *o = patch.sum(|p| weights[p] * patch.value(p, ch)) / total;
        }
    }))
}
