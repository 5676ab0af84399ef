//! Dense raster images and the geometric preprocessing steps applied to them:
//! border cropping, symmetric padding and quadrant tiling.
//!
//! Samples are stored row-major and interleaved (`[r, g, b, r, g, b, ...]`).
//! An image holds either 8-bit integer samples or real samples in `[0, 1]`;
//! conversion between the two is `real = int / 255` and
//! `int = round(real * 255)` with ties away from zero, clamped to `[0, 255]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    Integer,
    Real,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    Integer(Vec<u8>),
    Real(Vec<f32>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::Integer(v) => v.len(),
            Samples::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> SampleKind {
        match self {
            Samples::Integer(_) => SampleKind::Integer,
            Samples::Real(_) => SampleKind::Real,
        }
    }

    fn map_slices(
        &self,
        on_int: impl FnOnce(&[u8]) -> Vec<u8>,
        on_real: impl FnOnce(&[f32]) -> Vec<f32>,
    ) -> Samples {
        match self {
            Samples::Integer(v) => Samples::Integer(on_int(v)),
            Samples::Real(v) => Samples::Real(on_real(v)),
        }
    }
}

/// Converts a real sample in `[0, 1]` to the 8-bit scale.
#[inline]
pub fn real_to_u8(v: f64) -> u8 {
    // f64::round rounds half away from zero
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

#[inline]
pub fn u8_to_real(v: u8) -> f64 {
    v as f64 / 255.0
}

/// A 1- or 3-channel raster image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    samples: Samples,
}

fn check_shape(width: usize, height: usize, channels: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::InvalidImage(format!(
            "channel count must be 1 or 3, got {channels}"
        )));
    }
    let expected = width * height * channels;
    if len != expected {
        return Err(Error::InvalidImage(format!(
            "expected {expected} samples for {width}x{height}x{channels}, got {len}"
        )));
    }
    Ok(())
}

impl Image {
    pub fn from_u8(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        check_shape(width, height, channels, data.len())?;
        Ok(Image {
            width,
            height,
            channels,
            samples: Samples::Integer(data),
        })
    }

    /// Builds a real-sample image. Every sample must lie in `[0, 1]`.
    pub fn from_real(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        check_shape(width, height, channels, data.len())?;
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidImage(format!(
                "real sample {bad} outside [0, 1]"
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            samples: Samples::Real(data),
        })
    }

    /// A constant 8-bit image.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::from_u8(
            width,
            height,
            channels,
            vec![value; width * height * channels],
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn kind(&self) -> SampleKind {
        self.samples.kind()
    }

    pub fn samples(&self) -> &Samples {
        &self.samples
    }

    /// The 8-bit sample buffer, if this is an integer image.
    pub fn as_u8(&self) -> Option<&[u8]> {
        match &self.samples {
            Samples::Integer(v) => Some(v),
            Samples::Real(_) => None,
        }
    }

    pub fn as_real(&self) -> Option<&[f32]> {
        match &self.samples {
            Samples::Real(v) => Some(v),
            Samples::Integer(_) => None,
        }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    /// Sample at flat index `i` on the real `[0, 1]` scale.
    #[inline]
    pub fn unit_at(&self, i: usize) -> f64 {
        match &self.samples {
            Samples::Integer(v) => u8_to_real(v[i]),
            Samples::Real(v) => v[i] as f64,
        }
    }

    /// Sample at flat index `i` on the 8-bit `[0, 255]` scale.
    #[inline]
    pub fn level_at(&self, i: usize) -> f64 {
        match &self.samples {
            Samples::Integer(v) => v[i] as f64,
            Samples::Real(v) => v[i] as f64 * 255.0,
        }
    }

    fn with_samples(&self, width: usize, height: usize, samples: Samples) -> Image {
        Image {
            width,
            height,
            channels: self.channels,
            samples,
        }
    }

    pub fn to_integer(&self) -> Image {
        let samples = match &self.samples {
            Samples::Integer(v) => Samples::Integer(v.clone()),
            Samples::Real(v) => Samples::Integer(v.iter().map(|&s| real_to_u8(s as f64)).collect()),
        };
        self.with_samples(self.width, self.height, samples)
    }

    pub fn to_real(&self) -> Image {
        let samples = match &self.samples {
            Samples::Integer(v) => Samples::Real(v.iter().map(|&s| u8_to_real(s) as f32).collect()),
            Samples::Real(v) => Samples::Real(v.clone()),
        };
        self.with_samples(self.width, self.height, samples)
    }

    /// Sample at flat index `i` on its native scale: 8-bit levels for
    /// integer images, `[0, 1]` for real images.
    #[inline]
    pub(crate) fn native_at(&self, i: usize) -> f64 {
        match &self.samples {
            Samples::Integer(v) => v[i] as f64,
            Samples::Real(v) => v[i] as f64,
        }
    }

    /// Builds an image from native-scale values, clamping to the valid range
    /// and rounding integer samples half away from zero.
    pub(crate) fn from_native_values(
        width: usize,
        height: usize,
        channels: usize,
        kind: SampleKind,
        values: &[f64],
    ) -> Image {
        debug_assert_eq!(values.len(), width * height * channels);
        let samples = match kind {
            SampleKind::Integer => Samples::Integer(
                values
                    .iter()
                    .map(|&v| v.round().clamp(0.0, 255.0) as u8)
                    .collect(),
            ),
            SampleKind::Real => {
                Samples::Real(values.iter().map(|&v| v.clamp(0.0, 1.0) as f32).collect())
            }
        };
        Image {
            width,
            height,
            channels,
            samples,
        }
    }

    /// Extracts the rectangle described by `bbox`.
    pub fn crop(&self, bbox: CropBox) -> Result<Image> {
        bbox.validate(self.width, self.height)?;
        let row_len = bbox.width() * self.channels;
        let starts: Vec<usize> = (bbox.top..bbox.bottom)
            .map(|y| self.index(bbox.left, y, 0))
            .collect();
        fn gather<T: Copy>(v: &[T], starts: &[usize], row_len: usize) -> Vec<T> {
            let mut out = Vec::with_capacity(starts.len() * row_len);
            for &s in starts {
                out.extend_from_slice(&v[s..s + row_len]);
            }
            out
        }
        let samples = self.samples.map_slices(
            |v| gather(v, &starts, row_len),
            |v| gather(v, &starts, row_len),
        );
        Ok(self.with_samples(bbox.width(), bbox.height(), samples))
    }

    /// Mirrors the image left to right.
    pub fn flip_horizontal(&self) -> Image {
        fn flip<T: Copy>(v: &[T], w: usize, h: usize, c: usize) -> Vec<T> {
            let mut out = Vec::with_capacity(v.len());
            for y in 0..h {
                for x in (0..w).rev() {
                    let i = (y * w + x) * c;
                    out.extend_from_slice(&v[i..i + c]);
                }
            }
            out
        }
        let (w, h, c) = (self.width, self.height, self.channels);
        let samples = self
            .samples
            .map_slices(|v| flip(v, w, h, c), |v| flip(v, w, h, c));
        self.with_samples(w, h, samples)
    }

    /// Copies `src` into this image with its top-left corner at `(x0, y0)`.
    fn blit(&mut self, src: &Image, x0: usize, y0: usize) {
        debug_assert_eq!(self.channels, src.channels);
        let row_len = src.width * src.channels;
        for y in 0..src.height {
            let d = self.index(x0, y0 + y, 0);
            let s = src.index(0, y, 0);
            match (&mut self.samples, &src.samples) {
                (Samples::Integer(dst), Samples::Integer(v)) => {
                    dst[d..d + row_len].copy_from_slice(&v[s..s + row_len])
                }
                (Samples::Real(dst), Samples::Real(v)) => {
                    dst[d..d + row_len].copy_from_slice(&v[s..s + row_len])
                }
                _ => unreachable!("blit between images of different sample kinds"),
            }
        }
    }
}

/// A rectangle with inclusive `left`/`top` and exclusive `right`/`bottom`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropBox {
    pub left: usize,
    pub top: usize,
    pub right: usize,
    pub bottom: usize,
}

impl CropBox {
    pub fn new(left: usize, top: usize, right: usize, bottom: usize) -> Self {
        CropBox {
            left,
            top,
            right,
            bottom,
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        CropBox::new(0, 0, width, height)
    }

    pub fn width(&self) -> usize {
        self.right - self.left
    }

    pub fn height(&self) -> usize {
        self.bottom - self.top
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if self.left < self.right
            && self.right <= width
            && self.top < self.bottom
            && self.bottom <= height
        {
            Ok(())
        } else {
            Err(Error::InvalidImage(format!(
                "crop box {self:?} does not fit a {width}x{height} image"
            )))
        }
    }
}

pub const DEFAULT_CROP_THRESHOLD: f64 = 10.0;

/// Removes dark borders from all four sides.
///
/// A row (column) is background when the mean of all its samples, i.e. its
/// channel-averaged intensity, is below `threshold`. The box spans the first
/// to the last foreground row and column. Row means depend on which columns
/// are kept and vice versa, so the scan is repeated on the cropped region
/// until the box stops shrinking; this makes the operation idempotent.
pub fn crop_borders(image: &Image, threshold: f64) -> Result<(Image, CropBox)> {
    let data = image.as_u8().ok_or(Error::RequiresInteger)?;
    let (w, c) = (image.width(), image.channels());
    let mut bbox = CropBox::full(image.width(), image.height());
    loop {
        let bw = bbox.width();
        let bh = bbox.height();
        let mut row_sums = vec![0u64; bh];
        let mut col_sums = vec![0u64; bw];
        for (ry, row_sum) in row_sums.iter_mut().enumerate() {
            let start = ((bbox.top + ry) * w + bbox.left) * c;
            let row = &data[start..start + bw * c];
            for (cx, px) in row.chunks_exact(c).enumerate() {
                let s: u64 = px.iter().map(|&v| v as u64).sum();
                *row_sum += s;
                col_sums[cx] += s;
            }
        }
        // mean >= threshold  <=>  sum >= threshold * count
        let row_fg = |s: u64| s as f64 >= threshold * (bw * c) as f64;
        let col_fg = |s: u64| s as f64 >= threshold * (bh * c) as f64;
        let (Some(top), Some(left)) = (
            row_sums.iter().position(|&s| row_fg(s)),
            col_sums.iter().position(|&s| col_fg(s)),
        ) else {
            return Err(Error::FullyBackground { threshold });
        };
        let bottom = row_sums.iter().rposition(|&s| row_fg(s)).unwrap() + 1;
        let right = col_sums.iter().rposition(|&s| col_fg(s)).unwrap() + 1;
        let next = CropBox::new(
            bbox.left + left,
            bbox.top + top,
            bbox.left + right,
            bbox.top + bottom,
        );
        if next == bbox {
            break;
        }
        bbox = next;
    }
    Ok((image.crop(bbox)?, bbox))
}

/// Output of [`pad_to`]: the padded image and where the source landed.
#[derive(Debug, Clone, PartialEq)]
pub struct PadResult {
    pub image: Image,
    pub offset_x: usize,
    pub offset_y: usize,
}

/// Leading/trailing split of `extra` padding pixels; an odd remainder puts
/// the extra pixel on the trailing (right/bottom) side.
pub fn symmetric_split(extra: usize) -> (usize, usize) {
    let lead = extra / 2;
    (lead, extra - lead)
}

/// Pads symmetrically with `fill` (an 8-bit level; `fill / 255` for real
/// images) to exactly `target_w` x `target_h`.
pub fn pad_to(image: &Image, target_w: usize, target_h: usize, fill: u8) -> Result<PadResult> {
    let (w, h) = image.dimensions();
    if w > target_w || h > target_h {
        return Err(Error::Oversize {
            width: w,
            height: h,
            target_width: target_w,
            target_height: target_h,
        });
    }
    let (offset_x, _) = symmetric_split(target_w - w);
    let (offset_y, _) = symmetric_split(target_h - h);
    let n = target_w * target_h * image.channels();
    let samples = match image.kind() {
        SampleKind::Integer => Samples::Integer(vec![fill; n]),
        SampleKind::Real => Samples::Real(vec![u8_to_real(fill) as f32; n]),
    };
    let mut out = image.with_samples(target_w, target_h, samples);
    out.blit(image, offset_x, offset_y);
    Ok(PadResult {
        image: out,
        offset_x,
        offset_y,
    })
}

/// Crops the central `target_w` x `target_h` region; when the excess is odd
/// the extra pixel is removed from the right/bottom.
pub fn center_crop(image: &Image, target_w: usize, target_h: usize) -> Result<Image> {
    let (w, h) = image.dimensions();
    if target_w == 0 || target_h == 0 || target_w > w || target_h > h {
        return Err(Error::InvalidImage(format!(
            "cannot center-crop {w}x{h} to {target_w}x{target_h}"
        )));
    }
    let (left, _) = symmetric_split(w - target_w);
    let (top, _) = symmetric_split(h - target_h);
    image.crop(CropBox::new(left, top, left + target_w, top + target_h))
}

/// Brings an image to exactly `target_w` x `target_h`: dimensions that are
/// too large are center-cropped, then the result is padded.
pub fn fit_to(image: &Image, target_w: usize, target_h: usize, fill: u8) -> Result<PadResult> {
    let (w, h) = image.dimensions();
    if w <= target_w && h <= target_h {
        return pad_to(image, target_w, target_h, fill);
    }
    let cropped = center_crop(image, w.min(target_w), h.min(target_h))?;
    pad_to(&cropped, target_w, target_h, fill)
}

/// The four corner tiles of an even-sized image.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrants {
    pub top_left: Image,
    pub top_right: Image,
    pub bottom_left: Image,
    pub bottom_right: Image,
}

impl Quadrants {
    /// File-name suffixes in tile order.
    pub const SUFFIXES: [&'static str; 4] = ["_tl", "_tr", "_bl", "_br"];

    pub fn as_array(&self) -> [&Image; 4] {
        [
            &self.top_left,
            &self.top_right,
            &self.bottom_left,
            &self.bottom_right,
        ]
    }

    /// Reassembles the tiles into the full image.
    pub fn stitch(&self) -> Result<Image> {
        let (tw, th) = self.top_left.dimensions();
        let c = self.top_left.channels();
        let kind = self.top_left.kind();
        for t in self.as_array() {
            if t.dimensions() != (tw, th) || t.channels() != c || t.kind() != kind {
                return Err(Error::DimensionMismatch(
                    "quadrant tiles differ in size, channels or sample kind".into(),
                ));
            }
        }
        let n = 4 * tw * th * c;
        let samples = match kind {
            SampleKind::Integer => Samples::Integer(vec![0; n]),
            SampleKind::Real => Samples::Real(vec![0.0; n]),
        };
        let mut out = self.top_left.with_samples(2 * tw, 2 * th, samples);
        out.blit(&self.top_left, 0, 0);
        out.blit(&self.top_right, tw, 0);
        out.blit(&self.bottom_left, 0, th);
        out.blit(&self.bottom_right, tw, th);
        Ok(out)
    }
}

/// Splits an image into top-left, top-right, bottom-left and bottom-right
/// quarters.
pub fn tile_quadrants(image: &Image) -> Result<Quadrants> {
    let (w, h) = image.dimensions();
    if w % 2 != 0 || h % 2 != 0 {
        return Err(Error::OddDimensions {
            width: w,
            height: h,
        });
    }
    let (hw, hh) = (w / 2, h / 2);
    Ok(Quadrants {
        top_left: image.crop(CropBox::new(0, 0, hw, hh))?,
        top_right: image.crop(CropBox::new(hw, 0, w, hh))?,
        bottom_left: image.crop(CropBox::new(0, hh, hw, h))?,
        bottom_right: image.crop(CropBox::new(hw, hh, w, h))?,
    })
}
