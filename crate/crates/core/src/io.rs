//! PNG/JPEG decoding and encoding.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use image::{DynamicImage, ImageError, ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Png,
    Jpeg,
}

impl FileFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(FileFormat::Png),
            "jpg" | "jpeg" => Some(FileFormat::Jpeg),
            _ => None,
        }
    }
}

const JPEG_QUALITY: u8 = 95;

fn map_decode_error(path: &Path, err: ImageError) -> Error {
    match err {
        ImageError::IoError(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::CorruptStream {
                path: path.into(),
                reason: e.to_string(),
            }
        }
        ImageError::IoError(e) => Error::io(path, e),
        ImageError::Unsupported(e) => Error::UnsupportedFormat {
            path: path.into(),
            reason: e.to_string(),
        },
        other => Error::CorruptStream {
            path: path.into(),
            reason: other.to_string(),
        },
    }
}

/// Decodes a PNG or JPEG file into an 8-bit image. Grayscale sources give a
/// single channel; everything else is reduced to RGB (alpha is dropped,
/// 16-bit samples are narrowed).
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = ImageReader::new(BufReader::new(file))
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Jpeg) => {}
        Some(other) => {
            return Err(Error::UnsupportedFormat {
                path: path.into(),
                reason: format!("{other:?} is not PNG or JPEG"),
            })
        }
        None => {
            return Err(Error::UnsupportedFormat {
                path: path.into(),
                reason: "unrecognised file signature".into(),
            })
        }
    }
    let decoded = reader.decode().map_err(|e| map_decode_error(path, e))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let is_gray = matches!(
        decoded,
        DynamicImage::ImageLuma8(_)
            | DynamicImage::ImageLumaA8(_)
            | DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
    );
    if is_gray {
        Image::from_u8(w, h, 1, decoded.into_luma8().into_raw())
    } else {
        Image::from_u8(w, h, 3, decoded.into_rgb8().into_raw())
    }
}

/// Encodes an 8-bit image. Real-sample images must be converted with
/// [`Image::to_integer`] first.
pub fn save_image(image: &Image, path: impl AsRef<Path>, format: FileFormat) -> Result<()> {
    let path = path.as_ref();
    let data = image.as_u8().ok_or(Error::RealSamplesNotSavable)?;
    let color = match image.channels() {
        1 => image::ExtendedColorType::L8,
        _ => image::ExtendedColorType::Rgb8,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let (w, h) = (image.width() as u32, image.height() as u32);
    let encoded = match format {
        FileFormat::Png => {
            use image::ImageEncoder;
            image::codecs::png::PngEncoder::new(&mut out).write_image(data, w, h, color)
        }
        FileFormat::Jpeg => {
            image::codecs::jpeg::JpegEncoder::new_with_quality(&mut out, JPEG_QUALITY)
                .encode(data, w, h, color)
        }
    };
    encoded.map_err(|e| match e {
        ImageError::IoError(io) => Error::io(path, io),
        other => Error::Encode {
            path: path.into(),
            reason: other.to_string(),
        },
    })?;
    use std::io::Write;
    out.flush().map_err(|e| Error::io(path, e))
}
