//! Import of downscales produced outside this crate (e.g. by a learned
//! downscaler). The directory holds one `<stem>.png` per manifest record.

use std::path::{Path, PathBuf};

use crate::dataset::{DatasetRecord, Manifest};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::io::load_image;

use super::downscaled_dims;

/// Path of the external downscale for a record.
pub fn external_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.png"))
}

/// An imported image whose size differs from the native downscale size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimensionWarning {
    pub id: String,
    pub expected: (usize, usize),
    pub actual: (usize, usize),
}

impl std::fmt::Display for DimensionWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "external image for {} is {}x{}, expected {}x{}",
            self.id, self.actual.0, self.actual.1, self.expected.0, self.expected.1
        )
    }
}

#[derive(Debug, Clone)]
pub struct ExternalImport {
    pub record: DatasetRecord,
    pub image: Image,
    pub warning: Option<DimensionWarning>,
}

/// Checks that every record has an external file, failing on the first
/// missing stem.
pub fn check_external_dir(dir: &Path, manifest: &Manifest) -> Result<()> {
    for r in &manifest.records {
        if !external_path(dir, &r.id).is_file() {
            return Err(Error::ExternalMissing {
                stem: r.id.clone(),
                dir: dir.into(),
            });
        }
    }
    Ok(())
}

/// Loads one external downscale and compares its size with
/// `ceil(w / scale) x ceil(h / scale)` of the original.
pub fn load_external(
    dir: &Path,
    record: &DatasetRecord,
    original_dims: (usize, usize),
    scale: u32,
) -> Result<(Image, Option<DimensionWarning>)> {
    let path = external_path(dir, &record.id);
    if !path.is_file() {
        return Err(Error::ExternalMissing {
            stem: record.id.clone(),
            dir: dir.into(),
        });
    }
    let image = load_image(&path)?;
    let expected = downscaled_dims(original_dims.0, original_dims.1, scale);
    let warning = (image.dimensions() != expected).then(|| DimensionWarning {
        id: record.id.clone(),
        expected,
        actual: image.dimensions(),
    });
    Ok((image, warning))
}

/// Pairs every manifest record with its external downscale. Original sizes
/// are read from the image headers of the records' own files.
pub fn import_external(dir: &Path, manifest: &Manifest, scale: u32) -> Result<Vec<ExternalImport>> {
    check_external_dir(dir, manifest)?;
    manifest
        .records
        .iter()
        .map(|r| {
            let (w, h) = ::image::image_dimensions(&r.path).map_err(|e| Error::CorruptStream {
                path: r.path.clone(),
                reason: e.to_string(),
            })?;
            let (image, warning) = load_external(dir, r, (w as usize, h as usize), scale)?;
            Ok(ExternalImport {
                record: r.clone(),
                image,
                warning,
            })
        })
        .collect()
}
