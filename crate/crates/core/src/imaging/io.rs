use std::fs;
use std::path::{Path, PathBuf};

use super::{BinaryMask, ImagingError, PixelImage, PolygonAnnotation, Result};

fn io_err(path: &Path, source: std::io::Error) -> ImagingError {
    ImagingError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads a PNG as 8-bit RGB; alpha and higher bit depths are discarded.
pub fn load_png(path: &Path) -> Result<PixelImage> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let decoded = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png).map_err(|e| {
        ImagingError::Decode {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    })?;
    let rgb = decoded.into_rgb8();
    let (w, h) = rgb.dimensions();
    PixelImage::new(w, h, rgb.into_raw())
}

pub fn save_png(img: &PixelImage, path: &Path) -> Result<()> {
    let buf = image::RgbImage::from_raw(img.width(), img.height(), img.data().to_vec())
        .expect("PixelImage invariants guarantee buffer size");
    buf.save_with_format(path, image::ImageFormat::Png).map_err(|e| match e {
        image::ImageError::IoError(io) => io_err(path, io),
        other => ImagingError::Decode {
            path: path.display().to_string(),
            message: other.to_string(),
        },
    })
}

/// Writes a mask as an 8-bit grayscale PNG (255 = true).
pub fn save_mask_png(mask: &BinaryMask, path: &Path) -> Result<()> {
    let data = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let buf = image::GrayImage::from_raw(mask.width(), mask.height(), data).expect("mask invariants guarantee buffer size");
    buf.save_with_format(path, image::ImageFormat::Png).map_err(|e| match e {
        image::ImageError::IoError(io) => io_err(path, io),
        other => ImagingError::Decode {
            path: path.display().to_string(),
            message: other.to_string(),
        },
    })
}

/// `signs/stop_01.png` -> `signs/stop_01.mask.json`.
pub fn sidecar_path(image_path: &Path) -> PathBuf {
    let stem = image_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    image_path.with_file_name(format!("{stem}.mask.json"))
}

pub fn read_annotation(path: &Path) -> Result<PolygonAnnotation> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let poly: PolygonAnnotation = serde_json::from_str(&text).map_err(|source| ImagingError::AnnotationJson {
        path: path.display().to_string(),
        source,
    })?;
    poly.validate()?;
    Ok(poly)
}

pub fn write_annotation(poly: &PolygonAnnotation, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(poly).expect("annotation serializes");
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}
