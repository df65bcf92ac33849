use std::fs;
use std::path::{Path, PathBuf};

use super::{Result, SignRecord, SignSet, SignsError};
use crate::imaging::{
    load_png, read_annotation, sample_bilinear, sidecar_path, ImagingError, PixelImage, PolygonAnnotation,
    CANONICAL_SIZE,
};

/// Padding added on each side of the outline's bounding box, as a fraction
/// of the box size.
pub const CROP_MARGIN: f64 = 0.05;

/// Crops `image` to the annotation's bounding box plus margin and resamples
/// that window onto the canonical frame, rasterizing the outline in the same
/// frame. Window parts outside the photo replicate its edge pixels.
pub fn canonicalize(id: &str, image: &PixelImage, poly: &PolygonAnnotation) -> Result<SignRecord> {
    poly.validate().map_err(|e| SignsError::InvalidAnnotation(format!("{id}: {e}")))?;
    let (x0, y0, x1, y1) = poly.bounds();
    let (bw, bh) = (x1 - x0, y1 - y0);
    if bw <= 0.0 || bh <= 0.0 {
        return Err(SignsError::InvalidAnnotation(format!("{id}: polygon has zero-area bounds")));
    }
    let (wx, wy) = (x0 - CROP_MARGIN * bw, y0 - CROP_MARGIN * bh);
    let (ww, wh) = ((1.0 + 2.0 * CROP_MARGIN) * bw, (1.0 + 2.0 * CROP_MARGIN) * bh);

    let n = CANONICAL_SIZE;
    let (iw, ih) = (image.width() as f64, image.height() as f64);
    let xs: Vec<f64> = (0..n).map(|u| (wx + (u as f64 + 0.5) / n as f64 * ww) * iw - 0.5).collect();
    let ys: Vec<f64> = (0..n).map(|v| (wy + (v as f64 + 0.5) / n as f64 * wh) * ih - 0.5).collect();
    let crop = PixelImage::from_fn(n, n, |u, v| {
        let s = sample_bilinear(image, xs[u as usize], ys[v as usize]);
        s.map(|c| c.round().clamp(0.0, 255.0) as u8)
    })?;

    let mapped: Vec<[f64; 2]> = poly.vertices.iter().map(|&[x, y]| [(x - wx) / ww, (y - wy) / wh]).collect();
    let mask = crate::imaging::rasterize_vertices(&mapped, n, n)?;
    SignRecord::new(id, crop, mask, poly.label.clone())
}

/// Loads each PNG with its `<stem>.mask.json` sidecar.
pub fn ingest(paths: &[PathBuf]) -> Result<SignSet> {
    let mut records = Vec::with_capacity(paths.len());
    for path in paths {
        let sidecar = sidecar_path(path);
        if !sidecar.is_file() {
            return Err(SignsError::MissingSidecar {
                path: path.clone(),
                sidecar,
            });
        }
        let wrap = |source: ImagingError| match source {
            ImagingError::InvalidAnnotation(msg) => {
                SignsError::InvalidAnnotation(format!("{}: {msg}", sidecar.display()))
            }
            source => SignsError::Ingestion {
                path: path.clone(),
                source,
            },
        };
        let poly = read_annotation(&sidecar).map_err(wrap)?;
        let image = load_png(path).map_err(wrap)?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        records.push(canonicalize(&id, &image, &poly)?);
    }
    SignSet::from_records(records)
}

/// Every `*.png` in `dir` (sorted by file name), each with its sidecar.
pub fn ingest_dir(dir: &Path) -> Result<SignSet> {
    let entries = fs::read_dir(dir).map_err(|e| SignsError::Ingestion {
        path: dir.to_path_buf(),
        source: ImagingError::Io {
            path: dir.display().to_string(),
            source: e,
        },
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(SignsError::InvalidInput(format!("{}: no PNG images found", dir.display())));
    }
    ingest(&paths)
}
