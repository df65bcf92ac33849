//! Pixel-level primitives: RGB rasters, binary sign masks, polygon
//! rasterization, resampling and sticker compositing.
//!
//! Everything here is a pure function over immutable inputs, so callers may
//! fan work out across threads freely.

mod io;
mod mask;
mod pixels;
mod polygon;
mod resample;

pub use io::{load_png, read_annotation, save_mask_png, save_png, sidecar_path, write_annotation};
pub use mask::{merge_masks, resize_mask, BinaryMask, MaskIntegral};
pub use pixels::{apply_sticker, PixelImage, Rect, StickerColor, StickerSpec};
pub use polygon::{rasterize_polygon, PolygonAnnotation};
pub(crate) use polygon::rasterize_vertices;
pub use resample::{resize_area, resize_image, sample_bilinear};

use thiserror::Error;

/// Side length of the canonical placement frame, in pixels.
pub const CANONICAL_SIZE: u32 = 256;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("rectangle {rect:?} does not fit inside a {width}x{height} image")]
    InvalidRect { rect: Rect, width: u32, height: u32 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: cannot decode image: {message}")]
    Decode { path: String, message: String },
    #[error("{path}: malformed annotation: {source}")]
    AnnotationJson {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, ImagingError>;

/// Converts a percentage of a frame dimension into whole pixels, rounding
/// half away from zero.
pub fn pct_to_px(pct: u32, dim: u32) -> u32 {
    ((pct as u64 * dim as u64 + 50) / 100) as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pct_to_px_rounds_to_nearest() {
        assert_eq!(pct_to_px(0, 256), 0);
        assert_eq!(pct_to_px(5, 256), 13); // 12.8
        assert_eq!(pct_to_px(50, 256), 128);
        assert_eq!(pct_to_px(100, 256), 256);
        assert_eq!(pct_to_px(2, 256), 5); // 5.12
    }
}
