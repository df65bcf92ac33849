use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::{ImagingError, Result};

/// Row-major 8-bit RGB raster.
#[derive(Clone, PartialEq, Eq)]
pub struct PixelImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl fmt::Debug for PixelImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PixelImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl PixelImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidInput(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(ImagingError::InvalidInput(format!(
                "{width}x{height} RGB image needs {expected} samples, got {}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Image filled with a single color.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        let n = width as usize * height as usize;
        let data = rgb.iter().copied().cycle().take(n * 3).collect();
        Self::new(width, height, data)
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Fills `rect` in place. The rectangle must already be validated.
    pub(crate) fn fill_rect(&mut self, rect: Rect, rgb: [u8; 3]) {
        let stride = self.width as usize * 3;
        for y in rect.y..rect.y + rect.height {
            let row = y as usize * stride;
            let start = row + rect.x as usize * 3;
            let end = start + rect.width as usize * 3;
            for px in self.data[start..end].chunks_exact_mut(3) {
                px.copy_from_slice(&rgb);
            }
        }
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }
}

/// Axis-aligned pixel rectangle; `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl Rect {
    pub const fn new(x: u32, y: u32, width: u32, height: u32) -> Self {
        Self { x, y, width, height }
    }

    pub fn right(&self) -> u64 {
        self.x as u64 + self.width as u64
    }

    pub fn bottom(&self) -> u64 {
        self.y as u64 + self.height as u64
    }

    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.right() <= width as u64 && self.bottom() <= height as u64
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && (x as u64) < self.right() && y >= self.y && (y as u64) < self.bottom()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StickerColor {
    Black,
    White,
}

impl StickerColor {
    pub fn rgb(self) -> [u8; 3] {
        match self {
            StickerColor::Black => [0, 0, 0],
            StickerColor::White => [255, 255, 255],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StickerColor::Black => "black",
            StickerColor::White => "white",
        }
    }
}

impl fmt::Display for StickerColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StickerColor {
    type Err = ImagingError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "black" | "b" => Ok(StickerColor::Black),
            "white" | "w" => Ok(StickerColor::White),
            other => Err(ImagingError::InvalidInput(format!("unknown sticker color {other:?}"))),
        }
    }
}

/// One rectangular sticker, sized in whole percent of the canonical frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StickerSpec {
    pub color: StickerColor,
    pub width_pct: u32,
    pub height_pct: u32,
}

/// Paints `rect` solid black or white on a copy of `img`.
pub fn apply_sticker(img: &PixelImage, rect: Rect, color: StickerColor) -> Result<PixelImage> {
    if !rect.fits_within(img.width, img.height) {
        return Err(ImagingError::InvalidRect {
            rect,
            width: img.width,
            height: img.height,
        });
    }
    let mut out = img.clone();
    out.fill_rect(rect, color.rgb());
    Ok(out)
}
