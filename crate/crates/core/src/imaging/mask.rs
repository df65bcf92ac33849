use std::fmt;

use super::{ImagingError, Rect, Result};

/// Per-pixel sign-region indicator, row-major, `true` inside the sign.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("true_count", &self.count_true())
            .finish()
    }
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidInput(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        if bits.len() != width as usize * height as usize {
            return Err(ImagingError::InvalidInput(format!(
                "{width}x{height} mask needs {} bits, got {}",
                width as usize * height as usize,
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Result<Self> {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn count_true(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn true_fraction(&self) -> f64 {
        self.count_true() as f64 / self.bits.len() as f64
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Tight bounding box of the true pixels, or `None` for an empty mask.
    pub fn bounding_box(&self) -> Option<Rect> {
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        (x0 != u32::MAX).then(|| Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }

    pub fn same_dims(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// `true` when every pixel set here is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.same_dims(other) && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

/// Pixelwise AND of all masks: the region shared by every sign.
pub fn merge_masks(masks: &[BinaryMask]) -> Result<BinaryMask> {
    let (first, rest) = masks
        .split_first()
        .ok_or_else(|| ImagingError::InvalidInput("cannot merge an empty mask list".into()))?;
    let mut merged = first.clone();
    for (i, m) in rest.iter().enumerate() {
        if !m.same_dims(first) {
            return Err(ImagingError::InvalidInput(format!(
                "mask {} is {}x{}, expected {}x{}",
                i + 1,
                m.width,
                m.height,
                first.width,
                first.height
            )));
        }
        for (a, &b) in merged.bits.iter_mut().zip(&m.bits) {
            *a &= b;
        }
    }
    Ok(merged)
}

/// Nearest-neighbour resampling; output stays binary.
pub fn resize_mask(mask: &BinaryMask, width: u32, height: u32) -> Result<BinaryMask> {
    if width == 0 || height == 0 {
        return Err(ImagingError::InvalidInput(format!(
            "target dimensions must be positive, got {width}x{height}"
        )));
    }
    if width == mask.width && height == mask.height {
        return Ok(mask.clone());
    }
    let src_x: Vec<u32> = (0..width).map(|x| nearest(x, width, mask.width)).collect();
    let src_y: Vec<u32> = (0..height).map(|y| nearest(y, height, mask.height)).collect();
    BinaryMask::from_fn(width, height, |x, y| mask.get(src_x[x as usize], src_y[y as usize]))
}

// Source index whose cell contains the destination pixel center.
fn nearest(dst: u32, dst_len: u32, src_len: u32) -> u32 {
    let s = ((2 * dst as u64 + 1) * src_len as u64) / (2 * dst_len as u64);
    (s as u32).min(src_len - 1)
}

/// Summed-area table over a mask for O(1) "is this rectangle all true"
/// queries.
#[derive(Debug, Clone)]
pub struct MaskIntegral {
    width: u32,
    height: u32,
    // (width + 1) x (height + 1), row-major, first row/column zero
    sums: Vec<u32>,
}

impl MaskIntegral {
    pub fn new(mask: &BinaryMask) -> Self {
        let w = mask.width as usize + 1;
        let h = mask.height as usize + 1;
        let mut sums = vec![0u32; w * h];
        for y in 1..h {
            let mut row = 0u32;
            for x in 1..w {
                row += mask.get(x as u32 - 1, y as u32 - 1) as u32;
                sums[y * w + x] = sums[(y - 1) * w + x] + row;
            }
        }
        Self {
            width: mask.width,
            height: mask.height,
            sums,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn count_in(&self, rect: Rect) -> u64 {
        let w = self.width as usize + 1;
        let (x0, y0) = (rect.x as usize, rect.y as usize);
        let (x1, y1) = (rect.right() as usize, rect.bottom() as usize);
        let s = |x: usize, y: usize| self.sums[y * w + x] as i64;
        (s(x1, y1) - s(x0, y1) - s(x1, y0) + s(x0, y0)) as u64
    }

    /// Empty rectangles never fit.
    pub fn all_true(&self, rect: Rect) -> bool {
        rect.area() > 0 && rect.fits_within(self.width, self.height) && self.count_in(rect) == rect.area()
    }
}
