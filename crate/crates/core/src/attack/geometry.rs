use serde::{Deserialize, Serialize};

use crate::imaging::{pct_to_px, BinaryMask, MaskIntegral, Rect, StickerSpec};

/// Top-left corner of a placement, in whole percent of the canonical frame.
/// Orders by `(y, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Anchor {
    pub x_pct: u32,
    pub y_pct: u32,
}

impl Anchor {
    pub fn new(x_pct: u32, y_pct: u32) -> Self {
        Self { x_pct, y_pct }
    }
}

impl PartialOrd for Anchor {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Anchor {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.y_pct, self.x_pct).cmp(&(other.y_pct, other.x_pct))
    }
}

/// How many stickers share one size, and the vertical gap between a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub count: usize,
    pub gap_pct: u32,
}

impl Layout {
    pub const SINGLE: Layout = Layout { count: 1, gap_pct: 0 };

    pub fn pair(gap_pct: u32) -> Self {
        Self { count: 2, gap_pct }
    }

    /// Sticker rectangles for a `height_pct x width_pct` size at `anchor` in
    /// a `frame_w x frame_h` frame. Pairs stack vertically: the second
    /// sticker starts `gap` pixels below the first.
    pub fn rects(&self, frame_w: u32, frame_h: u32, height_pct: u32, width_pct: u32, anchor: Anchor) -> Vec<Rect> {
        let x = pct_to_px(anchor.x_pct, frame_w);
        let y = pct_to_px(anchor.y_pct, frame_h);
        let w = pct_to_px(width_pct, frame_w);
        let h = pct_to_px(height_pct, frame_h);
        let gap = pct_to_px(self.gap_pct, frame_h);
        (0..self.count as u32)
            .map(|i| Rect::new(x, y + i * (h + gap), w, h))
            .collect()
    }

    /// Bounding rectangle of all stickers, gaps included.
    pub fn footprint(&self, frame_w: u32, frame_h: u32, height_pct: u32, width_pct: u32, anchor: Anchor) -> Rect {
        let rects = self.rects(frame_w, frame_h, height_pct, width_pct, anchor);
        let first = rects[0];
        let last = rects[rects.len() - 1];
        Rect::new(first.x, first.y, first.width, (last.bottom() - first.y as u64) as u32)
    }
}

/// A concrete universal sticker configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CandidatePlacement {
    /// Top to bottom; all share one size.
    pub stickers: Vec<StickerSpec>,
    pub anchor: Anchor,
    pub gap_pct: u32,
}

impl CandidatePlacement {
    pub fn layout(&self) -> Layout {
        Layout {
            count: self.stickers.len(),
            gap_pct: self.gap_pct,
        }
    }

    /// `(height_pct, width_pct)`.
    pub fn size(&self) -> (u32, u32) {
        (self.stickers[0].height_pct, self.stickers[0].width_pct)
    }

    pub fn rects(&self, frame_w: u32, frame_h: u32) -> Vec<Rect> {
        let (h, w) = self.size();
        self.layout().rects(frame_w, frame_h, h, w, self.anchor)
    }

    pub fn footprint(&self, frame_w: u32, frame_h: u32) -> Rect {
        let (h, w) = self.size();
        self.layout().footprint(frame_w, frame_h, h, w, self.anchor)
    }

    /// Sort key for deterministic tie-breaking: `(h, w, y, x)`.
    pub fn order_key(&self) -> (u32, u32, u32, u32) {
        let (h, w) = self.size();
        (h, w, self.anchor.y_pct, self.anchor.x_pct)
    }
}

pub(crate) fn anchors_in(
    integral: &MaskIntegral,
    size: (u32, u32),
    stride_pct: u32,
    layout: Layout,
) -> Vec<Anchor> {
    assert!(stride_pct > 0, "stride must be positive");
    let (h, w) = size;
    let (fw, fh) = (integral.width(), integral.height());
    let steps: Vec<u32> = (0..=100).step_by(stride_pct as usize).collect();
    let mut out = Vec::new();
    for &y in &steps {
        for &x in &steps {
            let anchor = Anchor::new(x, y);
            if integral.all_true(layout.footprint(fw, fh, h, w, anchor)) {
                out.push(anchor);
            }
        }
    }
    out
}

/// Grid anchors (every `stride_pct` percent on both axes) whose whole
/// footprint lies on true pixels of `merged`, ordered by `(y, x)`.
///
/// # Panics
///
/// If `stride_pct` is zero.
pub fn enumerate_anchors(merged: &BinaryMask, size: (u32, u32), stride_pct: u32, layout: Layout) -> Vec<Anchor> {
    anchors_in(&MaskIntegral::new(merged), size, stride_pct, layout)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(value: bool) -> BinaryMask {
        BinaryMask::filled(256, 256, value).unwrap()
    }

    #[test]
    fn full_mask_half_size_stride_50() {
        let anchors = enumerate_anchors(&frame(true), (50, 50), 50, Layout::SINGLE);
        assert_eq!(
            anchors,
            vec![Anchor::new(0, 0), Anchor::new(50, 0), Anchor::new(0, 50), Anchor::new(50, 50)]
        );
    }

    #[test]
    fn empty_mask_has_no_anchors() {
        assert!(enumerate_anchors(&frame(false), (5, 5), 5, Layout::SINGLE).is_empty());
    }

    #[test]
    fn sticker_larger_than_mask_box() {
        // 40% x 40% square region
        let m = BinaryMask::from_fn(256, 256, |x, y| (64..166).contains(&x) && (64..166).contains(&y)).unwrap();
        assert!(enumerate_anchors(&m, (45, 10), 1, Layout::SINGLE).is_empty());
        assert!(enumerate_anchors(&m, (10, 45), 1, Layout::SINGLE).is_empty());
        assert!(!enumerate_anchors(&m, (35, 35), 1, Layout::SINGLE).is_empty());
    }

    #[test]
    fn pair_footprint_includes_gap() {
        let layout = Layout::pair(5);
        let rects = layout.rects(256, 256, 10, 20, Anchor::new(10, 10));
        // 10% of 256 = 26 px, gap 5% = 13 px
        assert_eq!(rects, vec![Rect::new(26, 26, 51, 26), Rect::new(26, 65, 51, 26)]);
        assert_eq!(layout.footprint(256, 256, 10, 20, Anchor::new(10, 10)), Rect::new(26, 26, 51, 65));
        // a 50% pair plus gap never fits the frame
        assert!(enumerate_anchors(&frame(true), (50, 5), 5, layout).is_empty());
        assert!(!enumerate_anchors(&frame(true), (45, 5), 5, layout).is_empty());
    }

    #[test]
    fn anchors_sorted_by_y_then_x() {
        let anchors = enumerate_anchors(&frame(true), (10, 10), 10, Layout::SINGLE);
        let mut sorted = anchors.clone();
        sorted.sort();
        assert_eq!(anchors, sorted);
        assert_eq!(anchors.len(), 10 * 10);
    }
}
