use std::path::{Path, PathBuf};

use super::{io_err, ReportError, Result};
use crate::attack::{CandidateResult, StickerPattern};
use crate::imaging::{save_png, PixelImage};
use crate::signs::SignSet;

pub const CROSS_COLOR: [u8; 3] = [255, 0, 0];
const CROSS_ARM: i64 = 6;

/// Draws a diagonal cross centred at `(cx, cy)`, clipped to the image.
pub fn draw_cross(img: &mut PixelImage, cx: u32, cy: u32) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    for d in -CROSS_ARM..=CROSS_ARM {
        for (x, y) in [(cx as i64 + d, cy as i64 + d), (cx as i64 + d, cy as i64 - d)] {
            if (0..w).contains(&x) && (0..h).contains(&y) {
                img.set_pixel(x as u32, y as u32, CROSS_COLOR);
            }
        }
    }
}

/// Writes `<outdir>/<sign>_<pattern>.png` for every sign with the best
/// candidate's stickers composited; `overlay` adds a cross at the anchor.
pub fn annotate_images(signs: &SignSet, best: &CandidateResult, outdir: &Path, overlay: bool) -> Result<Vec<PathBuf>> {
    if !best.feasible {
        return Err(ReportError::Precondition(
            "cannot annotate with an infeasible candidate".into(),
        ));
    }
    let placement = &best.placement;
    let pattern = StickerPattern::new(placement.stickers.iter().map(|s| s.color).collect())
        .map_err(|e| ReportError::Precondition(e.to_string()))?;
    std::fs::create_dir_all(outdir).map_err(io_err(outdir))?;

    let mut written = Vec::with_capacity(signs.len());
    for rec in &signs.records {
        let (fw, fh) = (rec.image.width(), rec.image.height());
        let mut img = rec.image.clone();
        for (rect, spec) in placement.rects(fw, fh).into_iter().zip(&placement.stickers) {
            img = crate::imaging::apply_sticker(&img, rect, spec.color)?;
        }
        if overlay {
            let anchor = placement.rects(fw, fh)[0];
            draw_cross(&mut img, anchor.x, anchor.y);
        }
        let path = outdir.join(format!("{}_{pattern}.png", rec.id));
        save_png(&img, &path)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{Anchor, CandidatePlacement};
    use crate::imaging::{load_png, BinaryMask, StickerColor, StickerSpec};
    use crate::signs::SignRecord;

    fn setup() -> (SignSet, CandidateResult) {
        let recs = ["stop", "yield", "merge"]
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let img = PixelImage::from_fn(64, 64, |x, y| [x as u8 * 3, y as u8 * 3, 40 * i as u8 + 10]).unwrap();
                SignRecord::new(*id, img, BinaryMask::filled(64, 64, true).unwrap(), *id).unwrap()
            })
            .collect();
        let best = CandidateResult {
            placement: CandidatePlacement {
                stickers: vec![StickerSpec { color: StickerColor::White, width_pct: 25, height_pct: 10 }],
                anchor: Anchor::new(50, 25),
                gap_pct: 0,
            },
            per_sign: vec![],
            objective: 0.0,
            feasible: true,
        };
        (SignSet::from_records(recs).unwrap(), best)
    }

    #[test]
    fn images_differ_only_inside_footprint() {
        let (signs, best) = setup();
        let dir = tempfile::tempdir().unwrap();
        let paths = annotate_images(&signs, &best, dir.path(), false).unwrap();
        assert_eq!(paths.len(), 3);
        assert!(paths[0].ends_with("stop_white.png"));
        let rect = best.placement.footprint(64, 64);
        for (rec, path) in signs.records.iter().zip(&paths) {
            let out = load_png(path).unwrap();
            for y in 0..64 {
                for x in 0..64 {
                    let expect = if rect.contains(x, y) { [255; 3] } else { rec.image.pixel(x, y) };
                    assert_eq!(out.pixel(x, y), expect, "({x},{y})");
                }
            }
        }
    }

    #[test]
    fn overlay_marks_anchor() {
        let (signs, best) = setup();
        let dir = tempfile::tempdir().unwrap();
        let paths = annotate_images(&signs, &best, dir.path(), true).unwrap();
        let out = load_png(&paths[1]).unwrap();
        let r = best.placement.rects(64, 64)[0];
        assert_eq!(out.pixel(r.x, r.y), CROSS_COLOR);
        assert_eq!(out.pixel(r.x - 3, r.y + 3), CROSS_COLOR);
    }

    #[test]
    fn infeasible_rejected() {
        let (signs, mut best) = setup();
        best.feasible = false;
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            annotate_images(&signs, &best, dir.path(), false),
            Err(ReportError::Precondition(_))
        ));
    }
}
