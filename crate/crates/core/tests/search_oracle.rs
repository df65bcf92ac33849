//! `search` against a direct brute-force enumeration that shares no code
//! with the library's geometry or reduction.

use proptest::prelude::*;
use sticker_forge_core::imaging::{BinaryMask, PixelImage, StickerColor};
use sticker_forge_core::signs::{SignRecord, SignSet};
use sticker_forge_core::victim::{Classifier, ClassifierVerdict, Result as VResult};
use sticker_forge_core::{search, GridCell, SearchConfig, StickerPattern};

const N: u32 = 64;

fn px(pct: u32) -> u32 {
    (pct * N + 50) / 100
}

/// Flips a sign when the target pixel is covered by sticker color.
struct PixelProbe {
    target: (u32, u32),
    confidence: Vec<f64>,
}

impl Classifier for PixelProbe {
    fn predict(&self, img: &PixelImage) -> VResult<ClassifierVerdict> {
        // sign index lives in the blue channel of pixel (N-1, N-1)
        let sign = img.pixel(N - 1, N - 1)[2] as usize;
        let p = img.pixel(self.target.0, self.target.1);
        let covered = p == [0, 0, 0] || p == [255, 255, 255];
        Ok(ClassifierVerdict {
            label_id: covered as usize,
            label_name: if covered { "other".into() } else { format!("c{sign}") },
            confidence_pct: self.confidence[sign],
            probs: vec![],
        })
    }
}

/// Objective and `(h, w, y, x)` key of the best candidate.
type Best = (f64, (u32, u32, u32, u32));

/// Returns the best candidate and the grid.
fn brute_force(
    masks: &[Vec<bool>],
    sizes: &[u32],
    stride: u32,
    count: u32,
    gap: u32,
    probe: &PixelProbe,
) -> (Option<Best>, Vec<Vec<Option<f64>>>) {
    let mut best: Option<(f64, (u32, u32, u32, u32))> = None;
    let mut grid = vec![vec![None; sizes.len()]; sizes.len()];
    for (r, &h) in sizes.iter().enumerate() {
        for (c, &w) in sizes.iter().enumerate() {
            let mut y = 0;
            while y <= 100 {
                let mut x = 0;
                while x <= 100 {
                    let (x0, y0, wp, hp, gp) = (px(x), px(y), px(w), px(h), px(gap));
                    let total_h = count * hp + (count - 1) * gp;
                    let inside = x0 + wp <= N && y0 + total_h <= N && wp > 0 && hp > 0;
                    let fits = inside
                        && masks.iter().all(|m| {
                            (y0..y0 + total_h).all(|yy| (x0..x0 + wp).all(|xx| m[(yy * N + xx) as usize]))
                        });
                    if fits {
                        let (tx, ty) = probe.target;
                        let covered = (x0..x0 + wp).contains(&tx)
                            && (0..count).any(|i| {
                                let top = y0 + i * (hp + gp);
                                (top..top + hp).contains(&ty)
                            });
                        let obj = if covered {
                            probe.confidence.iter().sum::<f64>() / probe.confidence.len() as f64
                        } else {
                            0.0
                        };
                        let key = (h, w, y, x);
                        if best.is_none_or(|(b, k)| obj > b || (obj == b && key < k)) {
                            best = Some((obj, key));
                        }
                        if grid[r][c].is_none_or(|v| obj > v) {
                            grid[r][c] = Some(obj);
                        }
                    }
                    x += stride;
                }
                y += stride;
            }
        }
    }
    (best, grid)
}

fn rect_mask(x0: u32, y0: u32, x1: u32, y1: u32) -> Vec<bool> {
    (0..N * N).map(|i| (x0..x1).contains(&(i % N)) && (y0..y1).contains(&(i / N))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn search_equals_brute_force(
        boxes in prop::collection::vec((0u32..24, 0u32..24, 40u32..=64, 40u32..=64), 3),
        sizes in prop::collection::btree_set(prop::sample::select(vec![5u32, 10, 15, 20, 25, 30, 40, 50]), 1..=3),
        target in (0u32..N - 1, 0u32..N - 1),
        confidence in prop::collection::vec(50.0f64..99.0, 3),
        two in any::<bool>(),
    ) {
        let sizes: Vec<u32> = sizes.into_iter().collect();
        let masks: Vec<Vec<bool>> = boxes.iter().map(|&(a, b, c, d)| rect_mask(a, b, c, d)).collect();
        let records = masks
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let mut img = PixelImage::filled(N, N, [90, 120, 150]).unwrap();
                img.set_pixel(N - 1, N - 1, [90, 120, i as u8]);
                SignRecord::new(format!("s{i}"), img, BinaryMask::new(N, N, m.clone()).unwrap(), format!("c{i}")).unwrap()
            })
            .collect();
        let mut names: Vec<String> = (0..3).map(|i| format!("c{i}")).collect();
        names.push("other".into());
        let signs = SignSet::new(records, names).unwrap();
        let probe = PixelProbe { target, confidence };
        let pattern = if two {
            StickerPattern::pair(StickerColor::Black, StickerColor::White)
        } else {
            StickerPattern::single(StickerColor::White)
        };
        let cfg = SearchConfig { stride_pct: 25, min_area_pct: 0.0, ..SearchConfig::new(pattern, sizes.clone()) };

        let (best, grid) = brute_force(&masks, &sizes, 25, if two { 2 } else { 1 }, 5, &probe);
        match search(&signs, &cfg, &probe) {
            Ok(out) => {
                let (obj, (h, w, y, x)) = best.expect("oracle found a candidate");
                prop_assert_eq!(out.best.objective, obj);
                prop_assert_eq!(out.best.placement.order_key(), (h, w, y, x));
                for (r, row) in grid.iter().enumerate() {
                    for (c, v) in row.iter().enumerate() {
                        let expect = v.map(GridCell::Value).unwrap_or(GridCell::Infeasible);
                        prop_assert_eq!(out.grid.cells[r][c], expect);
                    }
                }
            }
            Err(e) => prop_assert!(best.is_none(), "search failed ({e}) but oracle found {best:?}"),
        }
    }
}
