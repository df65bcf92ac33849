use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geometry::{anchors_in, CandidatePlacement, Layout};
use super::{AttackError, CandidateResult, GridCell, Result, SignOutcome, StickerPattern, SweepGrid};
use crate::imaging::{merge_masks, MaskIntegral, StickerSpec};
use crate::signs::SignSet;
use crate::victim::Classifier;

/// Parameters of one size sweep for one sticker pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub pattern: StickerPattern,
    /// Candidate side lengths in percent; heights and widths both range over
    /// this list.
    pub sizes: Vec<u32>,
    pub stride_pct: u32,
    pub gap_pct: u32,
    /// Sizes whose footprint covers less than this percentage of the frame
    /// are skipped.
    pub min_area_pct: f64,
    pub workers: usize,
}

impl SearchConfig {
    pub fn new(pattern: StickerPattern, sizes: Vec<u32>) -> Self {
        Self {
            pattern,
            sizes,
            stride_pct: 1,
            gap_pct: 5,
            min_area_pct: 1.0,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(AttackError::InvalidConfig(m));
        if self.sizes.is_empty() {
            return bad("size list is empty".into());
        }
        if let Some(s) = self.sizes.iter().find(|&&s| s == 0 || s > 100) {
            return bad(format!("size {s}% is outside 1..=100"));
        }
        if self.stride_pct == 0 || self.stride_pct > 100 {
            return bad(format!("stride {}% is outside 1..=100", self.stride_pct));
        }
        if self.gap_pct > 100 {
            return bad(format!("gap {}% exceeds the frame", self.gap_pct));
        }
        if !self.min_area_pct.is_finite() || self.min_area_pct < 0.0 {
            return bad(format!("minimum area {} is not a non-negative number", self.min_area_pct));
        }
        if self.workers == 0 {
            return bad("worker count must be at least 1".into());
        }
        Ok(())
    }

    fn layout(&self) -> Layout {
        Layout {
            count: self.pattern.count(),
            gap_pct: if self.pattern.count() > 1 { self.gap_pct } else { 0 },
        }
    }

    /// Footprint (gap included for pairs) as a percentage of the frame,
    /// compared against `min_area_pct`.
    fn is_skipped(&self, h: u32, w: u32) -> bool {
        let layout = self.layout();
        let n = layout.count as u64;
        let tall = n * h as u64 + (n - 1) * layout.gap_pct as u64;
        let area_pct = (tall * w as u64) as f64 / 100.0;
        area_pct < self.min_area_pct
    }

    fn placement(&self, h: u32, w: u32, anchor: super::Anchor) -> CandidatePlacement {
        CandidatePlacement {
            stickers: self
                .pattern
                .colors()
                .iter()
                .map(|&color| StickerSpec {
                    color,
                    width_pct: w,
                    height_pct: h,
                })
                .collect(),
            anchor,
            gap_pct: self.layout().gap_pct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: CandidateResult,
    pub grid: SweepGrid,
    pub candidates_evaluated: usize,
}

/// Composites `placement` onto every sign and classifies the results.
///
/// An infeasible placement (footprint not fully inside some sign's mask) is
/// still evaluated, but its objective is zero.
pub fn evaluate_candidate<C: Classifier + ?Sized>(
    signs: &SignSet,
    placement: &CandidatePlacement,
    classifier: &C,
) -> Result<CandidateResult> {
    if signs.is_empty() {
        return Err(AttackError::InvalidConfig("sign set is empty".into()));
    }
    let mut per_sign = Vec::with_capacity(signs.len());
    let mut feasible = true;
    for rec in &signs.records {
        let (fw, fh) = (rec.image.width(), rec.image.height());
        let footprint = placement.footprint(fw, fh);
        if !footprint.fits_within(fw, fh) {
            return Err(AttackError::Imaging(crate::imaging::ImagingError::InvalidRect {
                rect: footprint,
                width: fw,
                height: fh,
            }));
        }
        feasible &= MaskIntegral::new(&rec.mask).all_true(footprint);
        let mut img = rec.image.clone();
        for (rect, spec) in placement.rects(fw, fh).into_iter().zip(&placement.stickers) {
            img.fill_rect(rect, spec.color.rgb());
        }
        let verdict = classifier.predict(&img).map_err(|source| AttackError::Classifier {
            sign_id: rec.id.clone(),
            source,
        })?;
        per_sign.push(SignOutcome {
            sign_id: rec.id.clone(),
            true_label: rec.true_label.clone(),
            flipped: verdict.label_name != rec.true_label,
            predicted_label: verdict.label_name,
            confidence_pct: verdict.confidence_pct,
        });
    }
    let objective = if feasible {
        per_sign.iter().filter(|s| s.flipped).fold(0.0, |acc, s| acc + s.confidence_pct) / per_sign.len() as f64
    } else {
        0.0
    };
    Ok(CandidateResult {
        placement: placement.clone(),
        per_sign,
        objective,
        feasible,
    })
}

/// Sweeps every size in `config.sizes` squared and every feasible anchor,
/// evaluating candidates on a pool of `config.workers` threads.
///
/// Results are reduced in `(h, w, y, x)` order, so the outcome does not
/// depend on the worker count; ties go to the lexicographically smallest
/// candidate.
pub fn search<C: Classifier + ?Sized>(signs: &SignSet, config: &SearchConfig, classifier: &C) -> Result<SearchOutcome> {
    config.validate()?;
    if signs.is_empty() {
        return Err(AttackError::InvalidConfig("sign set is empty".into()));
    }
    let merged = merge_masks(&signs.masks())?;
    if merged.is_empty() {
        return Err(AttackError::NoFeasibleRegion(
            "the merged mask has no pixel common to all signs".into(),
        ));
    }
    let integral = MaskIntegral::new(&merged);

    let mut sizes = config.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let layout = config.layout();

    let mut cells = vec![vec![GridCell::Infeasible; sizes.len()]; sizes.len()];
    let mut jobs = Vec::new();
    for (r, &h) in sizes.iter().enumerate() {
        for (c, &w) in sizes.iter().enumerate() {
            let anchors = anchors_in(&integral, (h, w), config.stride_pct, layout);
            if anchors.is_empty() {
                continue;
            }
            if config.is_skipped(h, w) {
                cells[r][c] = GridCell::Skipped;
                continue;
            }
            jobs.extend(anchors.into_iter().map(|a| (r, c, config.placement(h, w, a))));
        }
    }
    if jobs.is_empty() {
        return Err(AttackError::NoFeasibleRegion(format!(
            "no sticker size in {:?} fits inside the merged mask above the {}% minimum area",
            sizes, config.min_area_pct
        )));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| AttackError::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let results: Vec<CandidateResult> = pool.install(|| {
        jobs.par_iter()
            .map(|(_, _, p)| evaluate_candidate(signs, p, classifier))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut best: Option<usize> = None;
    for (i, ((r, c, _), res)) in jobs.iter().zip(&results).enumerate() {
        match cells[*r][*c] {
            GridCell::Value(v) if res.objective <= v => {}
            _ => cells[*r][*c] = GridCell::Value(res.objective),
        }
        if best.is_none_or(|b| res.objective > results[b].objective) {
            best = Some(i);
        }
    }
    let best = results[best.expect("at least one job")].clone();
    Ok(SearchOutcome {
        grid: SweepGrid {
            heights: sizes.clone(),
            widths: sizes,
            cells,
            best: Some(best.placement.size()),
        },
        best,
        candidates_evaluated: jobs.len(),
    })
}
