//! Universal black/white sticker attacks against traffic-sign classifiers.
//!
//! The pipeline: sign photos and their outline annotations are brought into
//! a shared canonical frame ([`signs`]), their masks are intersected into the
//! region where a sticker fits on every sign ([`imaging`]), every sticker
//! size and anchor inside that region is evaluated against a black-box
//! classifier ([`victim`], [`attack`]), and the winning configuration is
//! written out as tables and composited images ([`report`]).

pub mod attack;
pub mod imaging;
pub mod report;
pub mod signs;
pub mod victim;

pub use attack::{
    enumerate_anchors, evaluate_candidate, search, Anchor, AttackConfig, AttackError, CandidatePlacement,
    CandidateResult, GridCell, Layout, SearchConfig, SearchOutcome, SignOutcome, StickerPattern, SweepGrid,
};
pub use imaging::{
    apply_sticker, merge_masks, rasterize_polygon, resize_image, resize_mask, BinaryMask, ImagingError, PixelImage,
    PolygonAnnotation, Rect, StickerColor, StickerSpec, CANONICAL_SIZE,
};

pub use victim::{BackendSpec, BuiltinClassifier, Classifier, ClassifierVerdict, CnnArchitecture, VictimError, WeightBundle};
pub use report::{write_report, ReportError, RunSummary, TableFormat};
pub use signs::{SignRecord, SignSet, SignsError};
