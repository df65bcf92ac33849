//! Universal sticker search.
//!
//! A candidate is a sticker size plus one anchor in canonical-frame percent.
//! The same candidate is composited onto every sign; its objective is the
//! mean, over signs, of the classifier's confidence on misclassified signs
//! (correctly classified signs contribute zero). The sweep evaluates every
//! feasible `(height, width, anchor)` and keeps, per size, the best anchor.

mod config;
mod geometry;
mod search;

pub use config::AttackConfig;
pub use geometry::{enumerate_anchors, Anchor, CandidatePlacement, Layout};
pub use search::{evaluate_candidate, search, SearchConfig, SearchOutcome};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::imaging::{ImagingError, StickerColor};
use crate::victim::VictimError;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("no feasible region: {0}")]
    NoFeasibleRegion(String),
    #[error("classifier failed on sign {sign_id}: {source}")]
    Classifier {
        sign_id: String,
        #[source]
        source: VictimError,
    },
    #[error("invalid attack configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

pub type Result<T> = std::result::Result<T, AttackError>;

/// Sticker colors, top to bottom. One entry for a single sticker, two for a
/// stacked pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StickerPattern(Vec<StickerColor>);

impl StickerPattern {
    pub fn new(colors: Vec<StickerColor>) -> Result<Self> {
        if !(1..=2).contains(&colors.len()) {
            return Err(AttackError::InvalidConfig(format!(
                "a pattern has one or two stickers, got {}",
                colors.len()
            )));
        }
        Ok(Self(colors))
    }

    pub fn single(color: StickerColor) -> Self {
        Self(vec![color])
    }

    pub fn pair(top: StickerColor, bottom: StickerColor) -> Self {
        Self(vec![top, bottom])
    }

    pub fn colors(&self) -> &[StickerColor] {
        &self.0
    }

    pub fn count(&self) -> usize {
        self.0.len()
    }

    /// Every pattern with `count` stickers, black before white.
    pub fn all_with_count(count: usize) -> Vec<Self> {
        use StickerColor::{Black, White};
        match count {
            1 => vec![Self::single(Black), Self::single(White)],
            2 => vec![
                Self::pair(Black, Black),
                Self::pair(Black, White),
                Self::pair(White, Black),
                Self::pair(White, White),
            ],
            _ => Vec::new(),
        }
    }

    /// Column heading, e.g. `One Sticker Black` or `Two Sticker White, Black`.
    pub fn display_name(&self) -> String {
        let cap = |c: &StickerColor| match c {
            StickerColor::Black => "Black",
            StickerColor::White => "White",
        };
        match self.0.as_slice() {
            [c] => format!("One Sticker {}", cap(c)),
            cs => format!(
                "Two Sticker {}",
                cs.iter().map(cap).collect::<Vec<_>>().join(", ")
            ),
        }
    }
}

impl fmt::Display for StickerPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|c| c.name()).collect();
        f.write_str(&names.join("-"))
    }
}

impl FromStr for StickerPattern {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self> {
        let colors = s
            .split(['-', ',', '/'])
            .map(|c| c.parse::<StickerColor>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| AttackError::InvalidConfig(format!("pattern {s:?}: {e}")))?;
        Self::new(colors)
    }
}

impl Serialize for StickerPattern {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StickerPattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignOutcome {
    pub sign_id: String,
    pub true_label: String,
    pub predicted_label: String,
    pub confidence_pct: f64,
    pub flipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub placement: CandidatePlacement,
    pub per_sign: Vec<SignOutcome>,
    /// Mean over signs of the confidence on flipped signs, zero for the rest.
    pub objective: f64,
    pub feasible: bool,
}

impl CandidateResult {
    pub fn flipped_count(&self) -> usize {
        self.per_sign.iter().filter(|s| s.flipped).count()
    }
}

/// One cell of a size sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridCell {
    /// Best objective over all anchors for this size.
    Value(f64),
    /// Excluded by the minimum-area rule; rendered `-`.
    Skipped,
    /// No anchor fits inside the merged mask; rendered `×`.
    Infeasible,
}

pub const SKIPPED_MARK: &str = "-";
pub const INFEASIBLE_MARK: &str = "×";

impl GridCell {
    pub fn value(self) -> Option<f64> {
        match self {
            GridCell::Value(v) => Some(v),
            _ => None,
        }
    }

    /// Two-decimal value or the literal marker.
    pub fn render(self) -> String {
        match self {
            GridCell::Value(v) => format!("{:.2}", v + 0.0),
            GridCell::Skipped => SKIPPED_MARK.to_string(),
            GridCell::Infeasible => INFEASIBLE_MARK.to_string(),
        }
    }

    /// Inverse of [`GridCell::render`]; also accepts `x`/`X` for infeasible.
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            SKIPPED_MARK => Some(GridCell::Skipped),
            INFEASIBLE_MARK | "x" | "X" => Some(GridCell::Infeasible),
            t => t.parse().ok().map(GridCell::Value),
        }
    }
}

impl Serialize for GridCell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            GridCell::Value(v) => s.serialize_f64(*v),
            GridCell::Skipped => s.serialize_str(SKIPPED_MARK),
            GridCell::Infeasible => s.serialize_str(INFEASIBLE_MARK),
        }
    }
}

impl<'de> Deserialize<'de> for GridCell {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Mark(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(GridCell::Value(v)),
            Repr::Mark(m) => GridCell::parse(&m)
                .filter(|c| c.value().is_none())
                .ok_or_else(|| serde::de::Error::custom(format!("unknown grid marker {m:?}"))),
        }
    }
}

/// Best objective per `(height, width)` size; rows are heights, columns
/// widths, both ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub heights: Vec<u32>,
    pub widths: Vec<u32>,
    pub cells: Vec<Vec<GridCell>>,
    /// `(height, width)` of the maximal cell.
    pub best: Option<(u32, u32)>,
}

impl SweepGrid {
    pub fn cell(&self, height: u32, width: u32) -> Option<GridCell> {
        let r = self.heights.iter().position(|&h| h == height)?;
        let c = self.widths.iter().position(|&w| w == width)?;
        Some(self.cells[r][c])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_parsing_and_names() {
        let p: StickerPattern = "white-black".parse().unwrap();
        assert_eq!(p.colors(), &[StickerColor::White, StickerColor::Black]);
        assert_eq!(p.to_string(), "white-black");
        assert_eq!(p.display_name(), "Two Sticker White, Black");
        assert_eq!(StickerPattern::single(StickerColor::Black).display_name(), "One Sticker Black");
        assert!("black-white-black".parse::<StickerPattern>().is_err());
        assert!("green".parse::<StickerPattern>().is_err());
        assert_eq!(StickerPattern::all_with_count(2).len(), 4);
    }

    #[test]
    fn grid_cell_serde() {
        let cells = vec![GridCell::Value(80.24), GridCell::Skipped, GridCell::Infeasible];
        let json = serde_json::to_string(&cells).unwrap();
        assert_eq!(json, r#"[80.24,"-","×"]"#);
        let back: Vec<GridCell> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cells);
        assert!(serde_json::from_str::<GridCell>(r#""?""#).is_err());
        assert_eq!(GridCell::Value(0.0).render(), "0.00");
        assert_eq!(GridCell::parse("X"), Some(GridCell::Infeasible));
    }
}
