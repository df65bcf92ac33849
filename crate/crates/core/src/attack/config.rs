use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::search::SearchConfig;
use super::{AttackError, Result, StickerPattern};

fn default_sizes() -> Vec<u32> {
    (5..=50).step_by(5).collect()
}

fn default_stride() -> u32 {
    2
}

fn default_gap() -> u32 {
    5
}

fn default_min_area() -> f64 {
    1.0
}

/// Attack configuration file.
///
/// Patterns are given either explicitly (`"patterns": ["black", "white-black"]`)
/// or as a `sticker_count`, which selects every color pattern with that many
/// stickers. With neither, both single-sticker patterns are searched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub patterns: Vec<StickerPattern>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sticker_count: Option<usize>,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<u32>,
    #[serde(default = "default_stride")]
    pub stride_pct: u32,
    #[serde(default = "default_gap")]
    pub gap_pct: u32,
    #[serde(default = "default_min_area")]
    pub min_area_pct: f64,
    /// `builtin:<weights>` or `external:<command>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Directory of sign PNGs with mask sidecars.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Draw a cross at the anchor of annotated images.
    #[serde(default)]
    pub overlay: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            patterns: Vec::new(),
            sticker_count: None,
            sizes: default_sizes(),
            stride_pct: default_stride(),
            gap_pct: default_gap(),
            min_area_pct: default_min_area(),
            backend: None,
            workers: None,
            signs: None,
            output_dir: None,
            overlay: false,
        }
    }
}

impl AttackConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| AttackError::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AttackError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            AttackError::InvalidConfig(m) => AttackError::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Patterns to search, in configuration order.
    pub fn resolved_patterns(&self) -> Result<Vec<StickerPattern>> {
        match (self.patterns.is_empty(), self.sticker_count) {
            (true, None) => Ok(StickerPattern::all_with_count(1)),
            (true, Some(n)) => {
                let all = StickerPattern::all_with_count(n);
                if all.is_empty() {
                    return Err(AttackError::InvalidConfig(format!("sticker_count must be 1 or 2, got {n}")));
                }
                Ok(all)
            }
            (false, count) => {
                if let Some(n) = count {
                    if let Some(p) = self.patterns.iter().find(|p| p.count() != n) {
                        return Err(AttackError::InvalidConfig(format!(
                            "pattern {p} does not have sticker_count {n} stickers"
                        )));
                    }
                }
                Ok(self.patterns.clone())
            }
        }
    }

    pub fn search_config(&self, pattern: StickerPattern, workers: usize) -> SearchConfig {
        SearchConfig {
            pattern,
            sizes: self.sizes.clone(),
            stride_pct: self.stride_pct,
            gap_pct: self.gap_pct,
            min_area_pct: self.min_area_pct,
            workers,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_standard_sweep() {
        let c = AttackConfig::from_json("{}").unwrap();
        assert_eq!(c.sizes, vec![5, 10, 15, 20, 25, 30, 35, 40, 45, 50]);
        assert_eq!((c.stride_pct, c.gap_pct), (2, 5));
        assert_eq!(c.resolved_patterns().unwrap().len(), 2);
    }

    #[test]
    fn pattern_selection() {
        let c = AttackConfig::from_json(r#"{"sticker_count": 2}"#).unwrap();
        let names: Vec<String> = c.resolved_patterns().unwrap().iter().map(|p| p.to_string()).collect();
        assert_eq!(names, ["black-black", "black-white", "white-black", "white-white"]);

        let c = AttackConfig::from_json(r#"{"patterns": ["white", "black-white"]}"#).unwrap();
        assert_eq!(c.resolved_patterns().unwrap().len(), 2);

        let c = AttackConfig::from_json(r#"{"patterns": ["white"], "sticker_count": 2}"#).unwrap();
        assert!(c.resolved_patterns().is_err());
        assert!(AttackConfig::from_json(r#"{"sticker_count": 3}"#).unwrap().resolved_patterns().is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(AttackConfig::from_json(r#"{"strid_pct": 3}"#).is_err());
        assert!(AttackConfig::from_json(r#"{"patterns": ["purple"]}"#).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let c = AttackConfig {
            patterns: vec!["black".parse().unwrap()],
            backend: Some("builtin:w.sfw".into()),
            workers: Some(4),
            ..Default::default()
        };
        let back = AttackConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
