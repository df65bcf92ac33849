//! Run summaries, results tables and annotated attack images.
//!
//! Output layout under a run directory:
//! `summary.json`, `tables/*.csv`, `tables/*.md`, `images/<sign>_<pattern>.png`.

mod images;
mod tables;

pub use images::{annotate_images, draw_cross, CROSS_COLOR};
pub use tables::{
    parse_sweep_csv, render_baseline_table, render_best_tables, render_sweep_table, BestTables, TableFormat,
};

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{search, AttackConfig, AttackError, CandidateResult, StickerPattern, SweepGrid};
use crate::imaging::ImagingError;
use crate::signs::SignSet;
use crate::victim::Classifier;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed table: {0}")]
    Table(String),
    #[error("malformed summary: {0}")]
    Summary(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

pub type Result<T> = std::result::Result<T, ReportError>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Clean-image verdict for one sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEntry {
    pub sign_id: String,
    pub true_label: String,
    pub predicted_label: String,
    pub confidence_pct: f64,
}

impl BaselineEntry {
    pub fn correct(&self) -> bool {
        self.predicted_label == self.true_label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSummary {
    pub pattern: StickerPattern,
    pub best: CandidateResult,
    pub grid: SweepGrid,
    pub candidates_evaluated: usize,
    /// Whether the best candidate flips at least one sign.
    pub attack_succeeded: bool,
}

impl PatternSummary {
    pub fn new(pattern: StickerPattern, best: CandidateResult, grid: SweepGrid, candidates_evaluated: usize) -> Self {
        Self {
            attack_succeeded: best.flipped_count() > 0 && best.objective > 0.0,
            pattern,
            best,
            grid,
            candidates_evaluated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternTiming {
    pub pattern: StickerPattern,
    pub seconds: f64,
}

/// Everything that varies between otherwise identical runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub workers: usize,
    pub baseline_seconds: f64,
    pub patterns: Vec<PatternTiming>,
    pub total_seconds: f64,
}

/// Machine-readable result of one attack run. Tables are views of this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: AttackConfig,
    pub classifier: String,
    pub class_names: Vec<String>,
    pub baseline: Vec<BaselineEntry>,
    pub patterns: Vec<PatternSummary>,
    pub timings: Timings,
}

impl RunSummary {
    pub fn sign_ids(&self) -> Vec<&str> {
        self.baseline.iter().map(|b| b.sign_id.as_str()).collect()
    }

    /// Every baseline sign appears, in order, in every pattern's best result.
    pub fn validate(&self) -> Result<()> {
        let ids = self.sign_ids();
        for p in &self.patterns {
            let got: Vec<&str> = p.best.per_sign.iter().map(|s| s.sign_id.as_str()).collect();
            if got != ids {
                return Err(ReportError::Summary(format!(
                    "pattern {} covers signs {got:?}, baseline has {ids:?}",
                    p.pattern
                )));
            }
        }
        Ok(())
    }

    /// Classifies the clean signs, then searches every configured pattern.
    ///
    /// The echoed configuration drops `workers` and `output_dir`; the worker
    /// count is recorded under `timings` instead.
    pub fn collect<C: Classifier + ?Sized>(
        signs: &SignSet,
        config: &AttackConfig,
        classifier: &C,
        workers: usize,
    ) -> std::result::Result<Self, AttackError> {
        let patterns = config.resolved_patterns()?;
        let started = Instant::now();

        let mut baseline = Vec::with_capacity(signs.len());
        for rec in &signs.records {
            let v = classifier.predict(&rec.image).map_err(|source| AttackError::Classifier {
                sign_id: rec.id.clone(),
                source,
            })?;
            baseline.push(BaselineEntry {
                sign_id: rec.id.clone(),
                true_label: rec.true_label.clone(),
                predicted_label: v.label_name,
                confidence_pct: v.confidence_pct,
            });
        }
        let mut timings = Timings {
            workers,
            baseline_seconds: started.elapsed().as_secs_f64(),
            ..Timings::default()
        };

        let mut results = Vec::with_capacity(patterns.len());
        for pattern in patterns {
            let t = Instant::now();
            let outcome = search(signs, &config.search_config(pattern.clone(), workers), classifier)?;
            timings.patterns.push(PatternTiming {
                pattern: pattern.clone(),
                seconds: t.elapsed().as_secs_f64(),
            });
            results.push(PatternSummary::new(
                pattern,
                outcome.best,
                outcome.grid,
                outcome.candidates_evaluated,
            ));
        }
        timings.total_seconds = started.elapsed().as_secs_f64();

        Ok(Self {
            config: AttackConfig {
                workers: None,
                output_dir: None,
                ..config.clone()
            },
            classifier: classifier.describe(),
            class_names: signs.class_names.clone(),
            baseline,
            patterns: results,
            timings,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    /// The summary as JSON with the `timings` subtree removed; equal across
    /// runs that differ only in scheduling.
    pub fn deterministic_json(&self) -> String {
        strip_timings(&self.to_json()).expect("own output is valid JSON")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text).map_err(|e| ReportError::Summary(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text).map_err(|e| match e {
            ReportError::Summary(m) => ReportError::Summary(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Re-serializes a summary JSON document without its `timings` key.
pub fn strip_timings(json: &str) -> Result<String> {
    let mut v: serde_json::Value = serde_json::from_str(json).map_err(|e| ReportError::Summary(e.to_string()))?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timings");
    }
    Ok(serde_json::to_string_pretty(&v).expect("value serializes"))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(io_err(path))
}

/// Writes `summary.json` and every table under `out`; with `signs`, also the
/// annotated images of each pattern's best candidate. Returns written paths.
pub fn write_report(summary: &RunSummary, signs: Option<&SignSet>, out: &Path, overlay: bool) -> Result<Vec<PathBuf>> {
    summary.validate()?;
    let tables_dir = out.join("tables");
    std::fs::create_dir_all(&tables_dir).map_err(io_err(&tables_dir))?;
    let mut written = Vec::new();
    let mut emit = |path: PathBuf, text: String| -> Result<()> {
        write_file(&path, text)?;
        written.push(path);
        Ok(())
    };

    emit(out.join("summary.json"), summary.to_json())?;
    for (fmt, ext) in [(TableFormat::Csv, "csv"), (TableFormat::Markdown, "md")] {
        emit(tables_dir.join(format!("baseline.{ext}")), render_baseline_table(summary, fmt))?;
        let best = render_best_tables(summary, fmt);
        emit(tables_dir.join(format!("best_confidence.{ext}")), best.confidence)?;
        emit(tables_dir.join(format!("best_labels.{ext}")), best.labels)?;
        for p in &summary.patterns {
            emit(
                tables_dir.join(format!("sweep_{}.{ext}", p.pattern)),
                render_sweep_table(&p.grid, fmt),
            )?;
        }
    }

    if let Some(signs) = signs {
        let images_dir = out.join("images");
        for p in summary.patterns.iter().filter(|p| p.best.feasible) {
            written.extend(annotate_images(signs, &p.best, &images_dir, overlay)?);
        }
    }
    Ok(written)
}
