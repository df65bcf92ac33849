//! Sign sets: user photos with outline sidecars, or procedurally generated
//! signs, all brought into the shared canonical frame.

mod ingest;
mod synthetic;

pub use ingest::{canonicalize, ingest, ingest_dir, CROP_MARGIN};
pub use synthetic::{
    generate_synthetic, render_sample, write_synthetic, ClassSpec, Glyph, ShapeKind, Split, SyntheticConfig,
    SyntheticDataset,
};

use std::collections::BTreeSet;
use std::path::PathBuf;

use thiserror::Error;

use crate::imaging::{BinaryMask, ImagingError, PixelImage};

#[derive(Debug, Error)]
pub enum SignsError {
    #[error("{path}: no annotation sidecar (expected {sidecar})")]
    MissingSidecar { path: PathBuf, sidecar: PathBuf },
    #[error("{path}: {source}")]
    Ingestion {
        path: PathBuf,
        #[source]
        source: ImagingError,
    },
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

pub type Result<T> = std::result::Result<T, SignsError>;

/// One sign in the canonical frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SignRecord {
    pub id: String,
    pub image: PixelImage,
    pub mask: BinaryMask,
    pub true_label: String,
}

impl SignRecord {
    pub fn new(id: impl Into<String>, image: PixelImage, mask: BinaryMask, true_label: impl Into<String>) -> Result<Self> {
        let rec = Self {
            id: id.into(),
            image,
            mask,
            true_label: true_label.into(),
        };
        if rec.image.width() != rec.mask.width() || rec.image.height() != rec.mask.height() {
            return Err(SignsError::InvalidInput(format!(
                "sign {}: image is {}x{} but mask is {}x{}",
                rec.id,
                rec.image.width(),
                rec.image.height(),
                rec.mask.width(),
                rec.mask.height()
            )));
        }
        if rec.mask.is_empty() {
            return Err(SignsError::InvalidAnnotation(format!("sign {}: mask is empty", rec.id)));
        }
        Ok(rec)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignSet {
    pub records: Vec<SignRecord>,
    pub class_names: Vec<String>,
}

impl SignSet {
    /// Builds a set whose class list is the sorted set of record labels.
    pub fn from_records(records: Vec<SignRecord>) -> Result<Self> {
        let class_names = records
            .iter()
            .map(|r| r.true_label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Self::new(records, class_names)
    }

    pub fn new(records: Vec<SignRecord>, class_names: Vec<String>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(SignsError::InvalidInput(format!("duplicate sign id {:?}", r.id)));
            }
            if !class_names.contains(&r.true_label) {
                return Err(SignsError::InvalidInput(format!(
                    "sign {} has label {:?}, not among the class names",
                    r.id, r.true_label
                )));
            }
        }
        Ok(Self { records, class_names })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn masks(&self) -> Vec<BinaryMask> {
        self.records.iter().map(|r| r.mask.clone()).collect()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == label)
    }

    /// `(image, class index)` pairs for training or evaluation.
    pub fn labeled_images(&self) -> Vec<(PixelImage, usize)> {
        self.records
            .iter()
            .map(|r| (r.image.clone(), self.label_index(&r.true_label).expect("validated on construction")))
            .collect()
    }

    /// A new set holding the records at `indices`, same class list.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            class_names: self.class_names.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, label: &str) -> SignRecord {
        SignRecord::new(
            id,
            PixelImage::filled(4, 4, [1, 2, 3]).unwrap(),
            BinaryMask::filled(4, 4, true).unwrap(),
            label,
        )
        .unwrap()
    }

    #[test]
    fn record_invariants() {
        let img = PixelImage::filled(4, 4, [0; 3]).unwrap();
        let empty = BinaryMask::filled(4, 4, false).unwrap();
        assert!(SignRecord::new("a", img.clone(), empty, "x").is_err());
        let small = BinaryMask::filled(3, 4, true).unwrap();
        assert!(SignRecord::new("a", img, small, "x").is_err());
    }

    #[test]
    fn set_invariants() {
        let set = SignSet::from_records(vec![rec("a", "Stop"), rec("b", "Merge")]).unwrap();
        assert_eq!(set.class_names, vec!["Merge".to_string(), "Stop".to_string()]);
        assert_eq!(set.labeled_images()[0].1, 1);
        assert!(SignSet::from_records(vec![rec("a", "Stop"), rec("a", "Stop")]).is_err());
        assert!(SignSet::new(vec![rec("a", "Stop")], vec!["Yield".into()]).is_err());
    }
}
