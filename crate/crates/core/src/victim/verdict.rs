use serde::{Deserialize, Serialize};

use super::{Result, VictimError};

/// Allowed deviation of a probability vector's sum from 1.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierVerdict {
    pub label_id: usize,
    pub label_name: String,
    /// `100 * max(probs)`, unrounded; tables print two decimals.
    pub confidence_pct: f64,
    pub probs: Vec<f64>,
}

impl ClassifierVerdict {
    /// Builds a verdict from a probability vector, taking the lowest-index
    /// maximum as the label.
    pub fn from_probs(probs: Vec<f64>, class_names: &[String]) -> Result<Self> {
        check_probs(&probs)?;
        let label_id = argmax(&probs);
        let label_name = class_names
            .get(label_id)
            .cloned()
            .unwrap_or_else(|| format!("class_{label_id}"));
        Ok(Self {
            label_id,
            label_name,
            confidence_pct: 100.0 * probs[label_id],
            probs,
        })
    }

    /// Checks the verdict invariants: normalized non-negative probabilities,
    /// argmax label and matching confidence.
    pub fn validate(&self) -> Result<()> {
        check_probs(&self.probs)?;
        let best = argmax(&self.probs);
        if self.label_id != best {
            return Err(VictimError::Protocol(format!(
                "label_id {} is not the argmax of probs (expected {best})",
                self.label_id
            )));
        }
        if (self.confidence_pct - 100.0 * self.probs[best]).abs() > 1e-9 {
            return Err(VictimError::Protocol("confidence does not match probs".into()));
        }
        Ok(())
    }
}

fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(VictimError::Protocol("empty probability vector".into()));
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(VictimError::Protocol(format!("invalid probability {p}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
        return Err(VictimError::Protocol(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

/// Lowest index among the maxima.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax in double precision.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
