use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::builtin::{image_to_tensor, prepare_input};
use super::cnn::{cross_entropy, CnnArchitecture, Network};
use super::weights::WeightBundle;
use super::{Classifier, Result, VictimError};
use crate::imaging::PixelImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 12,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(VictimError::InvalidInput(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(VictimError::InvalidInput("epochs and batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
}

/// Minibatch SGD on softmax cross-entropy.
///
/// Initialization and the per-epoch shuffles draw from one ChaCha stream
/// seeded with `cfg.seed`, so identical inputs give bit-identical weights.
pub fn train(
    dataset: &[(PixelImage, usize)],
    arch: &CnnArchitecture,
    class_names: Vec<String>,
    cfg: &TrainConfig,
) -> Result<(WeightBundle, TrainReport)> {
    cfg.validate()?;
    arch.validate()?;
    if dataset.is_empty() {
        return Err(VictimError::InvalidInput("training set is empty".into()));
    }
    if let Some((_, label)) = dataset.iter().find(|(_, l)| *l >= arch.num_classes) {
        return Err(VictimError::InvalidInput(format!(
            "label {label} out of range for {} classes",
            arch.num_classes
        )));
    }
    if class_names.len() != arch.num_classes {
        return Err(VictimError::InvalidInput(format!(
            "{} class names for {} classes",
            class_names.len(),
            arch.num_classes
        )));
    }

    let size = arch.input_size as u32;
    let inputs: Vec<Vec<f32>> = dataset
        .iter()
        .map(|(img, _)| image_to_tensor(&prepare_input(img, size)))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = Network::<f32>::he_uniform(arch, &mut rng)?;
    let mut grads = vec![0.0f32; net.params().len()];
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let lr = cfg.learning_rate as f32;
    let mut report = TrainReport::default();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let cache = net.forward_cached(&inputs[i])?;
                let (loss, dlogits) = cross_entropy(&cache.logits, dataset[i].1, batch.len());
                epoch_loss += loss as f64 * batch.len() as f64;
                net.backward(&cache, &dlogits, &mut grads);
            }
            for (p, g) in net.params_mut().iter_mut().zip(&grads) {
                *p -= lr * g;
            }
        }
        report.epoch_losses.push(epoch_loss / dataset.len() as f64);
    }

    let correct = inputs
        .iter()
        .zip(dataset)
        .filter(|(x, (_, label))| {
            let logits = net.logits(x).expect("input sized by construction");
            argmax_f32(&logits) == *label
        })
        .count();
    report.train_accuracy = correct as f64 / dataset.len() as f64;
    Ok((net.to_bundle(class_names)?, report))
}

fn argmax_f32(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Fraction of `(image, label)` pairs the classifier gets right.
pub fn accuracy<C: Classifier + ?Sized>(classifier: &C, dataset: &[(PixelImage, usize)]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(VictimError::InvalidInput("evaluation set is empty".into()));
    }
    let mut correct = 0;
    for (img, label) in dataset {
        if classifier.predict(img)?.label_id == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}
