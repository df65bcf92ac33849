use std::path::Path;

use super::cnn::Network;
use super::verdict::softmax;
use super::weights::{load_weights, WeightBundle};
use super::{Classifier, ClassifierVerdict, Result, VictimError};
use crate::imaging::{resize_image, PixelImage};

/// Brings an image (typically a 256x256 canonical composite) down to a
/// classifier's native resolution with bilinear sampling.
pub fn prepare_input(img: &PixelImage, size: u32) -> PixelImage {
    resize_image(img, size, size).expect("size is positive")
}

/// Channel-major floats in `[0, 1]`.
pub(crate) fn image_to_tensor(img: &PixelImage) -> Vec<f32> {
    let plane = img.width() as usize * img.height() as usize;
    let mut out = vec![0.0f32; 3 * plane];
    for (i, px) in img.data().chunks_exact(3).enumerate() {
        for c in 0..3 {
            out[c * plane + i] = px[c] as f32 / 255.0;
        }
    }
    out
}

fn verdict_from_logits(logits: &[f32], class_names: &[String]) -> Result<ClassifierVerdict> {
    let logits: Vec<f64> = logits.iter().map(|&z| z as f64).collect();
    ClassifierVerdict::from_probs(softmax(&logits), class_names)
}

fn check_size(net: &Network<f32>, img: &PixelImage) -> Result<()> {
    let size = net.architecture().input_size as u32;
    if img.width() != size || img.height() != size {
        return Err(VictimError::Shape(format!(
            "network input is {size}x{size}, image is {}x{}",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

/// Runs the network on an image already at the architecture's input size.
pub fn forward(weights: &WeightBundle, img: &PixelImage) -> Result<ClassifierVerdict> {
    let net = Network::<f32>::from_bundle(weights)?;
    check_size(&net, img)?;
    verdict_from_logits(&net.logits(&image_to_tensor(img))?, &weights.class_names)
}

/// The built-in CNN as a [`Classifier`]; inputs of any size are
/// area-resampled to the network's resolution first.
#[derive(Debug, Clone)]
pub struct BuiltinClassifier {
    bundle: WeightBundle,
    net: Network<f32>,
}

impl BuiltinClassifier {
    pub fn new(bundle: WeightBundle) -> Result<Self> {
        let net = Network::from_bundle(&bundle)?;
        Ok(Self { bundle, net })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(load_weights(path)?)
    }

    pub fn bundle(&self) -> &WeightBundle {
        &self.bundle
    }

    pub fn input_size(&self) -> u32 {
        self.net.architecture().input_size as u32
    }

    pub fn class_names(&self) -> &[String] {
        &self.bundle.class_names
    }
}

impl Classifier for BuiltinClassifier {
    fn predict(&self, img: &PixelImage) -> Result<ClassifierVerdict> {
        let size = self.input_size();
        let resized;
        let img = if img.width() == size && img.height() == size {
            img
        } else {
            resized = prepare_input(img, size);
            &resized
        };
        check_size(&self.net, img)?;
        verdict_from_logits(&self.net.logits(&image_to_tensor(img))?, &self.bundle.class_names)
    }

    fn describe(&self) -> String {
        format!("builtin:fnv1a64={:016x}", self.bundle.checksum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::victim::cnn::{CnnArchitecture, ConvLayerSpec};
    use crate::victim::weights::NamedTensor;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    fn zero_bundle(arch: &CnnArchitecture) -> WeightBundle {
        Network::<f32>::zeros(arch)
            .unwrap()
            .to_bundle(names(arch.num_classes))
            .unwrap()
    }

    #[test]
    fn zero_weights_give_uniform_probs() {
        let arch = CnnArchitecture::lisa_default(4);
        let bundle = zero_bundle(&arch);
        let img = PixelImage::from_fn(32, 32, |x, y| [x as u8 * 7, y as u8 * 5, 99]).unwrap();
        let v = forward(&bundle, &img).unwrap();
        assert_eq!(v.label_id, 0);
        assert!(v.probs.iter().all(|&p| (p - 0.25).abs() < 1e-12));
        assert_eq!(format!("{:.2}", v.confidence_pct), "25.00");
    }

    #[test]
    fn wrong_size_is_shape_error() {
        let bundle = zero_bundle(&CnnArchitecture::lisa_default(2));
        let img = PixelImage::filled(31, 32, [0; 3]).unwrap();
        assert!(matches!(forward(&bundle, &img), Err(VictimError::Shape(_))));
        // the classifier adapter resamples instead
        let clf = BuiltinClassifier::new(bundle).unwrap();
        assert!(clf.predict(&img).is_ok());
    }

    fn identity_net(fc_w: [[f32; 12]; 2], fc_b: [f32; 2]) -> WeightBundle {
        // one 1x1 conv, identity across RGB, no pooling, on a 2x2 input
        let arch = CnnArchitecture::new(
            2,
            vec![ConvLayerSpec {
                out_channels: 3,
                kernel_size: 1,
                stride: 1,
                pool: false,
            }],
            2,
        )
        .unwrap();
        let mut conv_w = vec![0.0f32; 9];
        for c in 0..3 {
            conv_w[c * 3 + c] = 1.0;
        }
        let tensors = vec![
            NamedTensor {
                name: "conv1.weight".into(),
                shape: vec![3, 3, 1, 1],
                data: conv_w,
            },
            NamedTensor {
                name: "conv1.bias".into(),
                shape: vec![3],
                data: vec![0.0; 3],
            },
            NamedTensor {
                name: "fc.weight".into(),
                shape: vec![2, 12],
                data: fc_w.iter().flatten().copied().collect(),
            },
            NamedTensor {
                name: "fc.bias".into(),
                shape: vec![2],
                data: fc_b.to_vec(),
            },
        ];
        WeightBundle::new(arch, vec!["left".into(), "right".into()], tensors).unwrap()
    }

    #[test]
    fn hand_evaluated_forward_pass() {
        // Features are channel-major: R of the 4 pixels, then G, then B.
        // Class 0 reads the red plane, class 1 the blue plane.
        let mut w = [[0.0f32; 12]; 2];
        w[0][..4].copy_from_slice(&[1.0, 1.0, 1.0, 1.0]);
        w[1][8..].copy_from_slice(&[0.5, 0.5, 0.5, 0.5]);
        let bundle = identity_net(w, [0.0, 0.25]);
        // pixels: (255,0,0) (255,0,0) (0,0,255) (0,0,255)
        let img = PixelImage::new(2, 2, vec![255, 0, 0, 255, 0, 0, 0, 0, 255, 0, 0, 255]).unwrap();
        // logit0 = 1+1 = 2, logit1 = 0.25 + 0.5*(1+1) = 1.25
        let e = (2.0f64 - 1.25).exp();
        let expected = [e / (1.0 + e), 1.0 / (1.0 + e)];
        let v = forward(&bundle, &img).unwrap();
        assert_eq!(v.label_id, 0);
        assert_eq!(v.label_name, "left");
        for (p, q) in v.probs.iter().zip(expected) {
            assert!((p - q).abs() < 1e-6, "{p} vs {q}");
        }
    }

    #[test]
    fn logit_shift_keeps_probs() {
        let mut w = [[0.0f32; 12]; 2];
        w[0][0] = 0.8;
        w[1][5] = -1.3;
        w[1][9] = 2.1;
        let img = PixelImage::new(2, 2, vec![10, 200, 30, 90, 0, 255, 45, 60, 75, 180, 2, 128]).unwrap();
        let a = forward(&identity_net(w, [0.1, -0.2]), &img).unwrap();
        let b = forward(&identity_net(w, [3.1, 2.8]), &img).unwrap();
        assert_eq!(a.label_id, b.label_id);
        for (p, q) in a.probs.iter().zip(&b.probs) {
            assert!((p - q).abs() < 1e-6);
        }
    }

    #[test]
    fn repeated_calls_are_bit_identical() {
        let arch = CnnArchitecture::lisa_default(3);
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let bundle = Network::<f32>::he_uniform(&arch, &mut rng).unwrap().to_bundle(names(3)).unwrap();
        let clf = BuiltinClassifier::new(bundle).unwrap();
        let img = PixelImage::from_fn(256, 256, |x, y| [(x ^ y) as u8, x as u8, y as u8]).unwrap();
        let first = clf.predict(&img).unwrap();
        for _ in 0..3 {
            let again = clf.predict(&img).unwrap();
            assert_eq!(again.probs.iter().map(|p| p.to_bits()).collect::<Vec<_>>(),
                       first.probs.iter().map(|p| p.to_bits()).collect::<Vec<_>>());
        }
    }
}
