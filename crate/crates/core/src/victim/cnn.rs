//! A small convolutional network: a stack of `conv -> ReLU [-> 2x2 max-pool]`
//! blocks followed by one fully connected layer, with hand-written forward
//! and backward passes.
//!
//! The network is generic over the float type so the trainer runs in `f32`
//! while gradient checks can run the identical code in `f64`. Activations
//! are channel-major (`C x H x W`), convolutions use no padding.

use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::weights::{NamedTensor, WeightBundle};
use super::{Result, VictimError};

/// Input images are always RGB.
pub const INPUT_CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    /// Follow the ReLU with a 2x2, stride-2 max-pool.
    pub pool: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnArchitecture {
    /// Side of the square input, in pixels.
    pub input_size: usize,
    pub conv_layers: Vec<ConvLayerSpec>,
    /// Width of the flattened feature vector entering the FC layer.
    pub fc_units: usize,
    pub num_classes: usize,
}

impl CnnArchitecture {
    /// Three conv blocks and one FC layer on 32x32 input:
    /// 3->16 (5x5), 16->32 (5x5), 32->64 (3x3), each ReLU + 2x2 pool.
    pub fn lisa_default(num_classes: usize) -> Self {
        let conv = |out_channels, kernel_size| ConvLayerSpec {
            out_channels,
            kernel_size,
            stride: 1,
            pool: true,
        };
        let mut arch = Self {
            input_size: 32,
            conv_layers: vec![conv(16, 5), conv(32, 5), conv(64, 3)],
            fc_units: 0,
            num_classes,
        };
        arch.fc_units = arch.feature_len().expect("default architecture is valid");
        arch
    }

    /// Builds an architecture and fills in `fc_units` from the conv stack.
    pub fn new(input_size: usize, conv_layers: Vec<ConvLayerSpec>, num_classes: usize) -> Result<Self> {
        let mut arch = Self {
            input_size,
            conv_layers,
            fc_units: 0,
            num_classes,
        };
        arch.fc_units = arch.feature_len()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        let features = self.feature_len()?;
        if features != self.fc_units {
            return Err(VictimError::Shape(format!(
                "conv stack produces {features} features but fc_units is {}",
                self.fc_units
            )));
        }
        if self.num_classes == 0 {
            return Err(VictimError::Shape("num_classes must be positive".into()));
        }
        Ok(())
    }

    fn feature_len(&self) -> Result<usize> {
        let shapes = self.conv_shapes()?;
        Ok(match shapes.last() {
            Some(s) => s.out_c * s.out_h * s.out_w,
            None => INPUT_CHANNELS * self.input_size * self.input_size,
        })
    }

    pub(crate) fn conv_shapes(&self) -> Result<Vec<ConvShape>> {
        if self.input_size == 0 {
            return Err(VictimError::Shape("input_size must be positive".into()));
        }
        let mut shapes = Vec::with_capacity(self.conv_layers.len());
        let (mut c, mut h, mut w) = (INPUT_CHANNELS, self.input_size, self.input_size);
        for (i, spec) in self.conv_layers.iter().enumerate() {
            if spec.out_channels == 0 || spec.kernel_size == 0 || spec.stride == 0 {
                return Err(VictimError::Shape(format!("conv layer {} has a zero dimension", i + 1)));
            }
            if spec.kernel_size > h || spec.kernel_size > w {
                return Err(VictimError::Shape(format!(
                    "conv layer {}: {}x{} kernel does not fit a {h}x{w} input",
                    i + 1,
                    spec.kernel_size,
                    spec.kernel_size
                )));
            }
            let conv_h = (h - spec.kernel_size) / spec.stride + 1;
            let conv_w = (w - spec.kernel_size) / spec.stride + 1;
            let (out_h, out_w) = if spec.pool { (conv_h / 2, conv_w / 2) } else { (conv_h, conv_w) };
            if out_h == 0 || out_w == 0 {
                return Err(VictimError::Shape(format!("conv layer {} pools down to nothing", i + 1)));
            }
            shapes.push(ConvShape {
                in_c: c,
                in_h: h,
                in_w: w,
                out_c: spec.out_channels,
                k: spec.kernel_size,
                stride: spec.stride,
                conv_h,
                conv_w,
                pool: spec.pool,
                out_h,
                out_w,
            });
            (c, h, w) = (spec.out_channels, out_h, out_w);
        }
        Ok(shapes)
    }

    /// Tensor names and shapes in payload order.
    pub fn tensor_layout(&self) -> Result<Vec<(String, Vec<usize>)>> {
        let shapes = self.conv_shapes()?;
        let mut out = Vec::with_capacity(2 * shapes.len() + 2);
        for (i, s) in shapes.iter().enumerate() {
            out.push((format!("conv{}.weight", i + 1), vec![s.out_c, s.in_c, s.k, s.k]));
            out.push((format!("conv{}.bias", i + 1), vec![s.out_c]));
        }
        out.push(("fc.weight".into(), vec![self.num_classes, self.feature_len()?]));
        out.push(("fc.bias".into(), vec![self.num_classes]));
        Ok(out)
    }

    pub fn param_count(&self) -> Result<usize> {
        Ok(self.tensor_layout()?.iter().map(|(_, s)| s.iter().product::<usize>()).sum())
    }

    pub fn input_len(&self) -> usize {
        INPUT_CHANNELS * self.input_size * self.input_size
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvShape {
    in_c: usize,
    in_h: usize,
    in_w: usize,
    out_c: usize,
    k: usize,
    stride: usize,
    conv_h: usize,
    conv_w: usize,
    pool: bool,
    out_h: usize,
    out_w: usize,
}

impl ConvShape {
    fn weight_len(&self) -> usize {
        self.out_c * self.in_c * self.k * self.k
    }
}

/// Intermediate values kept from a forward pass for backpropagation.
pub struct ForwardCache<T> {
    /// Input to each conv layer; entry 0 is the network input.
    inputs: Vec<Vec<T>>,
    /// Conv output before ReLU.
    pre: Vec<Vec<T>>,
    /// For pooled layers, the flat index into `pre` of each window's max.
    argmax: Vec<Vec<u32>>,
    features: Vec<T>,
    pub logits: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct Network<T> {
    arch: CnnArchitecture,
    shapes: Vec<ConvShape>,
    /// All parameters, concatenated in [`CnnArchitecture::tensor_layout`] order.
    params: Vec<T>,
}

impl<T: Float> Network<T> {
    pub fn zeros(arch: &CnnArchitecture) -> Result<Self> {
        arch.validate()?;
        Ok(Self {
            arch: arch.clone(),
            shapes: arch.conv_shapes()?,
            params: vec![T::zero(); arch.param_count()?],
        })
    }

    /// He-uniform weights (`U(-sqrt(6/fan_in), sqrt(6/fan_in))`), zero biases.
    pub fn he_uniform<R: Rng>(arch: &CnnArchitecture, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(arch)?;
        let mut offset = 0;
        for (name, shape) in arch.tensor_layout()? {
            let len: usize = shape.iter().product();
            if name.ends_with(".weight") {
                let fan_in: usize = shape[1..].iter().product();
                let bound = (6.0 / fan_in as f64).sqrt();
                for p in &mut net.params[offset..offset + len] {
                    *p = T::from(rng.random_range(-bound..bound)).unwrap();
                }
            }
            offset += len;
        }
        Ok(net)
    }

    pub fn from_params(arch: &CnnArchitecture, params: Vec<T>) -> Result<Self> {
        let mut net = Self::zeros(arch)?;
        if params.len() != net.params.len() {
            return Err(VictimError::Shape(format!(
                "architecture needs {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn architecture(&self) -> &CnnArchitecture {
        &self.arch
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn check_input(&self, input: &[T]) -> Result<()> {
        if input.len() != self.arch.input_len() {
            return Err(VictimError::Shape(format!(
                "network expects {} input values ({}x{}x{}), got {}",
                self.arch.input_len(),
                INPUT_CHANNELS,
                self.arch.input_size,
                self.arch.input_size,
                input.len()
            )));
        }
        Ok(())
    }

    /// Raw class scores.
    pub fn logits(&self, input: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_cached(input)?.logits)
    }

    pub fn forward_cached(&self, input: &[T]) -> Result<ForwardCache<T>> {
        self.check_input(input)?;
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.shapes.len()),
            pre: Vec::with_capacity(self.shapes.len()),
            argmax: Vec::with_capacity(self.shapes.len()),
            features: Vec::new(),
            logits: Vec::new(),
        };
        let mut act = input.to_vec();
        let mut offset = 0;
        for s in &self.shapes {
            let (w, rest) = self.params[offset..].split_at(s.weight_len());
            let b = &rest[..s.out_c];
            offset += s.weight_len() + s.out_c;

            let pre = conv_forward(s, &act, w, b);
            let relu: Vec<T> = pre.iter().map(|&v| v.max(T::zero())).collect();
            let (out, arg) = if s.pool {
                max_pool(s, &relu)
            } else {
                (relu, Vec::new())
            };
            cache.inputs.push(std::mem::replace(&mut act, out));
            cache.pre.push(pre);
            cache.argmax.push(arg);
        }
        let features = act;
        let n_in = features.len();
        let (fw, rest) = self.params[offset..].split_at(self.arch.num_classes * n_in);
        let fb = &rest[..self.arch.num_classes];
        cache.logits = (0..self.arch.num_classes)
            .map(|j| {
                let row = &fw[j * n_in..(j + 1) * n_in];
                row.iter().zip(&features).fold(fb[j], |acc, (&wi, &xi)| acc + wi * xi)
            })
            .collect();
        cache.features = features;
        Ok(cache)
    }

    /// Accumulates parameter gradients for one sample into `grads`, given the
    /// loss gradient with respect to the logits.
    pub fn backward(&self, cache: &ForwardCache<T>, dlogits: &[T], grads: &mut [T]) {
        assert_eq!(grads.len(), self.params.len());
        assert_eq!(dlogits.len(), self.arch.num_classes);
        let conv_params: usize = self.shapes.iter().map(|s| s.weight_len() + s.out_c).sum();
        let n_in = cache.features.len();
        let n_cls = self.arch.num_classes;

        let fw = &self.params[conv_params..conv_params + n_cls * n_in];
        let (gfw, gfb) = grads[conv_params..].split_at_mut(n_cls * n_in);
        let mut dact = vec![T::zero(); n_in];
        for j in 0..n_cls {
            let d = dlogits[j];
            gfb[j] = gfb[j] + d;
            let grow = &mut gfw[j * n_in..(j + 1) * n_in];
            for (g, &x) in grow.iter_mut().zip(&cache.features) {
                *g = *g + d * x;
            }
            for (da, &w) in dact.iter_mut().zip(&fw[j * n_in..(j + 1) * n_in]) {
                *da = *da + d * w;
            }
        }

        let mut offset = conv_params;
        for (l, s) in self.shapes.iter().enumerate().rev() {
            offset -= s.weight_len() + s.out_c;
            let pre = &cache.pre[l];
            // undo pooling
            let mut dpre = if s.pool {
                let mut full = vec![T::zero(); pre.len()];
                for (&idx, &d) in cache.argmax[l].iter().zip(&dact) {
                    full[idx as usize] = full[idx as usize] + d;
                }
                full
            } else {
                dact
            };
            for (d, &p) in dpre.iter_mut().zip(pre) {
                if p <= T::zero() {
                    *d = T::zero();
                }
            }
            let w = &self.params[offset..offset + s.weight_len()];
            let (gw, rest) = grads[offset..].split_at_mut(s.weight_len());
            let gb = &mut rest[..s.out_c];
            dact = conv_backward(s, &cache.inputs[l], w, &dpre, gw, gb, l > 0);
        }
    }

    pub fn to_bundle(&self, class_names: Vec<String>) -> Result<WeightBundle>
    where
        T: Into<f64>,
    {
        let mut offset = 0;
        let mut tensors = Vec::new();
        for (name, shape) in self.arch.tensor_layout()? {
            let len: usize = shape.iter().product();
            let data = self.params[offset..offset + len]
                .iter()
                .map(|&v| Into::<f64>::into(v) as f32)
                .collect();
            offset += len;
            tensors.push(NamedTensor { name, shape, data });
        }
        WeightBundle::new(self.arch.clone(), class_names, tensors)
    }

    pub fn from_bundle(bundle: &WeightBundle) -> Result<Self> {
        let params = bundle
            .tensors
            .iter()
            .flat_map(|t| t.data.iter().map(|&v| T::from(v).unwrap()))
            .collect();
        Self::from_params(&bundle.architecture, params)
    }
}

fn conv_forward<T: Float>(s: &ConvShape, input: &[T], w: &[T], b: &[T]) -> Vec<T> {
    let plane = s.conv_h * s.conv_w;
    let mut out = vec![T::zero(); s.out_c * plane];
    for o in 0..s.out_c {
        let dst = &mut out[o * plane..(o + 1) * plane];
        dst.iter_mut().for_each(|v| *v = b[o]);
        for c in 0..s.in_c {
            let src = &input[c * s.in_h * s.in_w..(c + 1) * s.in_h * s.in_w];
            for ky in 0..s.k {
                for kx in 0..s.k {
                    let wv = w[((o * s.in_c + c) * s.k + ky) * s.k + kx];
                    for y in 0..s.conv_h {
                        let row = &src[(y * s.stride + ky) * s.in_w..];
                        let drow = &mut dst[y * s.conv_w..(y + 1) * s.conv_w];
                        if s.stride == 1 {
                            for (d, &v) in drow.iter_mut().zip(&row[kx..kx + s.conv_w]) {
                                *d = *d + wv * v;
                            }
                        } else {
                            for (x, d) in drow.iter_mut().enumerate() {
                                *d = *d + wv * row[x * s.stride + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

// Returns the gradient with respect to the layer input when `want_input`.
fn conv_backward<T: Float>(
    s: &ConvShape,
    input: &[T],
    w: &[T],
    dout: &[T],
    gw: &mut [T],
    gb: &mut [T],
    want_input: bool,
) -> Vec<T> {
    let plane = s.conv_h * s.conv_w;
    let in_plane = s.in_h * s.in_w;
    let mut din = if want_input {
        vec![T::zero(); s.in_c * in_plane]
    } else {
        Vec::new()
    };
    for o in 0..s.out_c {
        let d = &dout[o * plane..(o + 1) * plane];
        gb[o] = d.iter().fold(gb[o], |acc, &v| acc + v);
        for c in 0..s.in_c {
            let src = &input[c * in_plane..(c + 1) * in_plane];
            for ky in 0..s.k {
                for kx in 0..s.k {
                    let wi = ((o * s.in_c + c) * s.k + ky) * s.k + kx;
                    let mut acc = T::zero();
                    for y in 0..s.conv_h {
                        let row_off = (y * s.stride + ky) * s.in_w + kx;
                        let drow = &d[y * s.conv_w..(y + 1) * s.conv_w];
                        for (x, &dv) in drow.iter().enumerate() {
                            acc = acc + dv * src[row_off + x * s.stride];
                        }
                    }
                    gw[wi] = gw[wi] + acc;
                    if want_input {
                        let wv = w[wi];
                        let dplane = &mut din[c * in_plane..(c + 1) * in_plane];
                        for y in 0..s.conv_h {
                            let row_off = (y * s.stride + ky) * s.in_w + kx;
                            let drow = &d[y * s.conv_w..(y + 1) * s.conv_w];
                            for (x, &dv) in drow.iter().enumerate() {
                                let i = row_off + x * s.stride;
                                dplane[i] = dplane[i] + wv * dv;
                            }
                        }
                    }
                }
            }
        }
    }
    din
}

// 2x2 stride-2 max-pool; ties go to the first element in row-major order.
fn max_pool<T: Float>(s: &ConvShape, act: &[T]) -> (Vec<T>, Vec<u32>) {
    let plane = s.conv_h * s.conv_w;
    let mut out = Vec::with_capacity(s.out_c * s.out_h * s.out_w);
    let mut arg = Vec::with_capacity(out.capacity());
    for c in 0..s.out_c {
        for y in 0..s.out_h {
            for x in 0..s.out_w {
                let mut best_i = c * plane + (2 * y) * s.conv_w + 2 * x;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = c * plane + (2 * y + dy) * s.conv_w + 2 * x + dx;
                    if act[i] > act[best_i] {
                        best_i = i;
                    }
                }
                out.push(act[best_i]);
                arg.push(best_i as u32);
            }
        }
    }
    (out, arg)
}

/// Mean softmax cross-entropy over a batch, and its gradient with respect to
/// each sample's logits.
pub fn cross_entropy<T: Float>(logits: &[T], label: usize, batch_len: usize) -> (T, Vec<T>) {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum = exps.iter().fold(T::zero(), |a, &b| a + b);
    let n = T::from(batch_len).unwrap();
    let loss = (sum.ln() - (logits[label] - max)) / n;
    let grad = exps
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let p = e / sum;
            let y = if i == label { T::one() } else { T::zero() };
            (p - y) / n
        })
        .collect();
    (loss, grad)
}

impl<T: Float> Network<T> {
    /// Mean cross-entropy over `(input, label)` pairs and its full parameter
    /// gradient.
    pub fn loss_and_grad(&self, batch: &[(&[T], usize)]) -> Result<(T, Vec<T>)> {
        let mut grads = vec![T::zero(); self.params.len()];
        let mut loss = T::zero();
        for &(input, label) in batch {
            if label >= self.arch.num_classes {
                return Err(VictimError::InvalidInput(format!("label {label} out of range")));
            }
            let cache = self.forward_cached(input)?;
            let (l, dlogits) = cross_entropy(&cache.logits, label, batch.len());
            loss = loss + l;
            self.backward(&cache, &dlogits, &mut grads);
        }
        Ok((loss, grads))
    }

    pub fn loss(&self, batch: &[(&[T], usize)]) -> Result<T> {
        let mut loss = T::zero();
        for &(input, label) in batch {
            let logits = self.logits(input)?;
            loss = loss + cross_entropy(&logits, label, batch.len()).0;
        }
        Ok(loss)
    }
}
