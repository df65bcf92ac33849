//! Portable weight files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"SFWB"                      magic
//! u32                          header length in bytes
//! [u8; header length]          UTF-8 JSON header
//! u64                          FNV-1a 64 of the header bytes
//! [f32; n]                     payload, tensors concatenated in manifest order
//! u64                          FNV-1a 64 of the payload bytes
//! ```
//!
//! The header carries the format version, the architecture, the input
//! normalization, the class names and the tensor manifest (name + shape).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cnn::CnnArchitecture;
use super::{Result, VictimError};

pub const FORMAT_VERSION: u64 = 1;
pub const MAGIC: &[u8; 4] = b"SFWB";
/// Inputs are `sample / 255` with no mean subtraction.
pub const NORMALIZATION: &str = "divide_by_255";

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    /// Row-major.
    #[serde(skip)]
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightBundle {
    pub architecture: CnnArchitecture,
    pub class_names: Vec<String>,
    pub tensors: Vec<NamedTensor>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u64,
    architecture: CnnArchitecture,
    normalization: String,
    class_names: Vec<String>,
    tensors: Vec<NamedTensor>,
}

impl WeightBundle {
    pub fn new(architecture: CnnArchitecture, class_names: Vec<String>, tensors: Vec<NamedTensor>) -> Result<Self> {
        let bundle = Self {
            architecture,
            class_names,
            tensors,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<()> {
        self.architecture.validate()?;
        if self.class_names.len() != self.architecture.num_classes {
            return Err(VictimError::Format(format!(
                "{} class names for a {}-class architecture",
                self.class_names.len(),
                self.architecture.num_classes
            )));
        }
        let layout = self.architecture.tensor_layout()?;
        if layout.len() != self.tensors.len() {
            return Err(VictimError::Format(format!(
                "architecture has {} tensors, manifest lists {}",
                layout.len(),
                self.tensors.len()
            )));
        }
        for ((name, shape), t) in layout.iter().zip(&self.tensors) {
            if *name != t.name || *shape != t.shape {
                return Err(VictimError::Format(format!(
                    "tensor {} {:?} does not match architecture slot {name} {shape:?}",
                    t.name, t.shape
                )));
            }
            let len: usize = t.shape.iter().product();
            if t.data.len() != len {
                return Err(VictimError::Format(format!(
                    "tensor {} declares {len} values but holds {}",
                    t.name,
                    t.data.len()
                )));
            }
        }
        Ok(())
    }

    fn payload(&self) -> Vec<u8> {
        self.tensors
            .iter()
            .flat_map(|t| t.data.iter().flat_map(|v| v.to_le_bytes()))
            .collect()
    }

    /// FNV-1a 64 of the little-endian payload.
    pub fn checksum(&self) -> u64 {
        fnv1a64(&self.payload())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let header = Header {
            format_version: FORMAT_VERSION,
            architecture: self.architecture.clone(),
            normalization: NORMALIZATION.to_string(),
            class_names: self.class_names.clone(),
            tensors: self.tensors.clone(),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let payload = self.payload();
        let mut out = Vec::with_capacity(4 + 4 + header.len() + 8 + payload.len() + 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&fnv1a64(&header).to_le_bytes());
        out.extend_from_slice(&payload);
        out.extend_from_slice(&fnv1a64(&payload).to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(VictimError::Format("not a weight file (bad magic)".into()));
        }
        let header_len = u32::from_le_bytes(cur.take(4)?.try_into().unwrap()) as usize;
        let header = cur.take(header_len)?;
        let header_sum = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
        if fnv1a64(header) != header_sum {
            return Err(VictimError::CorruptWeights("header checksum mismatch".into()));
        }
        let value: serde_json::Value =
            serde_json::from_slice(header).map_err(|e| VictimError::Format(format!("header is not JSON: {e}")))?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| VictimError::Format("header lacks format_version".into()))?;
        if version != FORMAT_VERSION {
            return Err(VictimError::UnsupportedVersion(version));
        }
        let header: Header =
            serde_json::from_value(value).map_err(|e| VictimError::Format(format!("bad header: {e}")))?;
        if header.normalization != NORMALIZATION {
            return Err(VictimError::Format(format!("unsupported normalization {:?}", header.normalization)));
        }

        let rest = &bytes[cur.pos..];
        if rest.len() < 8 {
            return Err(VictimError::Format("file truncated before payload checksum".into()));
        }
        let (payload, trailer) = rest.split_at(rest.len() - 8);
        let declared: usize = header
            .tensors
            .iter()
            .map(|t| t.shape.iter().product::<usize>())
            .sum::<usize>()
            * 4;
        if payload.len() != declared {
            return Err(VictimError::Format(format!(
                "header declares {declared} payload bytes, file holds {}",
                payload.len()
            )));
        }
        if fnv1a64(payload) != u64::from_le_bytes(trailer.try_into().unwrap()) {
            return Err(VictimError::CorruptWeights("payload checksum mismatch".into()));
        }

        let mut floats = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let tensors = header
            .tensors
            .into_iter()
            .map(|t| {
                let len = t.shape.iter().product();
                NamedTensor {
                    data: floats.by_ref().take(len).collect(),
                    ..t
                }
            })
            .collect();
        Self::new(header.architecture, header.class_names, tensors)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| VictimError::Format("file truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
}

pub fn save_weights(bundle: &WeightBundle, path: &Path) -> Result<()> {
    let bytes = bundle.to_bytes()?;
    fs::write(path, bytes).map_err(|source| VictimError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_weights(path: &Path) -> Result<WeightBundle> {
    let bytes = fs::read(path).map_err(|source| VictimError::Io {
        path: path.display().to_string(),
        source,
    })?;
    WeightBundle::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::victim::cnn::{ConvLayerSpec, Network};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_bundle(seed: u64) -> WeightBundle {
        let arch = CnnArchitecture::new(
            6,
            vec![ConvLayerSpec {
                out_channels: 2,
                kernel_size: 3,
                stride: 1,
                pool: true,
            }],
            3,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Network::<f32>::he_uniform(&arch, &mut rng)
            .unwrap()
            .to_bundle(vec!["a".into(), "b".into(), "c".into()])
            .unwrap()
    }

    fn header_span(bytes: &[u8]) -> (usize, usize) {
        let len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        (8, 8 + len)
    }

    // Rewrites the header JSON and fixes up its length and checksum.
    fn with_header(bytes: &[u8], edit: impl FnOnce(&mut serde_json::Value)) -> Vec<u8> {
        let (start, end) = header_span(bytes);
        let mut header: serde_json::Value = serde_json::from_slice(&bytes[start..end]).unwrap();
        edit(&mut header);
        let new_header = serde_json::to_vec(&header).unwrap();
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&(new_header.len() as u32).to_le_bytes());
        out.extend_from_slice(&new_header);
        out.extend_from_slice(&fnv1a64(&new_header).to_le_bytes());
        out.extend_from_slice(&bytes[end + 8..]);
        out
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn file_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = small_bundle(1);
        let path = dir.path().join("w.sfw");
        save_weights(&bundle, &path).unwrap();
        let back = load_weights(&path).unwrap();
        for (a, b) in bundle.tensors.iter().zip(&back.tensors) {
            let abits: Vec<u32> = a.data.iter().map(|v| v.to_bits()).collect();
            let bbits: Vec<u32> = b.data.iter().map(|v| v.to_bits()).collect();
            assert_eq!(abits, bbits);
        }
        assert_eq!(back, bundle);
        assert_eq!(back.checksum(), bundle.checksum());
    }

    #[test]
    fn flipped_payload_byte_is_corrupt() {
        let bytes = small_bundle(2).to_bytes().unwrap();
        let (_, end) = header_span(&bytes);
        let mut bad = bytes.clone();
        bad[end + 8 + 5] ^= 0x01;
        assert!(matches!(WeightBundle::from_bytes(&bad), Err(VictimError::CorruptWeights(_))));
    }

    #[test]
    fn shape_mismatching_payload_is_format_error() {
        let bytes = small_bundle(3).to_bytes().unwrap();
        let bad = with_header(&bytes, |h| {
            h["tensors"][0]["shape"] = serde_json::json!([2, 3, 3, 4]);
        });
        assert!(matches!(WeightBundle::from_bytes(&bad), Err(VictimError::Format(_))));
        // truncated payload
        let mut short = bytes.clone();
        short.drain(bytes.len() - 12..bytes.len() - 8);
        assert!(matches!(WeightBundle::from_bytes(&short), Err(VictimError::Format(_))));
    }

    #[test]
    fn unknown_version_is_rejected() {
        let bytes = small_bundle(4).to_bytes().unwrap();
        let bad = with_header(&bytes, |h| h["format_version"] = serde_json::json!(7));
        assert!(matches!(WeightBundle::from_bytes(&bad), Err(VictimError::UnsupportedVersion(7))));
    }

    #[test]
    fn header_is_plain_json() {
        let bytes = small_bundle(5).to_bytes().unwrap();
        let (start, end) = header_span(&bytes);
        let header: serde_json::Value = serde_json::from_slice(&bytes[start..end]).unwrap();
        assert_eq!(header["format_version"], 1);
        assert_eq!(header["normalization"], NORMALIZATION);
        assert_eq!(header["class_names"], serde_json::json!(["a", "b", "c"]));
        assert_eq!(header["tensors"][0]["name"], "conv1.weight");
        assert_eq!(header["architecture"]["input_size"], 6);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_weights(Path::new("/nonexistent/w.sfw")), Err(VictimError::Io { .. })));
    }

    proptest! {
        #[test]
        fn any_single_byte_corruption_is_detected(pos in any::<prop::sample::Index>(), flip in 1u8..=255) {
            let bytes = small_bundle(6).to_bytes().unwrap();
            let mut bad = bytes.clone();
            let i = pos.index(bad.len());
            bad[i] ^= flip;
            prop_assert!(WeightBundle::from_bytes(&bad).is_err());
        }

        #[test]
        fn roundtrip_random_bundles(seed in any::<u64>()) {
            let bundle = small_bundle(seed);
            let back = WeightBundle::from_bytes(&bundle.to_bytes().unwrap()).unwrap();
            prop_assert_eq!(back, bundle);
        }
    }
}
