//! Classifier backends behind one prediction interface.
//!
//! The built-in backend is a small three-conv/one-FC network with its own
//! portable weight format and a minibatch SGD trainer. The external backend
//! talks newline-delimited JSON to another process and treats it as a pure
//! black box.

mod backend;
mod builtin;
pub mod cnn;
pub mod external;
mod train;
mod verdict;
pub mod weights;

pub use backend::BackendSpec;
pub use builtin::{forward, prepare_input, BuiltinClassifier};
pub use cnn::{CnnArchitecture, ConvLayerSpec, Network};
pub use external::{ExternalClassifier, ExternalClient, DEFAULT_TIMEOUT};
pub use train::{accuracy, train, TrainConfig, TrainReport};
pub use verdict::{softmax, ClassifierVerdict};
pub use weights::{fnv1a64, load_weights, save_weights, NamedTensor, WeightBundle, FORMAT_VERSION};

use thiserror::Error;

use crate::imaging::PixelImage;

#[derive(Debug, Error)]
pub enum VictimError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("corrupt weights: {0}")]
    CorruptWeights(String),
    #[error("unsupported weight format version {0}")]
    UnsupportedVersion(u64),
    #[error("malformed weight file: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("classifier backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

pub type Result<T> = std::result::Result<T, VictimError>;

/// Anything that maps an image to a verdict. Implementations must be
/// shareable across the search's worker threads.
pub trait Classifier: Send + Sync {
    fn predict(&self, img: &PixelImage) -> Result<ClassifierVerdict>;

    /// Short description echoed into run summaries.
    fn describe(&self) -> String {
        "classifier".to_string()
    }
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn predict(&self, img: &PixelImage) -> Result<ClassifierVerdict> {
        (**self).predict(img)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<C: Classifier + ?Sized> Classifier for Box<C> {
    fn predict(&self, img: &PixelImage) -> Result<ClassifierVerdict> {
        (**self).predict(img)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}
