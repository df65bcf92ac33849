use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::{BuiltinClassifier, Classifier, ExternalClassifier, Result, VictimError};

/// Where predictions come from: `builtin:<weights>`, `external:<command>`
/// or `external:tcp://<host:port>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Builtin(PathBuf),
    External(String),
    Tcp(String),
}

impl BackendSpec {
    /// Opens the backend. External backends get one connection per worker;
    /// `input_size` makes them receive pre-downscaled images.
    pub fn open(&self, workers: usize, input_size: Option<u32>) -> Result<Box<dyn Classifier>> {
        Ok(match self {
            BackendSpec::Builtin(path) => Box::new(BuiltinClassifier::load(path)?),
            BackendSpec::External(cmd) => Box::new(ExternalClassifier::spawn(cmd, workers)?.with_input_size(input_size)),
            BackendSpec::Tcp(addr) => {
                Box::new(ExternalClassifier::connect_tcp(addr, workers)?.with_input_size(input_size))
            }
        })
    }
}

impl FromStr for BackendSpec {
    type Err = VictimError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || VictimError::InvalidInput(format!("backend {s:?} is not builtin:<weights> or external:<command>"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let rest = rest.trim();
        if rest.is_empty() {
            return Err(bad());
        }
        match kind.trim() {
            "builtin" => Ok(BackendSpec::Builtin(PathBuf::from(rest))),
            "external" => match rest.strip_prefix("tcp://") {
                Some(addr) if !addr.is_empty() => Ok(BackendSpec::Tcp(addr.to_string())),
                Some(_) => Err(bad()),
                None => Ok(BackendSpec::External(rest.to_string())),
            },
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Builtin(p) => write!(f, "builtin:{}", p.display()),
            BackendSpec::External(c) => write!(f, "external:{c}"),
            BackendSpec::Tcp(a) => write!(f, "external:tcp://{a}"),
        }
    }
}
