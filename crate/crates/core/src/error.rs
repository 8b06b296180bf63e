use thiserror::Error;

use crate::artifact::ArtifactError;
use crate::classifiers::ClassifierError;
use crate::detectors::DetectorError;
use crate::features::FeatureError;
use crate::preprocess::PreprocessError;
use crate::protocols::ProtocolError;
use crate::trace::TraceError;

/// Crate-level error. Each module owns a narrower error type; this one is
/// what the CLI and the service see.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error("config: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
