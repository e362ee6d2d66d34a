use std::path::PathBuf;

use mtss_core::corpus::CorpusError;
use mtss_core::metrics::MetricError;
use mtss_core::models::ModelError;
use mtss_core::synth::SynthError;
use mtss_core::training::TrainError;
use mtss_core::DiffError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed input; `at` names the record or line.
    #[error("{}: {at}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        at: String,
        msg: String,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Diff(#[from] DiffError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub fn parse(path: impl Into<PathBuf>, at: impl Into<String>, msg: impl ToString) -> Error {
        Error::Parse {
            path: path.into(),
            at: at.into(),
            msg: msg.to_string(),
        }
    }

    /// 0 success, 1 usage, 2 data, 3 training divergence.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Usage(_) | Error::Synth(_) | Error::Train(TrainError::Config(_)) => 1,
            Error::Train(TrainError::Diverged(_)) => 3,
            _ => 2,
        }
    }
}
