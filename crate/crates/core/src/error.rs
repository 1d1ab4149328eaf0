use thiserror::Error;

use crate::abmil::ModelError;
use crate::data::{DataError, FormatError, ManifestError};
use crate::diffcore::TensorError;
use crate::dtfd::DtfdError;
use crate::metrics::MetricError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Dtfd(#[from] DtfdError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
