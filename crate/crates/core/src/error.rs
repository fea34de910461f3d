use std::path::PathBuf;

use thiserror::Error;

use crate::chemistry::ChemistryError;
use crate::fuzzy::FuzzyError;
use crate::hybrid::HybridError;
use crate::pid::PidError;
use crate::plant::PlantError;

/// Crate-level error; the module errors convert into it.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Chemistry(#[from] ChemistryError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Pid(#[from] PidError),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
    #[error(transparent)]
    Hybrid(#[from] HybridError),
    #[error("config: {0}")]
    Config(String),
    #[error("segment starting at t = {t_start} s has {samples} samples (need at least 5)")]
    SegmentTooShort { t_start: f64, samples: usize },
    #[error("trace csv{}: {message}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Csv { line: Option<u64>, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    /// True when a run stopped because the plant state blew up.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Plant(PlantError::StateDiverged { .. }))
    }

    /// True for problems with user-supplied configuration or tables.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Fuzzy(FuzzyError::Invalid(_) | FuzzyError::Parse(_))
                | Error::Hybrid(HybridError::InvalidParam { .. })
                | Error::Pid(PidError::InvalidParam { .. })
                | Error::Plant(PlantError::InvalidParam { .. })
                | Error::Chemistry(ChemistryError::InvalidInput { .. })
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
