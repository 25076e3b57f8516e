use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Every variant carries enough context to be reported verbatim in a run
/// summary; [`Error::code`] gives the stable machine-readable name.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: defect {defect:e} exceeds {tolerance:e}")]
    NonHermitianInput { defect: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, got {found} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("degenerate spectrum at level {level}: gap {gap:e} below {tolerance:e}")]
    DegenerateSpectrum { level: usize, gap: f64, tolerance: f64 },

    #[error("reference overlap {overlap:e} vanishes at arc length {arc_length}")]
    ReferenceOverlapVanishing { overlap: f64, arc_length: f64 },

    #[error("path is not closed: endpoint mismatch {mismatch:e}")]
    PathNotClosed { mismatch: f64 },

    #[error("level tracking lost between samples {from} and {to}: |<n|n'>|^2 = {fidelity}")]
    LevelTrackingLost { from: usize, to: usize, fidelity: f64 },

    #[error("energy {energy} is below the potential minimum {minimum}")]
    EnergyBelowMinimum { energy: f64, minimum: f64 },

    #[error("sampling failure: {reason}")]
    SamplingFailure { reason: String },

    #[error("step size too large: relative energy drift {drift:e} exceeds {bound:e}")]
    StepSizeTooLarge { drift: f64, bound: f64 },

    #[error("system is not integrable: {0}")]
    NotIntegrable(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable error code used in reports and CSV status columns.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonHermitianInput { .. } => "NonHermitianInput",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::DegenerateSpectrum { .. } => "DegenerateSpectrum",
            Error::ReferenceOverlapVanishing { .. } => "ReferenceOverlapVanishing",
            Error::PathNotClosed { .. } => "PathNotClosed",
            Error::LevelTrackingLost { .. } => "LevelTrackingLost",
            Error::EnergyBelowMinimum { .. } => "EnergyBelowMinimum",
            Error::SamplingFailure { .. } => "SamplingFailure",
            Error::StepSizeTooLarge { .. } => "StepSizeTooLarge",
            Error::NotIntegrable(_) => "NotIntegrable",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
