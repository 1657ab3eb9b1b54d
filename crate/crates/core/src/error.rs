use thiserror::Error;

/// Errors raised by the model, sampling and estimation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` out of range: {value}")]
    ParameterOutOfRange { name: &'static str, value: f64 },

    #[error("non-physical state: {0}")]
    NonPhysical(&'static str),

    #[error("analyzer ket is not normalized (norm {0})")]
    UnnormalizedAnalyzer(f64),

    #[error("invalid scan plan: {0}")]
    InvalidPlan(&'static str),

    #[error("scan needs at least 4 points spanning more than pi of phase")]
    InsufficientScan,

    #[error("degenerate design matrix: phases do not resolve a sinusoid")]
    DegenerateDesign,

    #[error("fitted mean level is not positive ({0})")]
    NonPositiveMean(f64),

    #[error("invalid visibility input: {0}")]
    InvalidVisibility(f64),

    #[error("zero calibration denominator: theta=0 H/V visibilities are missing")]
    MissingCalibration,

    #[error("no counts recorded")]
    ZeroCounts,

    #[error("coherence is undefined for I_H = {0}")]
    UndefinedCoherence(f64),

    #[error("coherence time must be positive (got {0})")]
    NonPositiveCoherenceTime(f64),

    #[error("tomography records are missing setting {alpha}{beta}")]
    MissingSetting { alpha: char, beta: char },

    #[error("too few bootstrap replicates: {0} (need at least 100)")]
    TooFewReplicates(usize),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
