use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid battery state: {0}")]
    InvalidState(String),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("no spectral peak: maximum {peak:e} not above 3× noise floor {floor:e}")]
    NoSpectralPeak { peak: f64, floor: f64 },

    #[error("integration failed: {0}")]
    IntegrationFailure(String),

    #[error("degenerate projection: subspace weight {weight:e} below threshold")]
    DegenerateProjection { weight: f64 },

    #[error("inconsistent reconstruction: Bloch length {length} exceeds 1 + 3σ (σ = {std_error})")]
    InconsistentReconstruction { length: f64, std_error: f64 },
}

impl Error {
    /// True for failures of a numerical procedure (fits, integration,
    /// reconstruction) as opposed to bad inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::FitFailure(_)
                | Error::NoSpectralPeak { .. }
                | Error::IntegrationFailure(_)
                | Error::DegenerateProjection { .. }
                | Error::InconsistentReconstruction { .. }
        )
    }
}
