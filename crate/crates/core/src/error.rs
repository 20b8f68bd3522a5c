use thiserror::Error;

/// Umbrella error for callers that drive the whole pipeline.
#[derive(Debug, Error)]
pub enum HydroError {
    #[error(transparent)]
    Timeseries(#[from] crate::timeseries::TimeseriesError),
    #[error(transparent)]
    Pet(#[from] crate::pet::PetError),
    #[error(transparent)]
    Abcd(#[from] crate::abcd::AbcdError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Regress(#[from] crate::regress::RegressError),
    #[error(transparent)]
    Calibrate(#[from] crate::calibrate::CalibrateError),
    #[error(transparent)]
    Piml(#[from] crate::piml::PimlError),
    #[error(transparent)]
    Synth(#[from] crate::synth::SynthError),
}

impl HydroError {
    /// Stable machine-readable tag for error reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            HydroError::Timeseries(_) => "timeseries",
            HydroError::Pet(_) => "pet",
            HydroError::Abcd(_) => "abcd",
            HydroError::Metrics(_) => "metrics",
            HydroError::Regress(_) => "regress",
            HydroError::Calibrate(_) => "calibrate",
            HydroError::Piml(_) => "piml",
            HydroError::Synth(_) => "synth",
        }
    }
}
