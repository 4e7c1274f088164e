//! Ensemble statistics, steady-state preparation and spectra.

mod spectrum;
mod stats;
mod steady;

pub use spectrum::{
    spectrum_from_correlation, SpectrumMeta, SpectrumOptions, SpectrumResult, DEFAULT_DTAU, DEFAULT_TAU_MAX,
};
pub use stats::{ensemble_stats, Accumulator};
pub use steady::{
    ensemble_covariance, prepare_steady_state, steady_state_oracle, trace_distance_with_stderr, CovarianceEstimate,
    SteadyStateSampler, DEFAULT_STEADY_HORIZON,
};
