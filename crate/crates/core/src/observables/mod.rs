//! Scattered light, transmission spectra and their window metrics, and ensemble
//! averages of STIRAP runs.

mod field;
mod metrics;
mod quadrature;
mod spectrum;
mod stats;
mod stirap;

pub use field::{
    intensity, total_field, transmission, transmission_checked, CheckedTransmission, QUADRATURE_TOLERANCE,
};
pub use metrics::{window_metrics, WindowMetrics};
pub use quadrature::{gauss_legendre, DiskRule};
pub use spectrum::{
    default_grid, run_realization, spectrum, spectrum_partial, uniform_grid, PartialSpectrum, RealizationDiagnostics, RealizationPlan,
    RealizationSpectrum, SpectrumMetrics, SpectrumPlan, SpectrumResult, DEFAULT_FWHM_REL_STDERR,
};
pub use stats::{ensemble_stats, EnsembleStats};
pub use stirap::{
    run_stirap_realization, stirap, unit_samples, StirapDiagnostics, StirapPlan, StirapRealization, StirapResult,
    DEFAULT_STIRAP_T_END,
};
