//! Coupled-dipole simulation of light scattering by a cold cloud of three-level Λ atoms:
//! random cylindrical clouds, light-mediated couplings, mean-field dynamics, steady-state
//! transmission spectra and STIRAP transfer.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for `f32` and
//! `f64`). The aliases below fix it to `f64`.

pub mod cloud;
pub mod dynamics;
pub mod error;
pub mod kernel;
pub mod num;
pub mod observables;
pub mod oracle;
pub mod params;
pub mod seeds;

pub use error::{Error, Result};
pub use kernel::KernelMode;
pub use num::Real;
pub use params::ExcitedDecay;

pub type Cloud = cloud::CloudGeometry<f64>;
pub type CloudSpec = cloud::CloudSpec<f64>;
pub type Detector = cloud::DetectorDisk<f64>;
pub type Params = params::LambdaParams<f64>;
pub type Matrices = kernel::InteractionMatrices<f64>;
pub type State = dynamics::EnsembleState<f64>;
pub type Schedule = dynamics::StirapSchedule<f64>;
pub type Plan = observables::SpectrumPlan<f64>;
pub type Spectrum = observables::SpectrumResult<f64>;
pub type StirapPlan = observables::StirapPlan<f64>;
pub type Oracle = oracle::OracleParams<f64>;
