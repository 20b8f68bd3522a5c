//! Monthly water-balance modeling with embedded machine learning.
//!
//! The crate couples the four-parameter abcd conceptual model
//! (Thomas, 1981) with a from-scratch regression kit — ridge, lasso,
//! Gaussian-process, ε-support-vector and LSTM regression — so the model's
//! covariate structure can drive data-driven estimates of actual
//! evapotranspiration and streamflow. Around that core sit particle-swarm
//! calibration, Hargreaves PET preparation, evaluation metrics with the
//! Moriasi performance bands, an annual water-balance audit, and a
//! synthetic-catchment generator that the test suite uses as ground truth.
//!
//! All numerics are generic over the scalar type through [`Real`]
//! (`f32` or `f64`); the `*64` aliases below fix `f64`, which is what the
//! `hydroflux` CLI uses throughout.

// negated comparisons (`!(x > 0)`) double as NaN guards; index loops are the
// clearer form in the dense matrix kernels
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod abcd;
pub mod calibrate;
mod error;
pub mod metrics;
pub mod pet;
pub mod piml;
pub mod regress;
mod scalar;
pub mod seed;
pub mod synth;
pub mod timeseries;

pub use error::HydroError;
pub use scalar::{real, Real};

pub type Series64 = timeseries::MonthlySeries<f64>;
pub type Forcing64 = timeseries::MonthlyForcing<f64>;
pub type AbcdParams64 = abcd::AbcdParams<f64>;
pub type AbcdInit64 = abcd::AbcdInit<f64>;
pub type AbcdTrace64 = abcd::AbcdTrace<f64>;
pub type Regressor64 = regress::FittedRegressor<f64>;
pub type RegressorSpec64 = regress::RegressorSpec<f64>;
pub type PimlModel64 = piml::PimlModel<f64>;
pub type PsoConfig64 = calibrate::PsoConfig<f64>;
pub type SynthSpec64 = synth::SynthSpec<f64>;
