//! Anti-lock braking laboratory.
//!
//! A 7-DOF longitudinal vehicle with Magic-Formula tyres is braked by a
//! dual-control (exploration/exploitation) controller. The controller acts
//! on the posterior of a regularized particle filter that estimates body
//! speed, wheel speeds and all four tyre coefficients at once. Two
//! extremum-seeking controllers serve as baselines.
//!
//! Module map:
//! - [`tyre`]: friction law, surface presets, road schedules
//! - [`plant`]: ground-truth 7-DOF simulator
//! - [`estimation_model`]: reduced model used by the filter and predictor
//! - [`estimator`]: particle filter
//! - [`dcee`]: dual-control action selection
//! - [`baselines`]: sine-perturbation and bisection extremum seeking
//! - [`scenario`]: closed-loop runs, sweeps, traces and metrics
//! - [`cli`]: command-line front end

pub mod baselines;
pub mod cli;
pub mod dcee;
pub mod error;
pub mod estimation_model;
pub mod estimator;
pub mod plant;
pub mod scenario;
pub mod tyre;

pub use error::{AbsError, Result};
pub use estimation_model::{AugmentedState, Measurement};
pub use plant::{PlantState, VehicleParams, WheelTorques};
pub use tyre::{MagicParams, RoadSchedule, Surface};
