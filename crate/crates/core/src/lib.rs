//! Pairwise SIS epidemic on an adaptive contact network, controlled by link rewiring.
//!
//! * [`model`]: state, parameters, closures and the two controlled vector fields.
//! * [`integrator`]: fixed-step RK4 over piecewise-constant control schedules.
//! * [`equilibria`]: steady states, stability, transcritical and Hopf boundaries.
//! * [`nmpc`]: the receding-horizon controller and the controllability check.
//! * [`experiments`]: parameter sweeps, critical bounds and named scenarios.
//! * [`config`] and [`io`]: flat `key = value` configuration, CSV and JSON artifacts.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod equilibria;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod io;
pub mod linalg;
pub mod model;
pub mod nmpc;
pub mod optimize;

pub use config::Overrides;
pub use error::{Error, Result};
pub use integrator::{simulate, step_f, ControlSchedule, StepConfig, Trajectory};
pub use model::{ControlInput, Dynamics, ModelState, System, SystemParams};
pub use nmpc::{run_nmpc, ControlResult, NmpcConfig};
