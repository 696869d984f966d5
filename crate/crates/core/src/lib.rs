//! Polar-coordinate parking controllers for the unicycle and the Dubins car,
//! closed-loop simulation, and numerical checks of their Lyapunov
//! certificates and finite-time bounds.

// NaN must fail range checks, so guards are written as `!(x < bound)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod control_laws;
pub mod error;
pub mod geometry;
pub mod simulator;

pub use control_laws::{ControlInput, ControllerSpec, DubinsGains, UnicycleGains};
pub use error::{Error, Result};
pub use geometry::{CartesianState, PolarState};
pub use simulator::{batch_run, integrate, Sample, Scenario, Termination, Trajectory};
