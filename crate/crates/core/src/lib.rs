//! Population dynamics of an isolated multimode bosonic cavity under
//! three-wave mixing.
//!
//! The crate is organised around the mode-occupation kinetic equation:
//!
//! - [`model`]: the equidistant mode ladder, the coupling kernels (a registry
//!   of interchangeable [`model::CouplingKernel`] implementations selected by
//!   name), population vectors and initial conditions.
//! - [`kinetics`]: the right-hand side of the kinetic equation, the quadratic
//!   coupling null rate, and an adaptive embedded Runge–Kutta integrator.
//! - [`equilibrium`]: Bose–Einstein populations, energy bookkeeping and the
//!   inverse-temperature solver.
//! - [`stability`]: the linear decay spectrum around the Bose–Einstein fixed
//!   point and dynamic perturbation tests.
//!
//! All quantities are in reduced units: `hbar = 1`, the free spectral range is
//! one, and time is `tau = delta_omega * t`. Mode indices are 1-based in every
//! public API, matching `omega_k = k * delta_omega` for `k = 1..=N`.

pub mod equilibrium;
mod error;
pub mod kinetics;
pub mod model;
pub mod stability;
pub mod stats;

pub use error::{Error, Result};
