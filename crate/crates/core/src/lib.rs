//! Dual scattering channel time-domain kernel.
//!
//! A connection–reflection process engine over hexahedral meshes, closed
//! form propagators for linear model equations, a heat-diffusion model on
//! non-orthogonal cells and the dispersion-test harness.

pub mod engine;
pub mod harness;
pub mod heat_model;
pub mod linear_propagator;
pub mod mesh;
pub mod state;
