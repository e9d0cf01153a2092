//! Damped Fourier spectral solver for the "bad" Boussinesq equation
//! `u_tt - u_xx - (u^2)_xx - u_xxxx = 0`, with exact and asymptotic
//! reference solutions built from direct scattering data.

// `!(x > 0.0)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod integrator;
pub mod scattering;
pub mod scheme;
pub mod spectral;
pub mod waves;

pub use error::{Error, Result};
