//! Spectral-Galerkin simulation of nonclassical diffusion with fading memory,
//! `u_t - Δu_t - Δu - ∫₀^∞ μ(s) Δη^t(s) ds = g(u) + f`, in the history
//! formulation `η_t = -η_s + u`, with checkers for its a priori estimates.

pub mod basis;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod harness;
pub mod kernel;
pub mod nonlinear;
pub mod output;
pub mod plot;
pub mod solver;

pub use error::{Error, Result};
