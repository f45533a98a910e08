//! Numerical laboratory for Brownian bridges conditioned to stay above
//! concave barriers (semicircles, parabolas, piecewise parabolic shapes)
//! and for their universal fluctuation limit: the stationary diffusion
//! with drift `Ai'(-ω₁ + x) / Ai(-ω₁ + x)` and invariant density
//! `Ai(-ω₁ + x)² / Ai'(-ω₁)²`.
//!
//! Modules:
//!
//! * [`airy`]: real-axis `Ai`, `Ai'`, the zeros `-ω_k` and classical bounds.
//! * [`fsdiff`]: the limit diffusion (drift, stationary law, Euler–Maruyama).
//! * [`kernel`]: spectral heat kernel of the half-line Airy operator, the
//!   parabolic transition density, entrance/exit laws and transfer-operator
//!   contraction over piecewise parabolic barriers.
//! * [`barrier`]: barrier shapes, scaling frames, piecewise approximations of
//!   the semicircle and the fluctuation-regime classifier.
//! * [`mc`]: bridge sampling, rejection conditioning and exact lattice
//!   enumeration for the monotonicity/coupling statements.
//! * [`stats`]: KS distances, autocorrelation and exponent fits.

pub mod airy;
pub mod barrier;
mod error;
pub mod fsdiff;
pub mod kernel;
pub mod mc;
pub mod quad;
pub mod stats;

pub use error::{Error, Result};

/// Library version.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
