//! Exact and self-similar Green's functions of one-dimensional Levy-flight
//! transport with the step-length density `W(rho) = gamma / (2 (1 + rho)^(gamma + 1))`.

// NaN must fail validity checks, hence `!(x > 0.0)` rather than `x <= 0.0`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accuracy;
pub mod automodel;
pub mod error;
pub mod exact;
pub mod interp;
pub mod kernel;
pub mod meshes;
pub mod numfmt;
pub mod quadrature;
pub mod reconstruct;
pub mod sweep;

pub use error::{Error, MeshError, Result};
