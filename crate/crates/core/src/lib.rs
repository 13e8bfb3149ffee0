//! Numerics for the nonlinear Schrödinger equation with a point interaction
//! in two and three dimensions.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod genft;
pub mod glassey;
pub mod grids;
pub mod nls;
pub mod pointop;
pub mod propagator;
pub mod specfun;
pub mod waveop;

pub use error::{DnlsError, Result};
