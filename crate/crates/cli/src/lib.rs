//! Configuration, orchestration and the acceptance suite behind the `dnls`
//! binary.

// `!(x >= 1.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod validate;
